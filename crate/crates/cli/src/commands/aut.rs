//! `aut`: recompute the area-under-time aggregate from a per-month CSV, as
//! an independent cross-check of a run summary.

use anyhow::{anyhow, bail, Context, Result};
use drmd_core::eval::aut_defined;
use std::path::Path;

pub fn cmd_aut(csv_path: &Path, column: &str) -> Result<i32> {
    let mut reader = csv::Reader::from_path(csv_path)
        .with_context(|| format!("reading {}", csv_path.display()))?;
    let headers = reader.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| anyhow!("column {column:?} not found; headers are {headers:?}"))?;

    let mut series: Vec<Option<f64>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = record.get(idx).unwrap_or("").trim();
        series.push(if cell.is_empty() {
            None
        } else {
            Some(cell.parse::<f64>().with_context(|| {
                format!("row {}: {cell:?} is not a number", row + 1)
            })?)
        });
    }

    match aut_defined(&series)? {
        Some(value) => {
            println!("{value}");
            Ok(0)
        }
        None => bail!(
            "area under time needs at least two months with a defined {column} value \
             ({} rows read)",
            series.len()
        ),
    }
}
