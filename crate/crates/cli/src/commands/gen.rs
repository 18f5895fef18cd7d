//! `gen`: write the configured synthetic dataset to disk.

use crate::commands::run::load_experiment_dataset;
use crate::config::{resolve_output_dir, DatasetSpec, ExperimentConfig};
use anyhow::{bail, Context, Result};
use drmd_core::data::{manifest_path, save_dataset};
use std::path::Path;

pub fn cmd_gen(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<i32> {
    match cfg.dataset.spec()? {
        DatasetSpec::Generate(_) => {}
        DatasetSpec::Path(_) => {
            bail!("gen needs [dataset.generate]; this config points at an existing file")
        }
    }
    let data = load_experiment_dataset(cfg)?;
    let out_path = match out {
        Some(p) => resolve_output_dir(p),
        None => resolve_output_dir(&cfg.run.output_dir).join("dataset.jsonl"),
    };
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    save_dataset(&out_path, &data.samples, &data.manifest)?;
    let months = data.manifest.counts.len();
    println!(
        "wrote {} samples across {months} months to {}",
        data.samples.len(),
        out_path.display()
    );
    println!("manifest: {}", manifest_path(&out_path).display());
    println!("dataset digest: {}", data.digest);
    Ok(0)
}
