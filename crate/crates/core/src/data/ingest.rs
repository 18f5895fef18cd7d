//! JSONL dataset files and their sidecar manifests.
//!
//! A dataset is a JSON Lines file, one record per sample:
//! `{"id": string, "month": integer, "label": 0|1, "features": [ascending
//! unique integers]}`. Next to it lives `<stem>.manifest.json` describing the
//! feature-space width, the month range, per-month class counts, and the
//! dataset's provenance. Both files are byte-exact contracts: saving the same
//! samples twice produces identical bytes.
//!
//! Errors distinguish malformed JSON ([`Error::Parse`]) from well-formed
//! records with invalid content ([`Error::Schema`]); both carry 1-based line
//! numbers. Manifest-level inconsistencies report line 0.

use crate::env::{Label, Sample};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// How a dataset came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Read from an externally produced file.
    Ingested,
    /// Produced by the seeded synthetic generator.
    Synthetic,
}

/// Per-month class counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonthCounts {
    pub month: u32,
    pub goodware: usize,
    pub malware: usize,
}

/// Sidecar description of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Feature-space width; every active index is strictly below it.
    pub feature_dim: usize,
    /// `[first, last]` month present; `[0, 0]` for an empty dataset.
    pub month_range: [u32; 2],
    /// Class counts per month, ascending by month.
    pub counts: Vec<MonthCounts>,
    pub source: DatasetSource,
    /// Generator seed for synthetic datasets.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl DatasetManifest {
    /// Build a manifest describing `samples` exactly.
    ///
    /// `feature_dim` may exceed the largest active index (a fixed feature
    /// space with inactive tail features is legal) but not undercut it.
    pub fn from_samples(
        samples: &[Sample],
        feature_dim: usize,
        source: DatasetSource,
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        let mut max_index: Option<u32> = None;
        for s in samples {
            let entry = counts.entry(s.month).or_insert((0, 0));
            match s.label {
                Label::Goodware => entry.0 += 1,
                Label::Malware => entry.1 += 1,
            }
            if let Some(&last) = s.features.last() {
                max_index = Some(max_index.map_or(last, |m| m.max(last)));
            }
        }
        if let Some(m) = max_index {
            if (m as usize) >= feature_dim {
                return Err(Error::Schema {
                    line: 0,
                    detail: format!(
                        "feature index {m} requires feature_dim > {m}, manifest says {feature_dim}"
                    ),
                });
            }
        }
        let month_range = match (counts.keys().next(), counts.keys().next_back()) {
            (Some(&first), Some(&last)) => [first, last],
            _ => [0, 0],
        };
        Ok(DatasetManifest {
            feature_dim,
            month_range,
            counts: counts
                .into_iter()
                .map(|(month, (goodware, malware))| MonthCounts { month, goodware, malware })
                .collect(),
            source,
            seed,
        })
    }

    /// Error unless this manifest describes `samples` exactly (month range
    /// and per-month class counts; feature indices within `feature_dim`).
    pub fn check_against(&self, samples: &[Sample]) -> Result<()> {
        let observed =
            DatasetManifest::from_samples(samples, self.feature_dim, self.source, self.seed)?;
        if observed.month_range != self.month_range {
            return Err(Error::Schema {
                line: 0,
                detail: format!(
                    "manifest month_range {:?} but file spans {:?}",
                    self.month_range, observed.month_range
                ),
            });
        }
        if observed.counts != self.counts {
            return Err(Error::Schema {
                line: 0,
                detail: "manifest per-month counts do not match the sample file".into(),
            });
        }
        Ok(())
    }
}

/// The sidecar manifest path for a dataset file: `data.jsonl` →
/// `data.manifest.json` in the same directory.
pub fn manifest_path(dataset_path: &Path) -> PathBuf {
    let stem = dataset_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    dataset_path.with_file_name(format!("{stem}.manifest.json"))
}

/// On-disk record layout. Field order is the serialization order, so saved
/// files are byte-stable.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    month: u32,
    label: u8,
    features: Vec<u32>,
}

fn record_to_sample(raw: RawRecord, line: usize) -> Result<Sample> {
    let label = Label::from_u8(raw.label).map_err(|_| Error::Schema {
        line,
        detail: format!("label must be 0 or 1, got {}", raw.label),
    })?;
    if let Some(w) = raw.features.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Schema {
            line,
            detail: format!(
                "feature indices must be strictly ascending, found {} then {}",
                w[0], w[1]
            ),
        });
    }
    Ok(Sample {
        id: raw.id,
        month: raw.month,
        label,
        features: raw.features,
    })
}

/// Read a JSONL dataset (and its sidecar manifest, if present).
///
/// Whitespace-only lines are skipped. Records are validated (label domain,
/// strictly ascending feature indices, indices within the manifest's
/// `feature_dim` when a sidecar exists) and returned sorted by month with
/// file order preserved inside each month. Without a sidecar, a manifest is
/// inferred with `feature_dim` = largest active index + 1.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<(Vec<Sample>, DatasetManifest)> {
    let path = path.as_ref();
    let sidecar_file = manifest_path(path);
    let sidecar: Option<DatasetManifest> = if sidecar_file.exists() {
        let text = std::fs::read_to_string(&sidecar_file)?;
        Some(serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: 0,
            detail: format!("manifest {}: {e}", sidecar_file.display()),
        })?)
    } else {
        None
    };

    let reader = BufReader::new(File::open(path)?);
    let mut samples = Vec::new();
    let mut max_index: Option<u32> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: line_no,
            detail: e.to_string(),
        })?;
        let sample = record_to_sample(raw, line_no)?;
        if let Some(&last) = sample.features.last() {
            if let Some(m) = &sidecar {
                if (last as usize) >= m.feature_dim {
                    return Err(Error::Schema {
                        line: line_no,
                        detail: format!(
                            "feature index {last} out of range for feature_dim {}",
                            m.feature_dim
                        ),
                    });
                }
            }
            max_index = Some(max_index.map_or(last, |m| m.max(last)));
        }
        samples.push(sample);
    }
    samples.sort_by_key(|s| s.month);

    let manifest = match sidecar {
        Some(m) => {
            m.check_against(&samples)?;
            m
        }
        None => DatasetManifest::from_samples(
            &samples,
            max_index.map_or(0, |m| m as usize + 1),
            DatasetSource::Ingested,
            None,
        )?,
    };
    Ok((samples, manifest))
}

/// The canonical JSONL line for one sample (no trailing newline) — exactly
/// the bytes [`save_dataset`] writes, so in-memory datasets can be digested
/// without touching disk.
pub fn record_line(sample: &Sample) -> Result<String> {
    let raw = RawRecord {
        id: sample.id.clone(),
        month: sample.month,
        label: sample.label.as_u8(),
        features: sample.features.clone(),
    };
    serde_json::to_string(&raw).map_err(|e| Error::Parse {
        line: 0,
        detail: format!("serializing record {}: {e}", sample.id),
    })
}

/// Write samples as JSONL plus the sidecar manifest. The manifest is
/// validated against the samples first, so a stale manifest can never be
/// persisted. Output bytes depend only on the inputs.
pub fn save_dataset(
    path: impl AsRef<Path>,
    samples: &[Sample],
    manifest: &DatasetManifest,
) -> Result<()> {
    let path = path.as_ref();
    manifest.check_against(samples)?;

    let mut out = BufWriter::new(File::create(path)?);
    for s in samples {
        out.write_all(record_line(s)?.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    let manifest_text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Parse {
        line: 0,
        detail: format!("serializing manifest: {e}"),
    })?;
    let mut mf = BufWriter::new(File::create(manifest_path(path))?);
    mf.write_all(manifest_text.as_bytes())?;
    mf.write_all(b"\n")?;
    mf.flush()?;
    Ok(())
}
