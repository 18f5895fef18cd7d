//! Constraint-checked temporal splitting.
//!
//! Three constraints guard against the classic ways time-aware malware
//! evaluations go wrong, and each violation carries its own name in the
//! error so misconfigured experiments fail loudly and specifically:
//!
//! - C1: every training sample predates every test sample.
//! - C2: each test bucket spans exactly one month.
//! - C3: each test bucket's malware rate stays near the configured
//!   prevalence (optionally enforced by downsampling the over-represented
//!   class instead of erroring).

use std::collections::BTreeMap;

use crate::env::{Label, Sample};
use crate::error::{ConstraintKind, Error, Result};
use serde::{Deserialize, Serialize};

/// How to cut the stream into a training prefix and monthly test buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// Number of distinct leading months that form the training split.
    pub train_month_count: u32,
    /// Target malware prevalence for test buckets.
    pub test_prevalence: f64,
    /// Allowed deviation from the target before C3 fires.
    pub prevalence_tolerance: f64,
    /// Rebalance violating buckets by dropping over-represented samples
    /// (deterministically, in id order) instead of erroring.
    pub downsample: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_month_count: 12,
            test_prevalence: 0.10,
            prevalence_tolerance: 0.05,
            downsample: false,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_month_count == 0 {
            return Err(Error::Config("training needs at least one month".into()));
        }
        if !(self.test_prevalence > 0.0 && self.test_prevalence < 1.0) {
            return Err(Error::Config(format!(
                "test prevalence must lie in (0, 1), got {}",
                self.test_prevalence
            )));
        }
        if !(self.prevalence_tolerance >= 0.0) {
            return Err(Error::Config(format!(
                "prevalence tolerance must be non-negative, got {}",
                self.prevalence_tolerance
            )));
        }
        Ok(())
    }
}

/// A chronological cut: training samples plus ordered monthly test buckets.
#[derive(Debug, Clone)]
pub struct TimelineSplit {
    pub train: Vec<Sample>,
    /// `(month, samples)` pairs in ascending month order.
    pub test_months: Vec<(u32, Vec<Sample>)>,
}

impl TimelineSplit {
    /// Verify C1–C3 on this split (however it was built).
    pub fn check_constraints(&self, target_prevalence: f64, tolerance: f64) -> Result<()> {
        let max_train = self.train.iter().map(|s| s.month).max();
        for (month, bucket) in &self.test_months {
            if let Some(max_train) = max_train {
                if let Some(bad) = bucket.iter().find(|s| s.month <= max_train) {
                    return Err(Error::constraint(
                        ConstraintKind::TrainBeforeTest,
                        format!(
                            "test sample {} (month {}) does not postdate the training \
                             horizon (month {max_train})",
                            bad.id, bad.month
                        ),
                    ));
                }
            }
            if let Some(bad) = bucket.iter().find(|s| s.month != *month) {
                return Err(Error::constraint(
                    ConstraintKind::SingleMonthBuckets,
                    format!(
                        "bucket for month {month} contains sample {} from month {}",
                        bad.id, bad.month
                    ),
                ));
            }
            if !bucket.is_empty() {
                let malware = bucket.iter().filter(|s| s.label.is_malware()).count();
                let rate = malware as f64 / bucket.len() as f64;
                if (rate - target_prevalence).abs() > tolerance {
                    return Err(Error::constraint(
                        ConstraintKind::TestPrevalence,
                        format!(
                            "month {month} malware rate {rate:.4} outside \
                             {target_prevalence} ± {tolerance}"
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Drop over-represented samples (in ascending id order, keeping the rest)
/// until the bucket's malware rate meets the target as closely as whole
/// samples allow.
fn downsample_bucket(bucket: &mut Vec<Sample>, target: f64) {
    let malware = bucket.iter().filter(|s| s.label.is_malware()).count();
    let goodware = bucket.len() - malware;
    if bucket.is_empty() {
        return;
    }
    let rate = malware as f64 / bucket.len() as f64;
    let (surplus_label, keep) = if rate > target {
        // Too much malware: keep m' ≈ target/(1−target) · goodware.
        let keep = (target / (1.0 - target) * goodware as f64).round() as usize;
        (Label::Malware, keep.min(malware))
    } else {
        // Too little malware: shrink goodware to g' ≈ (1−target)/target · malware.
        let keep = ((1.0 - target) / target * malware as f64).round() as usize;
        (Label::Goodware, keep.min(goodware))
    };
    let mut surplus_ids: Vec<&str> = bucket
        .iter()
        .filter(|s| s.label == surplus_label)
        .map(|s| s.id.as_str())
        .collect();
    surplus_ids.sort_unstable();
    let drop_set: std::collections::HashSet<String> = surplus_ids
        .into_iter()
        .skip(keep)
        .map(str::to_owned)
        .collect();
    bucket.retain(|s| !drop_set.contains(&s.id));
}

/// Cut a dataset into the leading `train_month_count` distinct months and
/// one test bucket per later month, then enforce C1–C3.
///
/// Samples keep their relative order within each month. With
/// `cfg.downsample` set, buckets outside the prevalence band are rebalanced
/// before the constraint check; otherwise violations surface as C3 errors.
pub fn split_timeline(samples: &[Sample], cfg: &SplitConfig) -> Result<TimelineSplit> {
    cfg.validate()?;
    let mut by_month: BTreeMap<u32, Vec<Sample>> = BTreeMap::new();
    for s in samples {
        by_month.entry(s.month).or_default().push(s.clone());
    }
    if by_month.len() < cfg.train_month_count as usize + 1 {
        return Err(Error::constraint(
            ConstraintKind::TrainBeforeTest,
            format!(
                "dataset spans {} distinct months; {} training months leave no test months",
                by_month.len(),
                cfg.train_month_count
            ),
        ));
    }
    let mut train = Vec::new();
    let mut test_months = Vec::new();
    for (i, (month, mut bucket)) in by_month.into_iter().enumerate() {
        if i < cfg.train_month_count as usize {
            train.append(&mut bucket);
        } else {
            if cfg.downsample {
                let malware = bucket.iter().filter(|s| s.label.is_malware()).count();
                let rate = malware as f64 / bucket.len() as f64;
                if (rate - cfg.test_prevalence).abs() > cfg.prevalence_tolerance {
                    downsample_bucket(&mut bucket, cfg.test_prevalence);
                }
            }
            test_months.push((month, bucket));
        }
    }
    let split = TimelineSplit { train, test_months };
    split.check_constraints(cfg.test_prevalence, cfg.prevalence_tolerance)?;
    Ok(split)
}
