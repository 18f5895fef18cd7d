//! Seeded synthetic datasets with controllable concept drift.
//!
//! Samples are drawn from class-conditional product-Bernoulli feature
//! distributions. A fixed set of "informative" features separates the
//! classes initially; every month a fraction of them is retired (the
//! malware-conditional activation collapses onto the goodware-conditional
//! one, so the feature stops discriminating) while an equal number of
//! previously uninformative features is promoted in their place. Old
//! decision boundaries therefore decay monotonically while new structure
//! appears — the drift a frozen model should suffer from and a refitting
//! one should track.
//!
//! Determinism: the feature-role tables derive from one substream of the
//! seed and each month's sample draws from a per-month substream, so the
//! same config always yields byte-identical datasets and regenerating one
//! month never perturbs another.

use crate::data::ingest::{DatasetManifest, DatasetSource};
use crate::env::{Label, Sample};
use crate::error::{Error, Result};
use crate::rng::{substream, substream_indexed, Stream};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Class-conditional activation probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationProbs {
    /// P(active | malware) for an informative feature.
    pub informative_malware: f64,
    /// P(active | goodware) for an informative feature.
    pub informative_goodware: f64,
    /// P(active | either class) for a background feature.
    pub background: f64,
}

impl Default for ActivationProbs {
    fn default() -> Self {
        ActivationProbs {
            informative_malware: 0.6,
            informative_goodware: 0.05,
            background: 0.02,
        }
    }
}

impl ActivationProbs {
    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("informative_malware", self.informative_malware),
            ("informative_goodware", self.informative_goodware),
            ("background", self.background),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Config(format!(
                    "activation probability {name} must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftGenConfig {
    pub feature_dim: usize,
    /// Months generated, numbered 0..months-1.
    pub months: usize,
    pub samples_per_month: usize,
    /// P(label = malware) per sample.
    pub malware_rate: f64,
    /// Initially informative feature count.
    pub n_informative: usize,
    /// Fraction of the informative set churned per month.
    pub drift_rate: f64,
    pub base_activation: ActivationProbs,
    pub seed: u64,
}

impl Default for DriftGenConfig {
    fn default() -> Self {
        DriftGenConfig {
            feature_dim: 200,
            months: 24,
            samples_per_month: 500,
            malware_rate: 0.10,
            n_informative: 20,
            drift_rate: 0.05,
            base_activation: ActivationProbs::default(),
            seed: 1,
        }
    }
}

impl DriftGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        if self.months == 0 {
            return Err(Error::Config("months must be positive".into()));
        }
        if self.samples_per_month == 0 {
            return Err(Error::Config("samples_per_month must be positive".into()));
        }
        if !(self.malware_rate > 0.0 && self.malware_rate < 1.0) {
            return Err(Error::Config(format!(
                "malware_rate must lie strictly inside (0, 1), got {}",
                self.malware_rate
            )));
        }
        if self.n_informative == 0 || self.n_informative > self.feature_dim {
            return Err(Error::Config(format!(
                "n_informative must lie in 1..=feature_dim ({}), got {}",
                self.feature_dim, self.n_informative
            )));
        }
        if !(0.0..=1.0).contains(&self.drift_rate) || !self.drift_rate.is_finite() {
            return Err(Error::Config(format!(
                "drift_rate must lie in [0, 1], got {}",
                self.drift_rate
            )));
        }
        self.base_activation.validate()
    }
}

/// The generator's true per-month parameters: for every month and feature,
/// `(P(active | malware), P(active | goodware))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftTables {
    pub monthly: Vec<Vec<(f64, f64)>>,
}

impl DriftTables {
    /// Features currently carrying class signal in `month`: malware- and
    /// goodware-conditional activations differ.
    pub fn informative_set(&self, month: usize) -> Vec<usize> {
        self.monthly[month]
            .iter()
            .enumerate()
            .filter(|(_, (m, g))| m != g)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Mean absolute difference between month-`m` and month-0 malware-conditional
/// activation probabilities — the drift actually injected, measured on the
/// true parameters rather than on samples.
pub fn mean_malware_tv(tables: &DriftTables, m: usize) -> f64 {
    let base = &tables.monthly[0];
    let now = &tables.monthly[m];
    let sum: f64 = base
        .iter()
        .zip(now)
        .map(|((m0, _), (mm, _))| (mm - m0).abs())
        .sum();
    sum / base.len() as f64
}

/// Build the per-month parameter tables.
///
/// A seeded shuffle of the feature indices picks the initial informative set
/// (first `n_informative`) and orders the promotion pool (the rest). Each
/// month churns `floor(m·rate·K) − floor((m−1)·rate·K)` features — cumulative
/// churn tracks `m·rate·K` exactly in the long run even when per-month
/// amounts are fractional. A churn step retires the oldest surviving
/// original informative feature and promotes the next pool feature; churn
/// halts once either side is exhausted, so promoted features are never
/// retired and the distance from month 0 grows monotonically.
pub fn drift_parameter_tables(cfg: &DriftGenConfig) -> Result<DriftTables> {
    cfg.validate()?;
    let probs = cfg.base_activation;
    let k = cfg.n_informative;

    let mut rng = substream(cfg.seed, Stream::DriftTables);
    let mut order: Vec<usize> = (0..cfg.feature_dim).collect();
    order.shuffle(&mut rng);
    let mut originals = order[..k].iter().copied().collect::<std::collections::VecDeque<_>>();
    let mut pool = order[k..].iter().copied().collect::<std::collections::VecDeque<_>>();

    let mut table: Vec<(f64, f64)> =
        vec![(probs.background, probs.background); cfg.feature_dim];
    for &j in &originals {
        table[j] = (probs.informative_malware, probs.informative_goodware);
    }

    let mut monthly = Vec::with_capacity(cfg.months);
    monthly.push(table.clone());
    let per_month = cfg.drift_rate * k as f64;
    for m in 1..cfg.months {
        let cumulative_now = (m as f64 * per_month).floor() as usize;
        let cumulative_before = ((m - 1) as f64 * per_month).floor() as usize;
        for _ in cumulative_before..cumulative_now {
            let (Some(retired), Some(promoted)) = (originals.pop_front(), pool.pop_front())
            else {
                break;
            };
            table[retired].0 = table[retired].1;
            table[promoted] = (probs.informative_malware, probs.informative_goodware);
        }
        monthly.push(table.clone());
    }
    Ok(DriftTables { monthly })
}

/// Generate the dataset described by `cfg`: per sample, a Bernoulli label
/// draw followed by one activation draw per feature against that month's
/// table. Returns the samples (month-ordered) and a manifest recording the
/// seed.
pub fn generate_drift_dataset(cfg: &DriftGenConfig) -> Result<(Vec<Sample>, DatasetManifest)> {
    let tables = drift_parameter_tables(cfg)?;
    let mut samples = Vec::with_capacity(cfg.months * cfg.samples_per_month);
    for (m, table) in tables.monthly.iter().enumerate() {
        let mut rng = substream_indexed(cfg.seed, Stream::DataGen, m as u64);
        for i in 0..cfg.samples_per_month {
            let label = if rng.random::<f64>() < cfg.malware_rate {
                Label::Malware
            } else {
                Label::Goodware
            };
            let mut features = Vec::new();
            for (j, &(p_malware, p_goodware)) in table.iter().enumerate() {
                let p = match label {
                    Label::Malware => p_malware,
                    Label::Goodware => p_goodware,
                };
                if rng.random::<f64>() < p {
                    features.push(j as u32);
                }
            }
            samples.push(Sample::new(format!("m{m:03}s{i:05}"), m as u32, label, features));
        }
    }
    let manifest = DatasetManifest::from_samples(
        &samples,
        cfg.feature_dim,
        DatasetSource::Synthetic,
        Some(cfg.seed),
    )?;
    Ok((samples, manifest))
}
