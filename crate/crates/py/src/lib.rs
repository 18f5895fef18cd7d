//! Python bindings: dataset generation, the rejection-aware PPO detector,
//! the monthly evaluation loop, and the time-averaged metric.
//!
//! The module mirrors the CLI's core operations with Python-native types:
//! feature vectors are lists of active indices, reports are plain dicts,
//! and checkpoints round-trip through the same binary container the Rust
//! API writes.

use std::path::Path;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use drmd_core::agent::{AgentConfig, PolicyKind, PpoAgent};
use drmd_core::data::{
    estimate_sigma_hat, generate_drift_dataset, load_dataset, save_dataset, DriftGenConfig,
};
use drmd_core::env::{Action, Label, RewardConfig, Sample};
use drmd_core::eval::{
    aut as aut_rs, run_monthly_eval, split_timeline, ProtocolConfig, SplitConfig,
};
use drmd_core::model::DrmdDetector;
use drmd_core::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        Error::Config(_)
        | Error::Contract(_)
        | Error::Constraint { .. }
        | Error::Parse { .. }
        | Error::Schema { .. }
        | Error::TemporalOrder { .. }
        | Error::DimensionMismatch(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn action_name(a: Action) -> &'static str {
    match a {
        Action::Goodware => "goodware",
        Action::Malware => "malware",
        Action::Reject => "reject",
    }
}

/// Sorted, deduplicated, bounds-checked feature indices for one sample.
fn clean_features(mut features: Vec<u32>, feature_dim: usize) -> PyResult<Vec<u32>> {
    features.sort_unstable();
    features.dedup();
    if let Some(&bad) = features.iter().find(|&&f| f as usize >= feature_dim) {
        return Err(PyValueError::new_err(format!(
            "feature index {bad} is out of range for dimension {feature_dim}"
        )));
    }
    Ok(features)
}

/// Trapezoidal time-average of a per-period metric series.
#[pyfunction]
fn aut(series: Vec<f64>) -> PyResult<f64> {
    aut_rs(&series).map_err(to_py_err)
}

/// Generate a seeded synthetic concept-drift dataset and write it as JSONL
/// (plus a sidecar manifest). Returns the number of samples written.
#[pyfunction]
#[pyo3(signature = (
    path,
    *,
    feature_dim = 200,
    months = 24,
    samples_per_month = 500,
    malware_rate = 0.1,
    n_informative = 20,
    drift_rate = 0.05,
    seed = 1,
))]
#[allow(clippy::too_many_arguments)]
fn generate_dataset(
    path: &str,
    feature_dim: usize,
    months: usize,
    samples_per_month: usize,
    malware_rate: f64,
    n_informative: usize,
    drift_rate: f64,
    seed: u64,
) -> PyResult<usize> {
    let cfg = DriftGenConfig {
        feature_dim,
        months,
        samples_per_month,
        malware_rate,
        n_informative,
        drift_rate,
        seed,
        ..DriftGenConfig::default()
    };
    let (samples, manifest) = generate_drift_dataset(&cfg).map_err(to_py_err)?;
    save_dataset(Path::new(path), &samples, &manifest).map_err(to_py_err)?;
    Ok(samples.len())
}

/// Split a loaded dataset into the oldest `train_month_count` distinct
/// months and everything after them.
fn chronological_train_slice(
    samples: &[Sample],
    train_month_count: usize,
) -> PyResult<Vec<Sample>> {
    let mut months: Vec<u32> = samples.iter().map(|s| s.month).collect();
    months.sort_unstable();
    months.dedup();
    if months.len() < train_month_count {
        return Err(PyValueError::new_err(format!(
            "dataset has {} distinct months, fewer than train_month_count = {train_month_count}",
            months.len()
        )));
    }
    let cutoff = months[train_month_count - 1];
    Ok(samples
        .iter()
        .filter(|s| s.month <= cutoff)
        .cloned()
        .collect())
}

/// A PPO-trained malware detector with an optional reject action.
///
/// Feature vectors are lists of active feature indices (sparse binary
/// encoding). Labels inside JSONL datasets are 0 = goodware, 1 = malware.
#[pyclass]
struct Agent {
    inner: PpoAgent,
    reward: RewardConfig,
}

#[pymethods]
impl Agent {
    #[new]
    #[pyo3(signature = (
        feature_dim,
        *,
        policy = "classify",
        hidden_layers = 1,
        layer_size = 64,
        dropout = 0.0,
        data_epochs = 5,
        learning_rate = 0.01,
        sliding_window = 2000,
        rejection_cost = -0.1,
        seed = 1,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        feature_dim: usize,
        policy: &str,
        hidden_layers: usize,
        layer_size: usize,
        dropout: f64,
        data_epochs: usize,
        learning_rate: f64,
        sliding_window: usize,
        rejection_cost: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let policy_kind = match policy {
            "classify" => PolicyKind::ClassifyOnly,
            "classify-reject" => PolicyKind::ClassifyReject,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown policy {other:?}; expected \"classify\" or \"classify-reject\""
                )))
            }
        };
        let config = AgentConfig {
            policy_kind,
            hidden_layers,
            layer_size,
            dropout,
            data_epochs,
            learning_rate,
            sliding_window_size: if sliding_window == 0 {
                None
            } else {
                Some(sliding_window)
            },
            seed,
            ..AgentConfig::default()
        };
        let inner = PpoAgent::new(feature_dim, config).map_err(to_py_err)?;
        let reward = RewardConfig {
            rejection_cost,
            ..RewardConfig::default()
        };
        Ok(Agent { inner, reward })
    }

    /// Train on the oldest `train_month_count` distinct months of a JSONL
    /// dataset. The malware prevalence estimate and the temporal reward
    /// origin are taken from that slice. Returns the number of training
    /// samples used.
    fn train(&mut self, dataset_path: &str, train_month_count: usize) -> PyResult<usize> {
        let (samples, _manifest) = load_dataset(Path::new(dataset_path)).map_err(to_py_err)?;
        let train = chronological_train_slice(&samples, train_month_count)?;
        self.reward.sigma_hat = estimate_sigma_hat(&train).map_err(to_py_err)?;
        self.reward.origin_month = train.iter().map(|s| s.month).min().unwrap_or(0);
        self.inner.train(&train, &self.reward).map_err(to_py_err)?;
        Ok(train.len())
    }

    /// Deterministic prediction: `(action, probabilities)` where action is
    /// "goodware", "malware", or "reject".
    fn predict(&self, features: Vec<u32>) -> PyResult<(&'static str, Vec<f64>)> {
        let feats = clean_features(features, self.inner.input_dim())?;
        let sample = Sample::new("query", self.reward.origin_month, Label::Goodware, feats);
        let (action, probs) = self.inner.predict(&sample).map_err(to_py_err)?;
        Ok((action_name(action), probs))
    }

    /// One minus the maximum renormalized classification probability.
    fn uncertainty(&self, features: Vec<u32>) -> PyResult<f64> {
        let feats = clean_features(features, self.inner.input_dim())?;
        let sample = Sample::new("query", self.reward.origin_month, Label::Goodware, feats);
        self.inner.uncertainty(&sample).map_err(to_py_err)
    }

    /// Run the monthly evaluation protocol over a JSONL dataset: train
    /// months first, then each later month is scored, optionally
    /// quarantined, measured, and used for budgeted fine-tuning. Operates
    /// on a copy, so the agent itself is left untouched. Returns a dict
    /// with "aut_f1" and per-month records.
    ///
    /// The prevalence gate defaults are permissive (target 0.5, tolerance
    /// 0.5) so any dataset passes; tighten them to enforce a realistic
    /// test-month malware rate.
    #[pyo3(signature = (
        dataset_path,
        train_month_count,
        *,
        rejection_budget = 0,
        al_budget = 0,
        test_prevalence = 0.5,
        prevalence_tolerance = 0.5,
    ))]
    fn evaluate(
        &self,
        py: Python<'_>,
        dataset_path: &str,
        train_month_count: u32,
        rejection_budget: usize,
        al_budget: usize,
        test_prevalence: f64,
        prevalence_tolerance: f64,
    ) -> PyResult<Py<PyDict>> {
        let (samples, _manifest) = load_dataset(Path::new(dataset_path)).map_err(to_py_err)?;
        let split = split_timeline(
            &samples,
            &SplitConfig {
                train_month_count,
                test_prevalence,
                prevalence_tolerance,
                downsample: false,
            },
        )
        .map_err(to_py_err)?;
        let protocol = ProtocolConfig {
            monthly_rejection_budget: rejection_budget,
            monthly_al_budget: al_budget,
            integrated_rejection: self.inner.config().policy_kind == PolicyKind::ClassifyReject,
            ..ProtocolConfig::default()
        };
        let mut detector = DrmdDetector::from_parts(self.inner.clone(), self.reward.clone());
        let report = run_monthly_eval(&mut detector, &split, &protocol).map_err(to_py_err)?;

        let months = PyList::empty(py);
        for m in &report.months {
            let rec = PyDict::new(py);
            rec.set_item("month", m.month)?;
            rec.set_item("f1", m.f1)?;
            rec.set_item("precision", m.precision)?;
            rec.set_item("recall", m.recall)?;
            rec.set_item("n_rejected", m.n_rejected)?;
            rec.set_item("n_al", m.n_al)?;
            rec.set_item("n_evaluated", m.n_evaluated)?;
            months.append(rec)?;
        }
        let out = PyDict::new(py);
        out.set_item("aut_f1", report.aut_f1)?;
        out.set_item("months", months)?;
        Ok(out.into())
    }

    /// Write the agent (architecture, weights, temporal origin) to the
    /// binary checkpoint container.
    fn save(&self, path: &str) -> PyResult<()> {
        self.inner
            .save_file(Path::new(path), self.reward.origin_month)
            .map_err(to_py_err)
    }

    /// Load an agent from a checkpoint. The reward configuration is
    /// restored to defaults apart from the temporal origin; retraining or
    /// fine-tuning re-estimates the prevalence term from the data it sees.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let (inner, origin_month) = PpoAgent::load_file(Path::new(path)).map_err(to_py_err)?;
        let reward = RewardConfig {
            origin_month,
            ..RewardConfig::default()
        };
        Ok(Agent { inner, reward })
    }

    fn __repr__(&self) -> String {
        let cfg = self.inner.config();
        format!(
            "Agent(feature_dim={}, policy={:?}, hidden_layers={}, layer_size={})",
            self.inner.input_dim(),
            match cfg.policy_kind {
                PolicyKind::ClassifyOnly => "classify",
                PolicyKind::ClassifyReject => "classify-reject",
            },
            cfg.hidden_layers,
            cfg.layer_size,
        )
    }
}

#[pymodule]
fn drmd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(aut, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_class::<Agent>()?;
    Ok(())
}
