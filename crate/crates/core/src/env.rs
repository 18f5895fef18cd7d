//! The one-step detection decision process: samples, actions, and rewards.
//!
//! Each labeled app is a single one-step episode. The agent sees a binary
//! feature vector and picks one of three actions — classify as goodware,
//! classify as malware, or reject for manual labeling. Classification pays
//! an accuracy term scaled by class imbalance (malware is rare, so correct
//! malware calls are worth more) and by recency (newer samples are worth
//! more, which tilts training toward post-drift behavior). Rejection pays a
//! fixed cost plus an outcome term derived from the classification the agent
//! would otherwise have made: rejecting a sample the policy would have gotten
//! right is penalized ten times harder than rejecting one it would have
//! gotten wrong is rewarded.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Ground-truth class of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Goodware,
    Malware,
}

impl Label {
    /// Numeric encoding used in datasets and reward formulas (goodware 0,
    /// malware 1).
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Goodware => 0,
            Label::Malware => 1,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Goodware),
            1 => Ok(Label::Malware),
            other => Err(Error::Config(format!("label must be 0 or 1, got {other}"))),
        }
    }

    pub fn is_malware(self) -> bool {
        self == Label::Malware
    }
}

/// Agent action. The numeric codes double as indices into policy outputs:
/// classify-only policies emit two probabilities, classify-or-reject
/// policies three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Goodware,
    Malware,
    Reject,
}

impl Action {
    pub fn code(self) -> usize {
        match self {
            Action::Goodware => 0,
            Action::Malware => 1,
            Action::Reject => 2,
        }
    }

    pub fn from_code(code: usize) -> Result<Self> {
        match code {
            0 => Ok(Action::Goodware),
            1 => Ok(Action::Malware),
            2 => Ok(Action::Reject),
            other => Err(Error::Config(format!(
                "action code must be 0..=2, got {other}"
            ))),
        }
    }

    /// True for the two classification actions.
    pub fn is_classification(self) -> bool {
        self != Action::Reject
    }

    /// The classification action matching a ground-truth label.
    pub fn from_label(label: Label) -> Self {
        match label {
            Label::Goodware => Action::Goodware,
            Label::Malware => Action::Malware,
        }
    }
}

/// One observed app: sparse binary features plus label and timestamp month.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    /// Opaque identifier, unique within a dataset.
    pub id: String,
    /// Observation month; months are indices on a shared timeline.
    pub month: u32,
    pub label: Label,
    /// Sorted, de-duplicated indices of active features.
    pub features: Vec<u32>,
}

impl Sample {
    pub fn new(id: impl Into<String>, month: u32, label: Label, features: Vec<u32>) -> Self {
        debug_assert!(
            features.windows(2).all(|w| w[0] < w[1]),
            "feature indices must be sorted and unique"
        );
        Sample {
            id: id.into(),
            month,
            label,
            features,
        }
    }
}

/// Expand sparse active-feature indices into a dense vector of `dim` slots.
///
/// `out` is fully overwritten. An index at or beyond `dim` means the sample
/// does not belong to this feature space.
pub fn densify<T: crate::nn::Scalar>(features: &[u32], dim: usize, out: &mut [T]) -> Result<()> {
    if out.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "dense buffer has {} slots, expected {dim}",
            out.len()
        )));
    }
    out.fill(T::zero());
    for &f in features {
        let idx = f as usize;
        if idx >= dim {
            return Err(Error::DimensionMismatch(format!(
                "feature index {f} out of range for dimension {dim}"
            )));
        }
        out[idx] = T::one();
    }
    Ok(())
}

/// Reward-shaping parameters, fixed once per experiment from the initial
/// training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Estimated malware rate of the training split, in `(0, 1]`. Scales
    /// malware rewards by `1/sigma_hat`.
    pub sigma_hat: f64,
    /// Additive term paid on every rejection. `0.0` makes rejection free of
    /// charge, `-1.0` penalizes it hardest; see `negate_cost` for the
    /// sign-flipped reading of this knob.
    pub rejection_cost: f64,
    /// Month of the first training sample; temporal scaling measures recency
    /// from here.
    pub origin_month: u32,
    /// Apply the recency scale to classification rewards.
    pub temporal_scaling: bool,
    /// Apply the imbalance scale to classification rewards.
    pub imbalance_scaling: bool,
    /// Include the counterfactual-outcome term in rejection rewards. With
    /// this off, rejections pay the flat cost only.
    pub reward_rejected_outcome: bool,
    /// Treat `rejection_cost` as a magnitude to subtract (`-cost`) instead
    /// of a signed additive term. Off by default; provided so both sign
    /// conventions of the cost knob can be compared like for like.
    pub negate_cost: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            sigma_hat: 0.1,
            rejection_cost: -0.1,
            origin_month: 0,
            temporal_scaling: true,
            imbalance_scaling: true,
            reward_rejected_outcome: true,
            negate_cost: false,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_hat > 0.0 && self.sigma_hat <= 1.0) {
            return Err(Error::Config(format!(
                "sigma_hat must lie in (0, 1], got {}",
                self.sigma_hat
            )));
        }
        if !self.rejection_cost.is_finite() {
            return Err(Error::Config(format!(
                "rejection_cost must be finite, got {}",
                self.rejection_cost
            )));
        }
        Ok(())
    }

    fn cost_term(&self) -> f64 {
        if self.negate_cost {
            -self.rejection_cost
        } else {
            self.rejection_cost
        }
    }
}

/// Accuracy term: `1 - 2|a - y|`, i.e. `+1` for a correct classification and
/// `-1` for an incorrect one. Rejection has no accuracy.
pub fn r_acc(action: Action, label: Label) -> Result<f64> {
    if !action.is_classification() {
        return Err(Error::Contract(
            "r_acc is defined for classification actions only".into(),
        ));
    }
    let a = action.code() as f64;
    let y = label.as_u8() as f64;
    Ok(1.0 - 2.0 * (a - y).abs())
}

/// Imbalance scale: `max(y / sigma_hat, 1)` — `1` for goodware and
/// `1/sigma_hat` for malware, amplifying the rare class.
pub fn r_imb(label: Label, sigma_hat: f64) -> Result<f64> {
    if !(sigma_hat > 0.0) {
        return Err(Error::Config(format!(
            "sigma_hat must be positive, got {sigma_hat}"
        )));
    }
    let y = label.as_u8() as f64;
    Ok((y / sigma_hat).max(1.0))
}

/// Temporal scale: `0.5 * max(1, sample_month - origin_month)`. Samples at
/// or adjacent to the origin score `0.5`; later samples scale linearly with
/// their month offset.
pub fn r_tmp(sample_month: u32, origin_month: u32) -> Result<f64> {
    if sample_month < origin_month {
        return Err(Error::TemporalOrder {
            sample_month,
            origin_month,
        });
    }
    let offset = (sample_month - origin_month) as f64;
    Ok(0.5 * offset.max(1.0))
}

/// Classification reward: the accuracy term scaled by the temporal and
/// imbalance factors (each optional and replaced by `1` when disabled).
pub fn r_clf(sample: &Sample, action: Action, cfg: &RewardConfig) -> Result<f64> {
    let acc = r_acc(action, sample.label)?;
    let tmp = if cfg.temporal_scaling {
        r_tmp(sample.month, cfg.origin_month)?
    } else {
        1.0
    };
    let imb = if cfg.imbalance_scaling {
        r_imb(sample.label, cfg.sigma_hat)?
    } else {
        1.0
    };
    Ok(tmp * imb * acc)
}

/// The classification the policy would fall back to: the more probable of
/// the two classification actions, goodware on an exact tie.
pub fn next_most_likely(probs: &[f64]) -> Result<Action> {
    if probs.len() < 2 {
        return Err(Error::Contract(format!(
            "need probabilities for both classification actions, got {}",
            probs.len()
        )));
    }
    if !probs[0].is_finite() || !probs[1].is_finite() {
        return Err(Error::Contract(
            "classification probabilities must be finite".into(),
        ));
    }
    if probs[1] > probs[0] {
        Ok(Action::Malware)
    } else {
        Ok(Action::Goodware)
    }
}

/// Rejection reward.
///
/// Let `r_nml` be the classification reward of the next-most-likely
/// classification action. Rejection pays the cost term plus `-10 * r_nml`
/// when that fallback would have been right (`r_nml >= 0`), or `-0.1 *
/// r_nml` when it would have been wrong — so dodging a would-be error earns
/// a small bonus, while rejecting a sample the policy had right is punished
/// an order of magnitude harder. With `reward_rejected_outcome` off the
/// outcome term vanishes and only the cost remains.
pub fn r_rej(sample: &Sample, probs: &[f64], cfg: &RewardConfig) -> Result<f64> {
    let cost = cfg.cost_term();
    if !cfg.reward_rejected_outcome {
        return Ok(cost);
    }
    let fallback = next_most_likely(probs)?;
    let r_nml = r_clf(sample, fallback, cfg)?;
    if r_nml >= 0.0 {
        Ok(cost - 10.0 * r_nml)
    } else {
        Ok(cost - 0.1 * r_nml)
    }
}

/// Full reward dispatch: classification actions score [`r_clf`], rejection
/// scores [`r_rej`] from the policy's classification probabilities.
pub fn reward(sample: &Sample, action: Action, probs: &[f64], cfg: &RewardConfig) -> Result<f64> {
    match action {
        Action::Goodware | Action::Malware => r_clf(sample, action, cfg),
        Action::Reject => r_rej(sample, probs, cfg),
    }
}
