//! Linear support-vector machine trained by dual coordinate descent.
//!
//! Solves the L2-regularized hinge-loss problem
//! `min_w ½‖w‖² + C·Σ max(0, 1 − yᵢ·w·xᵢ)` on sparse binary feature
//! vectors, with the bias folded in as an always-on augmented feature
//! (and therefore regularized like any other weight). The dual is solved
//! coordinate-wise in deterministic cyclic order — no randomness anywhere,
//! so retraining on the same data reproduces the same model bit-for-bit.

use crate::env::{Label, Sample};
use crate::error::{Error, Result};

/// Trained linear model: dense weights over the feature space plus a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c_param: f64,
    pub max_iterations: usize,
}

/// Relative duality-gap threshold at which training stops early.
const DUALITY_GAP_TOL: f64 = 1e-4;

fn signed_label(label: Label) -> f64 {
    if label.is_malware() {
        1.0
    } else {
        -1.0
    }
}

/// Decision value `w·x + b` for a sparse binary sample. Feature indices at
/// or beyond the weight vector are a dimension error.
pub fn svm_decision(model: &LinearSvmModel, sample: &Sample) -> Result<f64> {
    let mut value = model.bias;
    for &j in &sample.features {
        let j = j as usize;
        if j >= model.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "feature index {j} outside the model's {}-dimensional space",
                model.weights.len()
            )));
        }
        value += model.weights[j];
    }
    Ok(value)
}

/// Classify by the sign of the decision value; the boundary itself counts
/// as goodware.
pub fn svm_predict(model: &LinearSvmModel, sample: &Sample) -> Result<Label> {
    Ok(if svm_decision(model, sample)? > 0.0 {
        Label::Malware
    } else {
        Label::Goodware
    })
}

/// Margin-based uncertainty `1/(1 + |decision|)`: 1 on the decision
/// boundary, approaching 0 with distance from it.
pub fn svm_uncertainty(model: &LinearSvmModel, sample: &Sample) -> Result<f64> {
    Ok(1.0 / (1.0 + svm_decision(model, sample)?.abs()))
}

/// Train on sparse binary samples over a `feature_dim`-dimensional space.
///
/// Iterates dual coordinate descent passes in sample order until the
/// relative duality gap drops below 1e-4 or `max_iterations` passes
/// complete. Requires at least one sample of each class.
pub fn train_linear_svm(
    samples: &[Sample],
    feature_dim: usize,
    c_param: f64,
    max_iterations: usize,
) -> Result<LinearSvmModel> {
    if !(c_param > 0.0) || !c_param.is_finite() {
        return Err(Error::Config(format!("C must be positive, got {c_param}")));
    }
    if max_iterations == 0 {
        return Err(Error::Config("max_iterations must be positive".into()));
    }
    let n_malware = samples.iter().filter(|s| s.label.is_malware()).count();
    if n_malware == 0 || n_malware == samples.len() {
        return Err(Error::Training(
            "svm training needs at least one sample of each class".into(),
        ));
    }
    for s in samples {
        if let Some(&j) = s.features.last() {
            if j as usize >= feature_dim {
                return Err(Error::DimensionMismatch(format!(
                    "sample {} uses feature {j} outside dimension {feature_dim}",
                    s.id
                )));
            }
        }
    }

    // Augmented representation: index feature_dim is the constant-1 bias
    // feature, so every squared sample norm is nnz + 1.
    let mut w = vec![0.0f64; feature_dim + 1];
    let mut alpha = vec![0.0f64; samples.len()];
    let q_diag: Vec<f64> = samples.iter().map(|s| (s.features.len() + 1) as f64).collect();

    let dot = |w: &[f64], s: &Sample| -> f64 {
        let mut v = w[feature_dim];
        for &j in &s.features {
            v += w[j as usize];
        }
        v
    };

    for _pass in 0..max_iterations {
        for (i, s) in samples.iter().enumerate() {
            let y = signed_label(s.label);
            let g = y * dot(&w, s) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c_param {
                g.max(0.0)
            } else {
                g
            };
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c_param);
                let delta = (alpha[i] - old) * y;
                if delta != 0.0 {
                    for &j in &s.features {
                        w[j as usize] += delta;
                    }
                    w[feature_dim] += delta;
                }
            }
        }

        // Relative duality gap: primal ½‖w‖² + C·Σξ minus dual Σα − ½‖w‖².
        let w_norm_sq: f64 = w.iter().map(|v| v * v).sum();
        let hinge_sum: f64 = samples
            .iter()
            .map(|s| (1.0 - signed_label(s.label) * dot(&w, s)).max(0.0))
            .sum();
        let primal = 0.5 * w_norm_sq + c_param * hinge_sum;
        let dual = alpha.iter().sum::<f64>() - 0.5 * w_norm_sq;
        let gap = primal - dual;
        if gap <= DUALITY_GAP_TOL * primal.abs().max(1.0) {
            break;
        }
    }

    let bias = w[feature_dim];
    w.truncate(feature_dim);
    let model = LinearSvmModel {
        weights: w,
        bias,
        c_param,
        max_iterations,
    };
    if !model.bias.is_finite() || model.weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("svm weights diverged to non-finite values".into()));
    }
    Ok(model)
}
