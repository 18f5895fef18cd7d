//! SGD and Adam parameter updates.

use super::{Gradients, LayerGrads, Network, Scalar};
use crate::error::{Error, Result};

/// Update rule selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Plain gradient descent: `theta -= lr * g`.
    Sgd,
    /// Adam with bias-corrected first/second moments.
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

/// Optimizer state bound to one network's parameter shape.
///
/// Adam keeps first/second moment estimates shaped exactly like the network
/// parameters; SGD keeps none. `step_count` increments by one per [`step`]
/// call, including steps with all-zero gradients.
///
/// [`step`]: OptimizerState::step
#[derive(Debug, Clone)]
pub struct OptimizerState<T: Scalar> {
    kind: OptimizerKind,
    learning_rate: f64,
    step_count: u64,
    first_moment: Vec<LayerGrads<T>>,
    second_moment: Vec<LayerGrads<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    /// SGD with the given learning rate.
    pub fn sgd(learning_rate: f64) -> Result<Self> {
        check_lr(learning_rate)?;
        Ok(OptimizerState {
            kind: OptimizerKind::Sgd,
            learning_rate,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    /// Adam with moments shaped for `network`.
    pub fn adam(
        network: &Network<T>,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<Self> {
        check_lr(learning_rate)?;
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::Config(format!(
                "Adam betas must lie in [0, 1), got {beta1} and {beta2}"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!(
                "Adam epsilon must be positive, got {epsilon}"
            )));
        }
        let zeros = network.zero_gradients().layers;
        Ok(OptimizerState {
            kind: OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            },
            learning_rate,
            step_count: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update to `network` from `grads`.
    ///
    /// Shapes are validated against the network before anything is mutated;
    /// a mismatch (e.g. moments built for a different architecture) leaves
    /// both the network and the optimizer untouched.
    pub fn step(&mut self, network: &mut Network<T>, grads: &Gradients<T>) -> Result<()> {
        check_shapes(network, &grads.layers, "gradients")?;
        match self.kind {
            OptimizerKind::Sgd => {
                let lr = T::lit(self.learning_rate);
                for (layer, lg) in network.layers_mut().iter_mut().zip(&grads.layers) {
                    for (w, &g) in layer.weights_mut().iter_mut().zip(&lg.weights) {
                        *w = *w - lr * g;
                    }
                    for (b, &g) in layer.biases_mut().iter_mut().zip(&lg.biases) {
                        *b = *b - lr * g;
                    }
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                check_shapes(network, &self.first_moment, "first moments")?;
                check_shapes(network, &self.second_moment, "second moments")?;
                let t = self.step_count + 1;
                let bias1 = 1.0 - beta1.powi(t as i32);
                let bias2 = 1.0 - beta2.powi(t as i32);
                // The effective step size folds both bias corrections in:
                // lr * m_hat / (sqrt(v_hat) + eps) with
                // m_hat = m / bias1, v_hat = v / bias2.
                let lr = T::lit(self.learning_rate / bias1);
                let b1 = T::lit(beta1);
                let b1c = T::lit(1.0 - beta1);
                let b2 = T::lit(beta2);
                let b2c = T::lit(1.0 - beta2);
                let inv_sqrt_bias2 = T::lit(1.0 / bias2.sqrt());
                let eps = T::lit(epsilon);
                for ((layer, lg), (m, v)) in network
                    .layers_mut()
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
                {
                    let params = layer
                        .weights_mut()
                        .iter_mut()
                        .zip(lg.weights.iter())
                        .zip(m.weights.iter_mut().zip(v.weights.iter_mut()));
                    for ((w, &g), (mw, vw)) in params {
                        *mw = b1 * *mw + b1c * g;
                        *vw = b2 * *vw + b2c * g * g;
                        *w = *w - lr * *mw / ((*vw).sqrt() * inv_sqrt_bias2 + eps);
                    }
                    let params = layer
                        .biases_mut()
                        .iter_mut()
                        .zip(lg.biases.iter())
                        .zip(m.biases.iter_mut().zip(v.biases.iter_mut()));
                    for ((w, &g), (mw, vw)) in params {
                        *mw = b1 * *mw + b1c * g;
                        *vw = b2 * *vw + b2c * g * g;
                        *w = *w - lr * *mw / ((*vw).sqrt() * inv_sqrt_bias2 + eps);
                    }
                }
            }
        }
        self.step_count += 1;
        Ok(())
    }
}

fn check_lr(lr: f64) -> Result<()> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(Error::Config(format!(
            "learning rate must be finite and non-negative, got {lr}"
        )));
    }
    Ok(())
}

fn check_shapes<T: Scalar>(
    network: &Network<T>,
    layers: &[LayerGrads<T>],
    what: &str,
) -> Result<()> {
    if layers.len() != network.layers().len() {
        return Err(Error::DimensionMismatch(format!(
            "{what} have {} layers, network has {}",
            layers.len(),
            network.layers().len()
        )));
    }
    for (i, (l, g)) in network.layers().iter().zip(layers).enumerate() {
        if g.weights.len() != l.weights().len() || g.biases.len() != l.biases().len() {
            return Err(Error::DimensionMismatch(format!(
                "{what} for layer {i} do not match parameter shape"
            )));
        }
    }
    Ok(())
}
