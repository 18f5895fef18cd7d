//! Supervised feed-forward baselines trained with cross-entropy.
//!
//! One code path serves two presets: a single 200-unit hidden layer
//! ([`MlpBaselineConfig::deep_drebin`]) and the detection agent's 3×512
//! shape trained supervised instead of by policy gradient
//! ([`MlpBaselineConfig::sl_drmd`]). Training splits the data
//! chronologically (earliest fraction trains, the rest validates), runs
//! plain SGD on softmax cross-entropy, and keeps the parameters from the
//! epoch with the best validation F1.

use rand::seq::SliceRandom;

use crate::env::{densify, Label, Sample};
use crate::error::{Error, Result};
use crate::eval::metrics::f1;
use crate::nn::{mlp_specs, Activation, Mode, Network, OptimizerState};
use crate::rng::{substream, Stream};
use serde::{Deserialize, Serialize};

/// Hyperparameters for a supervised MLP baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpBaselineConfig {
    pub hidden_layers: usize,
    pub layer_size: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Chronologically earliest fraction used for training; the remainder
    /// is the validation holdout for epoch selection.
    pub train_fraction: f64,
    pub seed: u64,
}

impl MlpBaselineConfig {
    /// One hidden layer of 200 rectified units, 10 epochs of batch-64 SGD.
    pub fn deep_drebin() -> Self {
        MlpBaselineConfig {
            hidden_layers: 1,
            layer_size: 200,
            dropout: 0.5,
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.05,
            train_fraction: 0.66,
            seed: 0x10C0_FFEE,
        }
    }

    /// The detection agent's 3×512 architecture trained supervised:
    /// 5 epochs of batch-256 SGD.
    pub fn sl_drmd() -> Self {
        MlpBaselineConfig {
            hidden_layers: 3,
            layer_size: 512,
            dropout: 0.5,
            epochs: 5,
            batch_size: 256,
            learning_rate: 0.05,
            train_fraction: 0.66,
            seed: 0x10C0_FFEE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.layer_size == 0 {
            return Err(Error::Config(
                "mlp baseline needs at least one hidden layer with positive width".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1], got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Trained baseline: the network plus the config that produced it.
#[derive(Debug, Clone)]
pub struct MlpBaseline {
    pub config: MlpBaselineConfig,
    network: Network<f32>,
    input_dim: usize,
}

impl MlpBaseline {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn network(&self) -> &Network<f32> {
        &self.network
    }
}

/// Train a baseline on labeled samples.
///
/// Samples are ordered by month (stable), split chronologically at
/// `train_fraction`, and fitted with SGD on mean cross-entropy. After each
/// epoch the malware-class F1 on the holdout picks the parameters to keep;
/// with an empty holdout (fraction 1, or a single sample) the final epoch's
/// parameters are kept.
pub fn train_mlp_baseline(
    config: &MlpBaselineConfig,
    samples: &[Sample],
    input_dim: usize,
) -> Result<MlpBaseline> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("mlp training requires a non-empty sample set".into()));
    }
    if input_dim == 0 {
        return Err(Error::Config("input dimension must be positive".into()));
    }

    let mut ordered: Vec<&Sample> = samples.iter().collect();
    ordered.sort_by_key(|s| s.month);
    let n_train = ((ordered.len() as f64) * config.train_fraction).round() as usize;
    let n_train = n_train.clamp(1, ordered.len());
    let (train, val) = ordered.split_at(n_train);

    let mut init_rng = substream(config.seed, Stream::Init);
    let mut network = Network::new(
        input_dim,
        &mlp_specs(
            config.hidden_layers,
            config.layer_size,
            Activation::Relu,
            config.dropout,
            2,
            Activation::Softmax,
        ),
        &mut init_rng,
    )?;
    let mut optimizer = OptimizerState::sgd(config.learning_rate)?;
    let mut shuffle_rng = substream(config.seed, Stream::MinibatchShuffle);
    let mut dropout_rng = substream(config.seed, Stream::Dropout);

    let val_labels: Vec<Label> = val.iter().map(|s| s.label).collect();
    let mut best: Option<(f64, Network<f32>)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut dense = vec![0.0f32; input_dim];

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let inv = 1.0 / batch.len() as f32;
            let mut grads = network.zero_gradients();
            for &i in batch {
                let sample = train[i];
                densify(&sample.features, input_dim, &mut dense)?;
                let (probs, cache) =
                    network.forward(&dense, Mode::Train, Some(&mut dropout_rng))?;
                // Mean cross-entropy gradient at the logits: p − onehot(y).
                let target = sample.label.as_u8() as usize;
                let mut logit_grad = vec![0.0f32; 2];
                for (j, lg) in logit_grad.iter_mut().enumerate() {
                    let indicator = if j == target { 1.0 } else { 0.0 };
                    *lg = (probs[j] - indicator) * inv;
                }
                grads.add_assign(&network.backward_pre_activation(&cache, &logit_grad)?)?;
            }
            optimizer.step(&mut network, &grads)?;
        }

        if !val.is_empty() {
            let preds: Vec<Label> = val
                .iter()
                .map(|s| predict_with(&network, input_dim, s))
                .collect::<Result<_>>()?;
            // Undefined validation F1 (no malware involved) scores below any
            // real F1, so a defined epoch always wins over it.
            let score = f1(&preds, &val_labels)?.unwrap_or(-1.0);
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, network.clone()));
            }
        }
    }

    if let Some((_, chosen)) = best {
        network = chosen;
    }
    Ok(MlpBaseline {
        config: config.clone(),
        network,
        input_dim,
    })
}

fn predict_with(network: &Network<f32>, input_dim: usize, sample: &Sample) -> Result<Label> {
    let mut dense = vec![0.0f32; input_dim];
    densify(&sample.features, input_dim, &mut dense)?;
    let probs = network.infer(&dense)?;
    Ok(if probs[1] > probs[0] {
        Label::Malware
    } else {
        Label::Goodware
    })
}

/// Argmax classification (ties resolve to goodware).
pub fn mlp_predict(model: &MlpBaseline, sample: &Sample) -> Result<Label> {
    predict_with(&model.network, model.input_dim, sample)
}

/// One minus the winning class probability: 0 at full confidence, 0.5 at a
/// coin flip.
pub fn mlp_uncertainty(model: &MlpBaseline, sample: &Sample) -> Result<f64> {
    let mut dense = vec![0.0f32; model.input_dim];
    densify(&sample.features, model.input_dim, &mut dense)?;
    let probs = model.network.infer(&dense)?;
    let max = probs[0].max(probs[1]) as f64;
    Ok(1.0 - max)
}
