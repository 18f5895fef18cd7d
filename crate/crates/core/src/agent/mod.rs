//! Learned detection agents trained with clipped-surrogate policy updates.
//!
//! Two agents share the machinery here. [`PpoAgent`] treats every sample as
//! a one-step episode: the advantage is simply `reward - value` and the
//! critic regresses the raw reward. [`IcmdpAgent`] chains samples into
//! multi-step episodes that terminate when malware slips through, with
//! discounted GAE advantages. Both use the same actor/critic construction,
//! the same update step, and the same sliding-window fine-tuning, so any
//! performance difference between them comes from the decision-process
//! shape, not the implementation.
//!
//! Stochasticity is confined to three named streams per agent — action
//! sampling, minibatch shuffling, and dropout masks — all fanned out from
//! the configured seed.

mod container;
mod icmdp;
mod ppo;

pub use icmdp::{gae, icmdp_reward, Episode, IcmdpAgent, IcmdpConfig};
pub use ppo::PpoAgent;

use crate::env::{densify, Action, Sample};
use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, mlp_specs, Activation, Mode, Network, OptimizerState};
use crate::rng::{substream, Stream};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Adam betas (paper reports only the learning rate and epsilon; these are
/// the framework defaults the reported runs used).
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;

/// Action-space shape of the policy head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Two outputs: goodware / malware.
    ClassifyOnly,
    /// Three outputs: goodware / malware / reject.
    ClassifyReject,
}

impl PolicyKind {
    /// Number of actions (and actor output units).
    pub fn action_count(self) -> usize {
        match self {
            PolicyKind::ClassifyOnly => 2,
            PolicyKind::ClassifyReject => 3,
        }
    }
}

/// Hyperparameters shared by both agents.
///
/// Defaults follow the reported setup: 3 hidden layers of 512 leaky-relu
/// units with dropout 0.5, 5 passes over the data per (re)training, single
/// minibatch epoch of size-100 minibatches, clip 0.2, value coefficient 0.5,
/// entropy coefficient 0.01, gradient norm cap 0.5, Adam at 2.5e-4 with
/// epsilon 1e-5, and a 5000-sample fine-tuning window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub policy_kind: PolicyKind,
    pub hidden_layers: usize,
    pub layer_size: usize,
    /// Dropout rate on hidden activations, applied only inside update-loss
    /// forwards (rollouts and prediction run eval-mode).
    pub dropout: f64,
    /// Full rollout + update passes per call to `train`/`fine_tune`.
    pub data_epochs: usize,
    /// Shuffled passes over the collected transitions per update.
    pub minibatch_epochs: usize,
    pub minibatch_size: usize,
    pub clip_coefficient: f64,
    pub value_coefficient: f64,
    pub entropy_coefficient: f64,
    pub max_grad_norm: f64,
    pub learning_rate: f64,
    pub adam_epsilon: f64,
    /// Fine-tuning memory: `Some(n)` keeps the newest `n` labeled samples,
    /// `None` accumulates without bound (cumulative retraining).
    pub sliding_window_size: Option<usize>,
    /// Reinitialize Adam moments at the start of each fine-tune call. Off by
    /// default: moments carry across months.
    pub reset_optimizer_on_fine_tune: bool,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            policy_kind: PolicyKind::ClassifyOnly,
            hidden_layers: 3,
            layer_size: 512,
            dropout: 0.5,
            data_epochs: 5,
            minibatch_epochs: 1,
            minibatch_size: 100,
            clip_coefficient: 0.2,
            value_coefficient: 0.5,
            entropy_coefficient: 0.01,
            max_grad_norm: 0.5,
            learning_rate: 2.5e-4,
            adam_epsilon: 1e-5,
            sliding_window_size: Some(5000),
            reset_optimizer_on_fine_tune: false,
            seed: 1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.layer_size == 0 {
            return Err(Error::Config(
                "agent needs at least one hidden layer with positive width".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.data_epochs == 0 || self.minibatch_epochs == 0 || self.minibatch_size == 0 {
            return Err(Error::Config(
                "epoch counts and minibatch size must be positive".into(),
            ));
        }
        for (name, v) in [
            ("clip_coefficient", self.clip_coefficient),
            ("value_coefficient", self.value_coefficient),
            ("entropy_coefficient", self.entropy_coefficient),
            ("max_grad_norm", self.max_grad_norm),
            ("learning_rate", self.learning_rate),
            ("adam_epsilon", self.adam_epsilon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        match self.sliding_window_size {
            Some(0) => {
                return Err(Error::Config(
                    "sliding window capacity must be positive; use None for unbounded".into(),
                ))
            }
            Some(cap) if self.minibatch_size > cap => {
                return Err(Error::Config(format!(
                    "minibatch size {} exceeds window capacity {cap}",
                    self.minibatch_size
                )))
            }
            _ => {}
        }
        Ok(())
    }
}

/// One collected step: everything the update needs to recompute the
/// surrogate losses later.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub sample_id: String,
    /// Sparse active-feature indices of the observed state.
    pub features: Vec<u32>,
    pub action: Action,
    /// Log-probability of `action` under the rollout policy (always ≤ 0).
    pub log_prob: f64,
    /// Critic estimate at collection time.
    pub value_estimate: f64,
    pub reward: f64,
}

/// One-step advantage: `reward - value_estimate`. The critic's return target
/// is the raw reward (a one-step episode has nothing to bootstrap).
pub fn advantage(transition: &Transition) -> f64 {
    transition.reward - transition.value_estimate
}

/// In-place standardization to mean 0 / sample std 1 (n−1 denominator, 1e-8
/// floor). Slices shorter than two are left untouched — a singleton would
/// standardize to zero and erase its own learning signal.
pub fn standardize(values: &mut [f64]) {
    if values.len() < 2 {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let denom = var.sqrt() + 1e-8;
    for v in values.iter_mut() {
        *v = (*v - mean) / denom;
    }
}

/// Loss diagnostics averaged over the minibatches of one update call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total_loss: f64,
    /// Fraction of transitions whose ratio left the clip band.
    pub clip_fraction: f64,
}

impl LossStats {
    pub fn is_finite(&self) -> bool {
        self.policy_loss.is_finite()
            && self.value_loss.is_finite()
            && self.entropy.is_finite()
            && self.total_loss.is_finite()
    }
}

/// Chronologically ordered fine-tuning memory with optional capacity.
///
/// Pushes evict from the oldest end once capacity is exceeded; an unbounded
/// window (`capacity: None`) accumulates everything, which turns sliding
/// retraining into cumulative retraining.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    samples: Vec<Sample>,
    capacity: Option<usize>,
}

impl SlidingWindow {
    pub fn new(capacity: Option<usize>) -> Result<Self> {
        if capacity == Some(0) {
            return Err(Error::Config(
                "window capacity must be positive; use None for unbounded".into(),
            ));
        }
        Ok(SlidingWindow {
            samples: Vec::new(),
            capacity,
        })
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn push(&mut self, sample: Sample) {
        debug_assert!(
            self.samples.last().map_or(true, |s| s.month <= sample.month),
            "window pushes must be chronological"
        );
        self.samples.push(sample);
        self.enforce_capacity();
    }

    pub fn extend<I: IntoIterator<Item = Sample>>(&mut self, samples: I) {
        for s in samples {
            debug_assert!(
                self.samples.last().map_or(true, |p| p.month <= s.month),
                "window pushes must be chronological"
            );
            self.samples.push(s);
        }
        self.enforce_capacity();
    }

    fn enforce_capacity(&mut self) {
        if let Some(cap) = self.capacity {
            if self.samples.len() > cap {
                let excess = self.samples.len() - cap;
                self.samples.drain(..excess);
            }
        }
    }
}

/// Uncertainty from a probability vector: one minus the winning
/// classification probability, renormalized over the two classification
/// actions so a large reject mass does not masquerade as confidence.
pub fn uncertainty_from_probs(probs: &[f64]) -> f64 {
    let p0 = probs.first().copied().unwrap_or(0.0);
    let p1 = probs.get(1).copied().unwrap_or(0.0);
    let total = p0 + p1;
    if total <= 0.0 {
        return 0.5;
    }
    1.0 - (p0.max(p1) / total)
}

/// Sample an index from a probability vector.
pub(crate) fn sample_categorical(probs: &[f32], rng: &mut ChaCha8Rng) -> usize {
    use rand::Rng;
    let u: f64 = rng.random();
    let mut acc = 0.0f64;
    for (i, &p) in probs.iter().enumerate() {
        acc += p as f64;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One transition's view for the shared update: borrowed features plus the
/// precomputed advantage and critic return target. The one-step agent fills
/// `(reward - value, reward)`; the episodic agent fills `(gae, gae + value)`.
pub(crate) struct UpdateItem<'a> {
    pub features: &'a [u32],
    pub action: usize,
    pub old_log_prob: f64,
    pub old_value: f64,
    pub advantage: f64,
    pub return_target: f64,
}

/// Actor/critic pair plus optimizers and the update hyperparameters — the
/// part of an agent that is identical across decision-process shapes.
#[derive(Debug, Clone)]
pub(crate) struct PpoCore {
    pub actor: Network<f32>,
    pub critic: Network<f32>,
    pub actor_opt: OptimizerState<f32>,
    pub critic_opt: OptimizerState<f32>,
    pub input_dim: usize,
    clip: f64,
    value_coefficient: f64,
    entropy_coefficient: f64,
    max_grad_norm: f64,
    minibatch_size: usize,
    minibatch_epochs: usize,
}

impl PpoCore {
    /// Build actor and critic with the configured shape. Parameters draw
    /// from the init substream in a fixed order (actor first), so two agents
    /// with equal seeds and shapes start bit-identical.
    pub fn new(input_dim: usize, config: &AgentConfig) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        let mut init_rng = substream(config.seed, Stream::Init);
        let actor = Network::new(
            input_dim,
            &mlp_specs(
                config.hidden_layers,
                config.layer_size,
                Activation::LeakyRelu,
                config.dropout,
                config.policy_kind.action_count(),
                Activation::Softmax,
            ),
            &mut init_rng,
        )?;
        let critic = Network::new(
            input_dim,
            &mlp_specs(
                config.hidden_layers,
                config.layer_size,
                Activation::LeakyRelu,
                config.dropout,
                1,
                Activation::Identity,
            ),
            &mut init_rng,
        )?;
        let actor_opt = OptimizerState::adam(
            &actor,
            config.learning_rate,
            ADAM_BETA1,
            ADAM_BETA2,
            config.adam_epsilon,
        )?;
        let critic_opt = OptimizerState::adam(
            &critic,
            config.learning_rate,
            ADAM_BETA1,
            ADAM_BETA2,
            config.adam_epsilon,
        )?;
        Ok(PpoCore {
            actor,
            critic,
            actor_opt,
            critic_opt,
            input_dim,
            clip: config.clip_coefficient,
            value_coefficient: config.value_coefficient,
            entropy_coefficient: config.entropy_coefficient,
            max_grad_norm: config.max_grad_norm,
            minibatch_size: config.minibatch_size,
            minibatch_epochs: config.minibatch_epochs,
        })
    }

    /// Discard optimizer moments (used by the fine-tune reset flag).
    pub fn reset_optimizers(&mut self, config: &AgentConfig) -> Result<()> {
        self.actor_opt = OptimizerState::adam(
            &self.actor,
            config.learning_rate,
            ADAM_BETA1,
            ADAM_BETA2,
            config.adam_epsilon,
        )?;
        self.critic_opt = OptimizerState::adam(
            &self.critic,
            config.learning_rate,
            ADAM_BETA1,
            ADAM_BETA2,
            config.adam_epsilon,
        )?;
        Ok(())
    }

    /// Policy probabilities for a dense state (eval-mode).
    pub fn policy_probs(&self, dense: &[f32]) -> Result<Vec<f32>> {
        self.actor.infer(dense)
    }

    /// Critic value for a dense state (eval-mode).
    pub fn value(&self, dense: &[f32]) -> Result<f64> {
        Ok(self.critic.infer(dense)?[0] as f64)
    }

    /// One full update over `items`: `minibatch_epochs` shuffled passes of
    /// clipped-surrogate policy loss, clipped value regression, and an
    /// entropy bonus, with advantages standardized per minibatch, gradients
    /// jointly norm-clipped across both networks, and one Adam step per
    /// minibatch per network.
    ///
    /// Loss math runs in `f64` on top of `f32` forwards; gradients are
    /// seeded at the actor's logits where the softmax derivatives have
    /// closed forms.
    pub fn update(
        &mut self,
        items: &[UpdateItem<'_>],
        shuffle_rng: &mut ChaCha8Rng,
        dropout_rng: &mut ChaCha8Rng,
    ) -> Result<LossStats> {
        if items.is_empty() {
            return Err(Error::Contract("update requires at least one transition".into()));
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        let mut dense = vec![0.0f32; self.input_dim];
        let (mut pol_acc, mut val_acc, mut ent_acc, mut tot_acc, mut clip_acc) =
            (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut n_minibatches = 0usize;
        for _ in 0..self.minibatch_epochs {
            order.shuffle(shuffle_rng);
            for mb in order.chunks(self.minibatch_size) {
                let mut advs: Vec<f64> = mb.iter().map(|&i| items[i].advantage).collect();
                standardize(&mut advs);
                let inv = 1.0 / mb.len() as f64;
                let mut actor_grads = self.actor.zero_gradients();
                let mut critic_grads = self.critic.zero_gradients();
                let (mut pol_sum, mut val_sum, mut ent_sum) = (0.0, 0.0, 0.0);
                let mut clipped_count = 0usize;
                for (k, &i) in mb.iter().enumerate() {
                    let item = &items[i];
                    let adv = advs[k];
                    densify(item.features, self.input_dim, &mut dense)?;

                    // Policy term.
                    let (probs, actor_cache) =
                        self.actor.forward(&dense, Mode::Train, Some(dropout_rng))?;
                    let new_log_prob = (probs[item.action] as f64).ln();
                    let ratio = (new_log_prob - item.old_log_prob).exp();
                    let surr = ratio * adv;
                    let surr_clipped = ratio.clamp(1.0 - self.clip, 1.0 + self.clip) * adv;
                    pol_sum += -surr.min(surr_clipped);
                    if (ratio - 1.0).abs() > self.clip {
                        clipped_count += 1;
                    }
                    let entropy = probs.iter().fold(0.0f64, |h, &p| {
                        let p = p as f64;
                        if p > 0.0 {
                            h - p * p.ln()
                        } else {
                            h
                        }
                    });
                    ent_sum += entropy;
                    //   d(-min(surr, surr_clipped))/d log p_a
                    // is -adv * ratio on the unclipped branch and 0 once the
                    // clamp is the active bound.
                    let g_logp = if surr <= surr_clipped { -adv * ratio } else { 0.0 };
                    let mut logit_grad = vec![0.0f32; probs.len()];
                    for (j, lg) in logit_grad.iter_mut().enumerate() {
                        let p = probs[j] as f64;
                        let indicator = if j == item.action { 1.0 } else { 0.0 };
                        // d log p_a / d z_j = [j == a] - p_j;
                        // d(-H)/d z_j = p_j (ln p_j + H).
                        let policy_term = g_logp * (indicator - p);
                        let entropy_term = if p > 0.0 {
                            self.entropy_coefficient * p * (p.ln() + entropy)
                        } else {
                            0.0
                        };
                        *lg = ((policy_term + entropy_term) * inv) as f32;
                    }
                    actor_grads.add_assign(&self.actor.backward_pre_activation(&actor_cache, &logit_grad)?)?;

                    // Value term: clipped squared error against the return
                    // target, mirroring the policy clip.
                    let (value_out, critic_cache) =
                        self.critic.forward(&dense, Mode::Train, Some(dropout_rng))?;
                    let v = value_out[0] as f64;
                    let unclipped = (v - item.return_target) * (v - item.return_target);
                    let v_band = item.old_value + (v - item.old_value).clamp(-self.clip, self.clip);
                    let clipped = (v_band - item.return_target) * (v_band - item.return_target);
                    val_sum += unclipped.max(clipped);
                    let dv = if unclipped >= clipped {
                        2.0 * (v - item.return_target)
                    } else {
                        0.0
                    };
                    let value_grad = [(dv * self.value_coefficient * inv) as f32];
                    critic_grads.add_assign(&self.critic.backward(&critic_cache, &value_grad)?)?;
                }
                let policy_loss = pol_sum * inv;
                let value_loss = val_sum * inv;
                let entropy = ent_sum * inv;
                let total =
                    policy_loss + self.value_coefficient * value_loss - self.entropy_coefficient * entropy;
                if !total.is_finite() {
                    return Err(Error::NonFiniteLoss(format!(
                        "policy {policy_loss}, value {value_loss}, entropy {entropy} over a minibatch of {}",
                        mb.len()
                    )));
                }
                clip_global_norm(&mut [&mut actor_grads, &mut critic_grads], self.max_grad_norm)?;
                self.actor_opt.step(&mut self.actor, &actor_grads)?;
                self.critic_opt.step(&mut self.critic, &critic_grads)?;

                pol_acc += policy_loss;
                val_acc += value_loss;
                ent_acc += entropy;
                tot_acc += total;
                clip_acc += clipped_count as f64 * inv;
                n_minibatches += 1;
            }
        }
        let scale = 1.0 / n_minibatches as f64;
        Ok(LossStats {
            policy_loss: pol_acc * scale,
            value_loss: val_acc * scale,
            entropy: ent_acc * scale,
            total_loss: tot_acc * scale,
            clip_fraction: clip_acc * scale,
        })
    }
}
