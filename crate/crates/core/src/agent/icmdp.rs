//! Episodic comparison agent.
//!
//! Instead of one-step episodes, the sample stream is consumed
//! chronologically and chained into multi-step episodes: each episode runs
//! until the agent lets a malware sample through (classifies it as
//! goodware) or the stream ends, and the next episode resumes at the very
//! next sample, so episodes partition the stream exactly. Rewards are fixed
//! class-weighted values (±1 for malware decisions, ±0.1 for goodware
//! ones), and advantages come from discounted generalized advantage
//! estimation rather than the one-step `reward - value` form. Everything
//! downstream — networks, clipped-surrogate update, sliding window — is
//! shared with the one-step agent, so the two differ only in decision
//! process shape and reward values.

use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::container::{read_container, write_container, MODEL_EPISODIC};
use super::{
    argmax, sample_categorical, uncertainty_from_probs, AgentConfig, LossStats, PolicyKind,
    PpoCore, SlidingWindow, Transition, UpdateItem,
};
use crate::env::{densify, Action, Label, Sample};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Hyperparameters for the episodic agent: discounting on top of the shared
/// agent settings. The policy is always a two-way classifier — there is no
/// reject action in this formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcmdpConfig {
    /// Discount factor, in (0, 1].
    pub gamma: f64,
    /// GAE mixing parameter, in (0, 1].
    pub gae_lambda: f64,
    pub agent: AgentConfig,
}

impl Default for IcmdpConfig {
    fn default() -> Self {
        IcmdpConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            agent: AgentConfig::default(),
        }
    }
}

impl IcmdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return Err(Error::Config(format!(
                "gae_lambda must lie in (0, 1], got {}",
                self.gae_lambda
            )));
        }
        self.agent.validate()
    }
}

/// Class-weighted episodic reward: malware decisions are worth ±1, goodware
/// decisions ±0.1.
///
/// Defined for classification actions only — passing `Reject` is a
/// programming error and panics.
pub fn icmdp_reward(label: Label, action: Action) -> f64 {
    assert!(
        action.is_classification(),
        "episodic rewards are defined for classification actions only"
    );
    let correct = action == Action::from_label(label);
    match label {
        Label::Malware => {
            if correct {
                1.0
            } else {
                -1.0
            }
        }
        Label::Goodware => {
            if correct {
                0.1
            } else {
                -0.1
            }
        }
    }
}

/// One episode's transitions, in stream order.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
}

/// Generalized advantage estimation over one episode.
///
/// `δ_t = r_t + γ·V(s_{t+1}) − V(s_t)` with the value beyond the terminal
/// step taken as zero, accumulated backwards as
/// `A_t = δ_t + γλ·A_{t+1}`. A single-step episode reduces to `r − V`, and
/// `γ = 0` reduces every advantage to its own `δ_t`.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if rewards.len() != values.len() {
        return Err(Error::Contract(format!(
            "gae needs matching lengths, got {} rewards and {} values",
            rewards.len(),
            values.len()
        )));
    }
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_value - values[t];
        carry = delta + gamma * lambda * carry;
        advantages[t] = carry;
    }
    Ok(advantages)
}

/// Episodic agent sharing the one-step agent's networks and update rule.
#[derive(Debug, Clone)]
pub struct IcmdpAgent {
    config: IcmdpConfig,
    core: PpoCore,
    window: SlidingWindow,
    rollout_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
}

impl IcmdpAgent {
    /// The stored policy kind is forced to the two-way classifier; with
    /// equal seeds and shapes this agent and a two-way one-step agent start
    /// from bit-identical parameters.
    pub fn new(input_dim: usize, mut config: IcmdpConfig) -> Result<Self> {
        config.agent.policy_kind = PolicyKind::ClassifyOnly;
        config.validate()?;
        let core = PpoCore::new(input_dim, &config.agent)?;
        let window = SlidingWindow::new(config.agent.sliding_window_size)?;
        let seed = config.agent.seed;
        Ok(IcmdpAgent {
            config,
            core,
            window,
            rollout_rng: substream(seed, Stream::Rollout),
            shuffle_rng: substream(seed, Stream::MinibatchShuffle),
            dropout_rng: substream(seed, Stream::Dropout),
        })
    }

    pub fn config(&self) -> &IcmdpConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.core.input_dim
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    pub fn actor(&self) -> &crate::nn::Network<f32> {
        &self.core.actor
    }

    pub fn critic(&self) -> &crate::nn::Network<f32> {
        &self.core.critic
    }

    #[cfg(test)]
    pub(crate) fn core_mut(&mut self) -> &mut PpoCore {
        &mut self.core
    }

    /// Walk the stream in order, sampling actions eval-mode, and cut an
    /// episode boundary after every malware sample the agent lets through.
    /// Goodware mistakes cost reward but never terminate. The trailing
    /// partial episode (stream exhausted) is kept.
    pub fn rollout_episodes(&mut self, samples: &[Sample]) -> Result<Vec<Episode>> {
        if samples.is_empty() {
            return Err(Error::Config("rollout requires at least one sample".into()));
        }
        let mut dense = vec![0.0f32; self.core.input_dim];
        let mut episodes = Vec::new();
        let mut current = Vec::new();
        for sample in samples {
            densify(&sample.features, self.core.input_dim, &mut dense)?;
            let probs = self.core.policy_probs(&dense)?;
            let action_idx = sample_categorical(&probs, &mut self.rollout_rng);
            let action = Action::from_code(action_idx)?;
            let value_estimate = self.core.value(&dense)?;
            current.push(Transition {
                sample_id: sample.id.clone(),
                features: sample.features.clone(),
                action,
                log_prob: (probs[action_idx] as f64).ln(),
                value_estimate,
                reward: icmdp_reward(sample.label, action),
            });
            let missed_malware = sample.label == Label::Malware && action == Action::Goodware;
            if missed_malware {
                episodes.push(Episode {
                    transitions: std::mem::take(&mut current),
                });
            }
        }
        if !current.is_empty() {
            episodes.push(Episode {
                transitions: current,
            });
        }
        Ok(episodes)
    }

    /// GAE advantages per episode, then one shared clipped-surrogate update
    /// over the flattened transitions. The critic's return target is
    /// `advantage + value`.
    pub fn update_from_episodes(&mut self, episodes: &[Episode]) -> Result<LossStats> {
        let mut items: Vec<UpdateItem<'_>> = Vec::new();
        for episode in episodes {
            let rewards: Vec<f64> = episode.transitions.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = episode.transitions.iter().map(|t| t.value_estimate).collect();
            let advantages = gae(&rewards, &values, self.config.gamma, self.config.gae_lambda)?;
            for (t, adv) in episode.transitions.iter().zip(advantages) {
                items.push(UpdateItem {
                    features: &t.features,
                    action: t.action.code(),
                    old_log_prob: t.log_prob,
                    old_value: t.value_estimate,
                    advantage: adv,
                    return_target: adv + t.value_estimate,
                });
            }
        }
        if items.is_empty() {
            return Err(Error::Contract("update requires at least one transition".into()));
        }
        self.core
            .update(&items, &mut self.shuffle_rng, &mut self.dropout_rng)
    }

    /// `data_epochs` rounds of episodic rollout + update, then seed the
    /// fine-tuning window with the newest samples.
    pub fn train(&mut self, samples: &[Sample]) -> Result<Vec<LossStats>> {
        if samples.is_empty() {
            return Err(Error::Config("training requires a non-empty sample set".into()));
        }
        let mut stats = Vec::with_capacity(self.config.agent.data_epochs);
        for _ in 0..self.config.agent.data_epochs {
            let episodes = self.rollout_episodes(samples)?;
            stats.push(self.update_from_episodes(&episodes)?);
        }
        self.window.clear();
        self.window.extend(samples.iter().cloned());
        Ok(stats)
    }

    pub fn push_labeled(&mut self, samples: &[Sample]) {
        self.window.extend(samples.iter().cloned());
    }

    pub fn fine_tune(&mut self) -> Result<Vec<LossStats>> {
        if self.window.is_empty() {
            return Err(Error::Config("fine-tuning requires a non-empty window".into()));
        }
        if self.config.agent.reset_optimizer_on_fine_tune {
            self.core.reset_optimizers(&self.config.agent)?;
        }
        let samples: Vec<Sample> = self.window.samples().to_vec();
        let mut stats = Vec::with_capacity(self.config.agent.data_epochs);
        for _ in 0..self.config.agent.data_epochs {
            let episodes = self.rollout_episodes(&samples)?;
            stats.push(self.update_from_episodes(&episodes)?);
        }
        Ok(stats)
    }

    /// Deterministic argmax decision plus the probability vector.
    pub fn predict(&self, sample: &Sample) -> Result<(Action, Vec<f64>)> {
        let mut dense = vec![0.0f32; self.core.input_dim];
        densify(&sample.features, self.core.input_dim, &mut dense)?;
        let probs = self.core.policy_probs(&dense)?;
        let action = Action::from_code(argmax(&probs))?;
        Ok((action, probs.iter().map(|&p| p as f64).collect()))
    }

    pub fn uncertainty(&self, sample: &Sample) -> Result<f64> {
        let (_, probs) = self.predict(sample)?;
        Ok(uncertainty_from_probs(&probs))
    }

    pub fn save<W: Write>(&self, w: &mut W, origin_month: u32) -> Result<()> {
        let config_json = serde_json::to_vec(&self.config)
            .map_err(|e| Error::Checkpoint(format!("config serialization failed: {e}")))?;
        write_container(
            w,
            MODEL_EPISODIC,
            origin_month,
            &config_json,
            &self.core.actor,
            &self.core.critic,
        )
    }

    pub fn load<R: Read>(r: &mut R) -> Result<(Self, u32)> {
        let (header, actor, critic) = read_container(r)?;
        if header.model != MODEL_EPISODIC {
            return Err(Error::Checkpoint(format!(
                "expected an episodic agent container, found model byte {}",
                header.model
            )));
        }
        let config: IcmdpConfig = serde_json::from_slice(&header.config_json)
            .map_err(|e| Error::Checkpoint(format!("bad stored config: {e}")))?;
        config.validate()?;
        if actor.input_dim() != critic.input_dim() {
            return Err(Error::Checkpoint(
                "actor and critic input dimensions disagree".into(),
            ));
        }
        if actor.output_dim() != 2 || critic.output_dim() != 1 {
            return Err(Error::Checkpoint(
                "episodic container must hold a two-way actor and scalar critic".into(),
            ));
        }
        let mut agent = IcmdpAgent::new(actor.input_dim(), config)?;
        agent.core.actor = actor;
        agent.core.critic = critic;
        let cfg = agent.config.agent.clone();
        agent.core.reset_optimizers(&cfg)?;
        Ok((agent, header.origin_month))
    }

    pub fn save_file(&self, path: &Path, origin_month: u32) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save(&mut file, origin_month)?;
        use std::io::Write as _;
        file.flush()?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<(Self, u32)> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::load(&mut file)
    }
}
