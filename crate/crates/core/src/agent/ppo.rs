//! The one-step detection agent.
//!
//! Every sample is its own episode: the agent observes the feature vector,
//! picks goodware / malware / (optionally) reject, receives the shaped
//! reward, and the episode ends. With no successor state the advantage
//! collapses to `reward - value_estimate` and the critic's target is the
//! raw reward — no discounting, no bootstrapping.

use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use super::container::{
    read_container, write_container, MODEL_CLASSIFY_ONLY, MODEL_CLASSIFY_REJECT,
};
use super::{
    advantage, argmax, sample_categorical, uncertainty_from_probs, AgentConfig, LossStats,
    PolicyKind, PpoCore, SlidingWindow, Transition, UpdateItem,
};
use crate::env::{densify, reward, Action, RewardConfig, Sample};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Classify/reject agent trained on one-step episodes.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    config: AgentConfig,
    core: PpoCore,
    window: SlidingWindow,
    rollout_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
}

impl PpoAgent {
    pub fn new(input_dim: usize, config: AgentConfig) -> Result<Self> {
        let core = PpoCore::new(input_dim, &config)?;
        let window = SlidingWindow::new(config.sliding_window_size)?;
        let seed = config.seed;
        Ok(PpoAgent {
            config,
            core,
            window,
            rollout_rng: substream(seed, Stream::Rollout),
            shuffle_rng: substream(seed, Stream::MinibatchShuffle),
            dropout_rng: substream(seed, Stream::Dropout),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.core.input_dim
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    /// Read-only view of the policy network.
    pub fn actor(&self) -> &crate::nn::Network<f32> {
        &self.core.actor
    }

    /// Read-only view of the value network.
    pub fn critic(&self) -> &crate::nn::Network<f32> {
        &self.core.critic
    }

    fn densify_into(&self, sample: &Sample, dense: &mut [f32]) -> Result<()> {
        densify(&sample.features, self.core.input_dim, dense)
    }

    /// Collect one transition per sample under the current policy.
    ///
    /// Forwards run eval-mode (dropout is a training-loss regularizer, not
    /// part of the behavior policy), actions are sampled from the softmax
    /// output, and rewards come from the shaped reward function using the
    /// same probability vector the action was drawn from.
    pub fn rollout(&mut self, samples: &[Sample], reward_cfg: &RewardConfig) -> Result<Vec<Transition>> {
        if samples.is_empty() {
            return Err(Error::Config("rollout requires at least one sample".into()));
        }
        reward_cfg.validate()?;
        let mut dense = vec![0.0f32; self.core.input_dim];
        let mut transitions = Vec::with_capacity(samples.len());
        for sample in samples {
            self.densify_into(sample, &mut dense)?;
            let probs = self.core.policy_probs(&dense)?;
            let action_idx = sample_categorical(&probs, &mut self.rollout_rng);
            let action = Action::from_code(action_idx)?;
            let probs64: Vec<f64> = probs.iter().map(|&p| p as f64).collect();
            let r = reward(sample, action, &probs64, reward_cfg)?;
            let value_estimate = self.core.value(&dense)?;
            transitions.push(Transition {
                sample_id: sample.id.clone(),
                features: sample.features.clone(),
                action,
                log_prob: probs64[action_idx].ln(),
                value_estimate,
                reward: r,
            });
        }
        Ok(transitions)
    }

    /// One clipped-surrogate update over collected transitions.
    pub fn ppo_update(&mut self, transitions: &[Transition]) -> Result<LossStats> {
        if transitions.is_empty() {
            return Err(Error::Contract("update requires at least one transition".into()));
        }
        let items: Vec<UpdateItem<'_>> = transitions
            .iter()
            .map(|t| UpdateItem {
                features: &t.features,
                action: t.action.code(),
                old_log_prob: t.log_prob,
                old_value: t.value_estimate,
                advantage: advantage(t),
                return_target: t.reward,
            })
            .collect();
        self.core
            .update(&items, &mut self.shuffle_rng, &mut self.dropout_rng)
    }

    /// Full training run: `data_epochs` rounds of rollout + update over
    /// `samples`, then seed the fine-tuning window with the newest samples
    /// (all of them when the window is unbounded).
    pub fn train(&mut self, samples: &[Sample], reward_cfg: &RewardConfig) -> Result<Vec<LossStats>> {
        if samples.is_empty() {
            return Err(Error::Config("training requires a non-empty sample set".into()));
        }
        let mut stats = Vec::with_capacity(self.config.data_epochs);
        for _ in 0..self.config.data_epochs {
            let transitions = self.rollout(samples, reward_cfg)?;
            stats.push(self.ppo_update(&transitions)?);
        }
        self.window.clear();
        self.window.extend(samples.iter().cloned());
        Ok(stats)
    }

    /// Append newly labeled samples to the fine-tuning window (oldest
    /// entries fall out once the capacity is exceeded).
    pub fn push_labeled(&mut self, samples: &[Sample]) {
        self.window.extend(samples.iter().cloned());
    }

    /// Retrain on the current window contents: the same rollout + update
    /// loop as `train`, against whatever the window now holds.
    pub fn fine_tune(&mut self, reward_cfg: &RewardConfig) -> Result<Vec<LossStats>> {
        if self.window.is_empty() {
            return Err(Error::Config("fine-tuning requires a non-empty window".into()));
        }
        if self.config.reset_optimizer_on_fine_tune {
            self.core.reset_optimizers(&self.config)?;
        }
        let samples: Vec<Sample> = self.window.samples().to_vec();
        let mut stats = Vec::with_capacity(self.config.data_epochs);
        for _ in 0..self.config.data_epochs {
            let transitions = self.rollout(&samples, reward_cfg)?;
            stats.push(self.ppo_update(&transitions)?);
        }
        Ok(stats)
    }

    /// Deterministic deployment decision: the argmax action (ties resolve
    /// to the lowest action code) plus the full probability vector.
    pub fn predict(&self, sample: &Sample) -> Result<(Action, Vec<f64>)> {
        let mut dense = vec![0.0f32; self.core.input_dim];
        self.densify_into(sample, &mut dense)?;
        let probs = self.core.policy_probs(&dense)?;
        let action = Action::from_code(argmax(&probs))?;
        Ok((action, probs.iter().map(|&p| p as f64).collect()))
    }

    /// Stochastic decision (used during rollouts; deployment uses
    /// [`PpoAgent::predict`]).
    pub fn sample_action(&mut self, sample: &Sample) -> Result<(Action, Vec<f64>)> {
        let mut dense = vec![0.0f32; self.core.input_dim];
        self.densify_into(sample, &mut dense)?;
        let probs = self.core.policy_probs(&dense)?;
        let action = Action::from_code(sample_categorical(&probs, &mut self.rollout_rng))?;
        Ok((action, probs.iter().map(|&p| p as f64).collect()))
    }

    /// One minus the winning classification probability, renormalized over
    /// the classification actions: 0 at full confidence, 0.5 at coin-flip.
    pub fn uncertainty(&self, sample: &Sample) -> Result<f64> {
        let (_, probs) = self.predict(sample)?;
        Ok(uncertainty_from_probs(&probs))
    }

    fn model_byte(&self) -> u8 {
        match self.config.policy_kind {
            PolicyKind::ClassifyOnly => MODEL_CLASSIFY_ONLY,
            PolicyKind::ClassifyReject => MODEL_CLASSIFY_REJECT,
        }
    }

    /// Serialize parameters plus config into the agent container.
    ///
    /// `origin_month` is recorded so a loaded agent can rebuild the reward
    /// configuration it was trained under.
    pub fn save<W: Write>(&self, w: &mut W, origin_month: u32) -> Result<()> {
        let config_json = serde_json::to_vec(&self.config)
            .map_err(|e| Error::Checkpoint(format!("config serialization failed: {e}")))?;
        write_container(
            w,
            self.model_byte(),
            origin_month,
            &config_json,
            &self.core.actor,
            &self.core.critic,
        )
    }

    /// Inverse of [`PpoAgent::save`]; returns the agent and the recorded
    /// origin month. Optimizer moments and window contents start fresh.
    pub fn load<R: Read>(r: &mut R) -> Result<(Self, u32)> {
        let (header, actor, critic) = read_container(r)?;
        let config: AgentConfig = serde_json::from_slice(&header.config_json)
            .map_err(|e| Error::Checkpoint(format!("bad stored config: {e}")))?;
        config.validate()?;
        let expected_model = match config.policy_kind {
            PolicyKind::ClassifyOnly => MODEL_CLASSIFY_ONLY,
            PolicyKind::ClassifyReject => MODEL_CLASSIFY_REJECT,
        };
        if header.model != expected_model {
            return Err(Error::Checkpoint(format!(
                "model byte {} disagrees with stored policy kind",
                header.model
            )));
        }
        if actor.input_dim() != critic.input_dim() {
            return Err(Error::Checkpoint(
                "actor and critic input dimensions disagree".into(),
            ));
        }
        if actor.output_dim() != config.policy_kind.action_count() || critic.output_dim() != 1 {
            return Err(Error::Checkpoint(
                "network head widths disagree with stored policy kind".into(),
            ));
        }
        let mut agent = PpoAgent::new(actor.input_dim(), config)?;
        agent.core.actor = actor;
        agent.core.critic = critic;
        // Fresh moments sized for the loaded parameters.
        let cfg = agent.config.clone();
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
