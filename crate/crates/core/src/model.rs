//! One interface over every detector the harness can drive.
//!
//! The monthly evaluation loop only ever needs five things from a model:
//! a deterministic decision, an uncertainty score, whether it can abstain,
//! a way to hand it newly labeled samples, and a refit trigger. Agents
//! fine-tune on their sliding window; supervised baselines retrain from
//! scratch on their original training set plus every label received since
//! (cumulative retraining — the sliding window is an agent mechanism).

use crate::agent::{AgentConfig, IcmdpAgent, IcmdpConfig, PolicyKind, PpoAgent};
use crate::baselines::{
    mlp_predict, mlp_uncertainty, svm_predict, svm_uncertainty, train_linear_svm,
    train_mlp_baseline, LinearSvmModel, MlpBaseline, MlpBaselineConfig,
};
use crate::env::{Action, RewardConfig, Sample};
use crate::error::Result;

/// Capabilities the evaluation harness needs from any detector.
pub trait Detector {
    /// Deterministic deployment decision for one sample.
    fn predict(&self, sample: &Sample) -> Result<Action>;

    /// Confidence complement in [0, 1]; higher means less certain.
    fn uncertainty(&self, sample: &Sample) -> Result<f64>;

    /// Whether `predict` may return [`Action::Reject`].
    fn can_reject(&self) -> bool {
        false
    }

    /// The classification this model would issue if abstention were not
    /// available — used for counterfactual bookkeeping on rejected samples.
    /// For models that never reject this is the prediction itself.
    fn classify_counterfactual(&self, sample: &Sample) -> Result<Action> {
        self.predict(sample)
    }

    /// Record newly labeled samples for the next refit.
    fn observe_labeled(&mut self, samples: &[Sample]);

    /// Incorporate everything observed since the last (re)fit.
    fn refit(&mut self) -> Result<()>;
}

/// The one-step agent behind the shared interface. The reward
/// configuration (prevalence estimate, origin month) is frozen at
/// construction, so temporal reward scaling keeps growing as fine-tuning
/// months arrive.
pub struct DrmdDetector {
    agent: PpoAgent,
    reward_cfg: RewardConfig,
}

impl DrmdDetector {
    pub fn train(
        input_dim: usize,
        config: AgentConfig,
        reward_cfg: RewardConfig,
        samples: &[Sample],
    ) -> Result<Self> {
        let mut agent = PpoAgent::new(input_dim, config)?;
        agent.train(samples, &reward_cfg)?;
        Ok(DrmdDetector { agent, reward_cfg })
    }

    pub fn from_parts(agent: PpoAgent, reward_cfg: RewardConfig) -> Self {
        DrmdDetector { agent, reward_cfg }
    }

    pub fn agent(&self) -> &PpoAgent {
        &self.agent
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward_cfg
    }
}

impl Detector for DrmdDetector {
    fn predict(&self, sample: &Sample) -> Result<Action> {
        Ok(self.agent.predict(sample)?.0)
    }

    fn uncertainty(&self, sample: &Sample) -> Result<f64> {
        self.agent.uncertainty(sample)
    }

    fn can_reject(&self) -> bool {
        self.agent.config().policy_kind == PolicyKind::ClassifyReject
    }

    fn classify_counterfactual(&self, sample: &Sample) -> Result<Action> {
        let (_, probs) = self.agent.predict(sample)?;
        // Ties resolve toward goodware, matching the argmax convention.
        Ok(if probs[1] > probs[0] {
            Action::Malware
        } else {
            Action::Goodware
        })
    }

    fn observe_labeled(&mut self, samples: &[Sample]) {
        self.agent.push_labeled(samples);
    }

    fn refit(&mut self) -> Result<()> {
        self.agent.fine_tune(&self.reward_cfg)?;
        Ok(())
    }
}

/// The episodic comparison agent behind the shared interface.
pub struct IcmdpDetector {
    agent: IcmdpAgent,
}

impl IcmdpDetector {
    pub fn train(input_dim: usize, config: IcmdpConfig, samples: &[Sample]) -> Result<Self> {
        let mut agent = IcmdpAgent::new(input_dim, config)?;
        agent.train(samples)?;
        Ok(IcmdpDetector { agent })
    }

    pub fn agent(&self) -> &IcmdpAgent {
        &self.agent
    }
}

impl Detector for IcmdpDetector {
    fn predict(&self, sample: &Sample) -> Result<Action> {
        Ok(self.agent.predict(sample)?.0)
    }

    fn uncertainty(&self, sample: &Sample) -> Result<f64> {
        self.agent.uncertainty(sample)
    }

    fn observe_labeled(&mut self, samples: &[Sample]) {
        self.agent.push_labeled(samples);
    }

    fn refit(&mut self) -> Result<()> {
        self.agent.fine_tune()?;
        Ok(())
    }
}

/// Linear SVM with cumulative retraining.
pub struct SvmDetector {
    model: LinearSvmModel,
    training: Vec<Sample>,
    input_dim: usize,
}

impl SvmDetector {
    pub fn train(
        input_dim: usize,
        c_param: f64,
        max_iterations: usize,
        samples: &[Sample],
    ) -> Result<Self> {
        let model = train_linear_svm(samples, input_dim, c_param, max_iterations)?;
        Ok(SvmDetector {
            model,
            training: samples.to_vec(),
            input_dim,
        })
    }

    pub fn model(&self) -> &LinearSvmModel {
        &self.model
    }
}

impl Detector for SvmDetector {
    fn predict(&self, sample: &Sample) -> Result<Action> {
        Ok(Action::from_label(svm_predict(&self.model, sample)?))
    }

    fn uncertainty(&self, sample: &Sample) -> Result<f64> {
        svm_uncertainty(&self.model, sample)
    }

    fn observe_labeled(&mut self, samples: &[Sample]) {
        self.training.extend(samples.iter().cloned());
    }

    fn refit(&mut self) -> Result<()> {
        self.model = train_linear_svm(
            &self.training,
            self.input_dim,
            self.model.c_param,
            self.model.max_iterations,
        )?;
        Ok(())
    }
}

/// Cross-entropy MLP with cumulative retraining from a fresh
/// initialization each refit (same seed, so refits are reproducible).
pub struct MlpDetector {
    model: MlpBaseline,
    config: MlpBaselineConfig,
    training: Vec<Sample>,
    input_dim: usize,
}

impl MlpDetector {
    pub fn train(
        input_dim: usize,
        config: MlpBaselineConfig,
        samples: &[Sample],
    ) -> Result<Self> {
        let model = train_mlp_baseline(&config, samples, input_dim)?;
        Ok(MlpDetector {
            model,
            config,
            training: samples.to_vec(),
            input_dim,
        })
    }

    pub fn model(&self) -> &MlpBaseline {
        &self.model
    }
}

impl Detector for MlpDetector {
    fn predict(&self, sample: &Sample) -> Result<Action> {
        Ok(Action::from_label(mlp_predict(&self.model, sample)?))
    }

    fn uncertainty(&self, sample: &Sample) -> Result<f64> {
        mlp_uncertainty(&self.model, sample)
    }

    fn observe_labeled(&mut self, samples: &[Sample]) {
        self.training.extend(samples.iter().cloned());
    }

    fn refit(&mut self) -> Result<()> {
        self.model = train_mlp_baseline(&self.config, &self.training, self.input_dim)?;
        Ok(())
    }
}
