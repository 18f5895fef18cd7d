//! Experiment configuration: the TOML schema, dotted-key overrides, and
//! content digests.
//!
//! A config file is optional — every field has a documented default that
//! mirrors the published hyperparameters — and any key can be overridden on
//! the command line with `--set section.key=value`. Overrides are merged
//! into the raw TOML before deserialization, so they face exactly the same
//! validation as file contents.

use anyhow::{anyhow, bail, Context, Result};
use drmd_core::agent::{AgentConfig, PolicyKind};
use drmd_core::data::DriftGenConfig;
use drmd_core::env::RewardConfig;
use drmd_core::eval::{ProtocolConfig, SplitConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Environment variable that re-roots relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "DRMD_OUTPUT_ROOT";

/// Which detector to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    /// The one-step classify/reject agent.
    Drmd,
    /// The episodic comparison agent (classify-only by construction).
    DrmdIcmdp,
    /// Linear SVM baseline.
    Svm,
    /// One-hidden-layer MLP baseline.
    DeepMlp,
    /// The agent's architecture trained with plain cross-entropy.
    SlDrmd,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Drmd => "drmd",
            ModelName::DrmdIcmdp => "drmd-icmdp",
            ModelName::Svm => "svm",
            ModelName::DeepMlp => "deep-mlp",
            ModelName::SlDrmd => "sl-drmd",
        }
    }
}

/// `[dataset]`: where samples come from. Set `path` to ingest a JSONL file
/// or `[dataset.generate]` to synthesize one; with neither, a default
/// synthetic dataset is generated. Setting both is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub path: Option<PathBuf>,
    pub generate: Option<DriftGenConfig>,
}

/// Resolved dataset source.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Path(PathBuf),
    Generate(DriftGenConfig),
}

impl DatasetSection {
    pub fn spec(&self) -> Result<DatasetSpec> {
        match (&self.path, &self.generate) {
            (Some(_), Some(_)) => {
                bail!("[dataset] sets both path and generate; pick one source")
            }
            (Some(p), None) => Ok(DatasetSpec::Path(p.clone())),
            (None, Some(g)) => Ok(DatasetSpec::Generate(g.clone())),
            (None, None) => Ok(DatasetSpec::Generate(DriftGenConfig::default())),
        }
    }
}

/// `[model]`: detector and policy shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub name: ModelName,
    /// `classify-reject` adds the reject action and is valid only for
    /// `drmd`.
    pub policy: PolicyKind,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            name: ModelName::Drmd,
            policy: PolicyKind::ClassifyOnly,
        }
    }
}

/// `[agent]`: PPO hyperparameters. Defaults mirror the published setup; the
/// policy shape comes from `[model]` and the seed from `[run].seeds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub hidden_layers: usize,
    pub layer_size: usize,
    pub dropout: f64,
    pub data_epochs: usize,
    pub minibatch_epochs: usize,
    pub minibatch_size: usize,
    pub clip_coefficient: f64,
    pub value_coefficient: f64,
    pub entropy_coefficient: f64,
    pub max_grad_norm: f64,
    pub learning_rate: f64,
    pub adam_epsilon: f64,
    /// Fine-tuning window size; `0` accumulates without bound.
    pub sliding_window_size: usize,
    pub reset_optimizer_on_fine_tune: bool,
}

impl Default for AgentSection {
    fn default() -> Self {
        let base = AgentConfig::default();
        AgentSection {
            hidden_layers: base.hidden_layers,
            layer_size: base.layer_size,
            dropout: base.dropout,
            data_epochs: base.data_epochs,
            minibatch_epochs: base.minibatch_epochs,
            minibatch_size: base.minibatch_size,
            clip_coefficient: base.clip_coefficient,
            value_coefficient: base.value_coefficient,
            entropy_coefficient: base.entropy_coefficient,
            max_grad_norm: base.max_grad_norm,
            learning_rate: base.learning_rate,
            adam_epsilon: base.adam_epsilon,
            sliding_window_size: base.sliding_window_size.unwrap_or(0),
            reset_optimizer_on_fine_tune: base.reset_optimizer_on_fine_tune,
        }
    }
}

impl AgentSection {
    pub fn to_agent_config(&self, policy: PolicyKind, seed: u64) -> AgentConfig {
        AgentConfig {
            policy_kind: policy,
            hidden_layers: self.hidden_layers,
            layer_size: self.layer_size,
            dropout: self.dropout,
            data_epochs: self.data_epochs,
            minibatch_epochs: self.minibatch_epochs,
            minibatch_size: self.minibatch_size,
            clip_coefficient: self.clip_coefficient,
            value_coefficient: self.value_coefficient,
            entropy_coefficient: self.entropy_coefficient,
            max_grad_norm: self.max_grad_norm,
            learning_rate: self.learning_rate,
            adam_epsilon: self.adam_epsilon,
            sliding_window_size: match self.sliding_window_size {
                0 => None,
                n => Some(n),
            },
            reset_optimizer_on_fine_tune: self.reset_optimizer_on_fine_tune,
            seed,
        }
    }
}

/// `[icmdp]`: discounting for the episodic comparison agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcmdpSection {
    pub gamma: f64,
    pub gae_lambda: f64,
}

impl Default for IcmdpSection {
    fn default() -> Self {
        IcmdpSection {
            gamma: 0.99,
            gae_lambda: 0.95,
        }
    }
}

/// `[svm]`: linear SVM baseline knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmSection {
    pub c: f64,
    pub max_iterations: usize,
}

impl Default for SvmSection {
    fn default() -> Self {
        SvmSection {
            c: 1.0,
            max_iterations: 50_000,
        }
    }
}

/// `[features]`: optional top-k feature selection computed on the training
/// split only. `0` keeps the full feature space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSection {
    pub select_top_k: usize,
}

/// `[reward]`: reward shaping. The prevalence estimate and origin month are
/// always computed from the training split, never configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub rejection_cost: f64,
    pub temporal_scaling: bool,
    pub imbalance_scaling: bool,
    pub reward_rejected_outcome: bool,
    pub negate_cost: bool,
}

impl Default for RewardSection {
    fn default() -> Self {
        let base = RewardConfig::default();
        RewardSection {
            rejection_cost: base.rejection_cost,
            temporal_scaling: base.temporal_scaling,
            imbalance_scaling: base.imbalance_scaling,
            reward_rejected_outcome: base.reward_rejected_outcome,
            negate_cost: base.negate_cost,
        }
    }
}

impl RewardSection {
    pub fn to_reward_config(&self, sigma_hat: f64, origin_month: u32) -> RewardConfig {
        RewardConfig {
            sigma_hat,
            rejection_cost: self.rejection_cost,
            origin_month,
            temporal_scaling: self.temporal_scaling,
            imbalance_scaling: self.imbalance_scaling,
            reward_rejected_outcome: self.reward_rejected_outcome,
            negate_cost: self.negate_cost,
        }
    }
}

/// `[run]`: seed sweep and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    /// Output directory; when relative and `DRMD_OUTPUT_ROOT` is set, the
    /// directory is created under that root.
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seeds: vec![1],
            output_dir: PathBuf::from("out"),
        }
    }
}

/// The full experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub agent: AgentSection,
    pub icmdp: IcmdpSection,
    pub svm: SvmSection,
    pub split: SplitConfig,
    pub features: FeatureSection,
    pub protocol: ProtocolConfig,
    pub reward: RewardSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.spec()?;
        if self.model.policy == PolicyKind::ClassifyReject && self.model.name != ModelName::Drmd
        {
            bail!(
                "policy classify-reject is only valid for model drmd, not {}",
                self.model.name.as_str()
            );
        }
        if self.model.policy == PolicyKind::ClassifyReject && !self.protocol.integrated_rejection
        {
            bail!(
                "a classify-reject policy requires protocol.integrated_rejection = true \
                 so its abstentions are honored"
            );
        }
        if self.protocol.integrated_rejection && self.model.policy != PolicyKind::ClassifyReject
        {
            bail!(
                "protocol.integrated_rejection = true requires model drmd with \
                 policy classify-reject"
            );
        }
        self.split
            .validate()
            .map_err(|e| anyhow!("[split] {e}"))?;
        self.protocol
            .validate()
            .map_err(|e| anyhow!("[protocol] {e}"))?;
        if !(self.svm.c > 0.0) || self.svm.max_iterations == 0 {
            bail!("[svm] needs c > 0 and max_iterations >= 1");
        }
        for (name, v) in [("gamma", self.icmdp.gamma), ("gae_lambda", self.icmdp.gae_lambda)] {
            if !(v > 0.0 && v <= 1.0) {
                bail!("[icmdp] {name} must lie in (0, 1], got {v}");
            }
        }
        if !self.reward.rejection_cost.is_finite() {
            bail!("[reward] rejection_cost must be finite");
        }
        if self.run.seeds.is_empty() {
            bail!("[run] seeds must not be empty");
        }
        Ok(())
    }
}

/// Set a dotted key in a raw TOML table, creating intermediate tables. The
/// value is parsed as TOML (`true`, `3`, `-0.1`, `[1,2]`); anything that
/// does not parse is treated as a string.
fn apply_set(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {spec:?}"))?;
    let key = key.trim();
    let segments: Vec<&str> = key.split('.').collect();
    if key.is_empty() || segments.iter().any(|s| s.is_empty()) {
        bail!("--set key {key:?} is not a dotted path");
    }
    let value = parse_toml_value(raw.trim());
    let mut current = table;
    for seg in &segments[..segments.len() - 1] {
        current = current
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("--set {key}: {seg} already holds a non-table value"))?;
    }
    current.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

fn parse_toml_value(raw: &str) -> toml::Value {
    if let Ok(t) = format!("v = {raw}").parse::<toml::Table>() {
        if let Some(v) = t.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}

/// Load a config file (or start from defaults), merge `--set` overrides,
/// deserialize strictly, and validate.
pub fn load_config(path: Option<&Path>, sets: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            text.parse()
                .with_context(|| format!("parsing config {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    for s in sets {
        apply_set(&mut table, s)?;
    }
    let cfg = ExperimentConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| anyhow!("invalid configuration: {e}"))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Hex SHA-256 of the canonical JSON form of the resolved config.
pub fn config_digest(cfg: &ExperimentConfig) -> Result<String> {
    let json = serde_json::to_string(cfg).context("serializing config for digest")?;
    Ok(hex_digest(json.as_bytes()))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Resolve an output directory against `DRMD_OUTPUT_ROOT`: relative paths
/// land under the root, absolute paths are used as-is.
pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}
