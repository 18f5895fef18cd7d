//! Supervised baselines sharing the evaluation harness with the agents: a
//! linear SVM trained by deterministic dual coordinate descent, and two
//! cross-entropy MLP presets (a single 200-unit hidden layer, and the
//! agent's 3×512 shape trained supervised).

pub mod mlp;
pub mod svm;

pub use mlp::{mlp_predict, mlp_uncertainty, train_mlp_baseline, MlpBaseline, MlpBaselineConfig};
pub use svm::{
    svm_decision, svm_predict, svm_uncertainty, train_linear_svm, LinearSvmModel,
};
