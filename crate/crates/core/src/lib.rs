//! Drift-aware malware detection experiments.
//!
//! This crate models malware classification as a one-step decision process:
//! an agent observes a binary feature vector and either classifies it
//! (goodware / malware) or rejects it for manual labeling. Rewards scale with
//! class imbalance and sample recency, and rejection is priced against the
//! counterfactual outcome of the classification the agent would otherwise
//! have made ([`env`]).
//!
//! On top of the environment sit:
//!
//! * [`nn`] — a small dense-network library (manual backprop, SGD/Adam,
//!   global-norm clipping, binary checkpoints) used by every learned model;
//! * [`agent`] — PPO training specialized to one-step episodes, plus a
//!   multi-step episodic variant for comparison, both with sliding-window
//!   fine-tuning;
//! * [`baselines`] — a linear SVM and feed-forward classifiers trained with
//!   supervised losses;
//! * [`eval`] — a month-by-month evaluation harness enforcing temporal
//!   ordering constraints, with rejection budgets, active-learning label
//!   budgets, and area-under-time aggregation;
//! * [`data`] — JSONL dataset ingestion, feature selection, and a seeded
//!   synthetic generator with controllable concept drift.
//!
//! All stochastic components draw from named, seeded substreams ([`rng`]) so
//! that identical seeds and inputs reproduce results bit-for-bit.

// Modules still being stood up are added as they land.
pub mod agent;
pub mod baselines;
pub mod data;
pub mod env;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
