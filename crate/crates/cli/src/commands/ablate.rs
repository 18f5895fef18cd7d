//! `ablate`: the cumulative component breakdown.
//!
//! Starting from a deliberately basic agent (one 128-unit hidden layer,
//! plain ±1 accuracy reward, no rejection, no labeling), each row switches
//! on exactly one more component and re-runs the full pipeline, so the
//! report reads as "what did this piece buy us" from top to bottom.

use crate::commands::run::{execute_seed, load_experiment_dataset};
use crate::config::{resolve_output_dir, ExperimentConfig, ModelName};
use anyhow::{Context, Result};
use drmd_core::agent::PolicyKind;
use drmd_core::eval::ProtocolConfig;
use std::fs;

type Mutation = fn(&mut ExperimentConfig);

/// The ordered toggle sequence. Each row's mutation is applied on top of the
/// previous row's configuration.
pub fn ablation_rows() -> Vec<(&'static str, &'static str, Mutation)> {
    vec![
        (
            "basic",
            "single 128-unit hidden layer; plain +-1 accuracy reward; no rejection",
            |c| {
                c.model.name = ModelName::Drmd;
                c.model.policy = PolicyKind::ClassifyOnly;
                c.agent.hidden_layers = 1;
                c.agent.layer_size = 128;
                c.agent.sliding_window_size = 0;
                c.reward.temporal_scaling = false;
                c.reward.imbalance_scaling = false;
                c.reward.rejection_cost = 0.0;
                c.reward.reward_rejected_outcome = false;
                c.reward.negate_cost = false;
                c.protocol = ProtocolConfig::default();
            },
        ),
        ("temporal-reward", "+ recency scaling on classification rewards", |c| {
            c.reward.temporal_scaling = true;
        }),
        ("imbalance-reward", "+ class-imbalance scaling on classification rewards", |c| {
            c.reward.imbalance_scaling = true;
        }),
        ("deep-network", "+ three hidden layers", |c| {
            c.agent.hidden_layers = 3;
        }),
        ("wide-network", "+ 512-unit hidden layers", |c| {
            c.agent.layer_size = 512;
        }),
        (
            "reject-action",
            "+ reject action with integrated rejection (zero cost; no outcome term)",
            |c| {
                c.model.policy = PolicyKind::ClassifyReject;
                c.protocol.integrated_rejection = true;
            },
        ),
        ("rejected-outcome-reward", "+ counterfactual outcome term on rejections", |c| {
            c.reward.reward_rejected_outcome = true;
        }),
        ("rejection-cost", "+ rejection cost -0.1", |c| {
            c.reward.rejection_cost = -0.1;
        }),
        ("integrated-al", "+ every rejected sample labeled for fine-tuning", |c| {
            c.protocol.integrated_al = true;
        }),
        ("sliding-window", "+ fine-tuning window capped at 5000 samples", |c| {
            c.agent.sliding_window_size = 5000;
        }),
        ("augmented-al", "+ labeling topped up to a fixed budget of 400", |c| {
            c.protocol.integrated_al = false;
            c.protocol.augmented_al = true;
            c.protocol.al_budget_for_iraal = 400;
        }),
    ]
}

pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<i32> {
    let data = load_experiment_dataset(cfg)?;
    let out_dir = resolve_output_dir(&cfg.run.output_dir);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let mut current = cfg.clone();
    let mut csv = String::from("row,name,toggle,aut_f1_mean,aut_f1_std\n");
    for (row, (name, toggle, mutate)) in ablation_rows().into_iter().enumerate() {
        mutate(&mut current);
        current
            .validate()
            .with_context(|| format!("ablation row {name} produced an invalid config"))?;

        let mut auts = Vec::new();
        for &seed in &cfg.run.seeds {
            let report = execute_seed(&current, &data, seed)
                .with_context(|| format!("ablation row {name}, seed {seed}"))?;
            if let Some(a) = report.aut_f1 {
                auts.push(a);
            }
        }
        let (mean, std) = super::run_stats(&auts);
        let mean_s = mean.map(|v| v.to_string()).unwrap_or_default();
        let std_s = std.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("{row},{name},{toggle},{mean_s},{std_s}\n"));
        println!(
            "row {row:>2} {name:<24} aut_f1 = {}{}",
            mean.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into()),
            std.map(|v| format!(" ± {v:.4}")).unwrap_or_default()
        );
    }

    let path = out_dir.join("ablation.csv");
    fs::write(&path, csv)?;
    println!("ablation report written to {}", path.display());
    Ok(0)
}
