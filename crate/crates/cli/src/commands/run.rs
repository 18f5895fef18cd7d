//! `run`: train a detector per seed and execute the monthly protocol.

use crate::config::{
    config_digest, hex_digest, resolve_output_dir, DatasetSpec, ExperimentConfig, ModelName,
};
use anyhow::{Context, Result};
use drmd_core::agent::{IcmdpConfig, PolicyKind};
use drmd_core::baselines::MlpBaselineConfig;
use drmd_core::data::{
    estimate_sigma_hat, generate_drift_dataset, load_dataset, record_line, select_features,
    DatasetManifest,
};
use drmd_core::env::Sample;
use drmd_core::eval::{run_monthly_eval, split_timeline, EvalReport, TimelineSplit};
use drmd_core::model::{Detector, DrmdDetector, IcmdpDetector, MlpDetector, SvmDetector};
use serde_json::json;
use std::fs;
use std::path::Path;

/// A dataset plus the digest of its canonical JSONL bytes.
pub struct LoadedDataset {
    pub samples: Vec<Sample>,
    pub manifest: DatasetManifest,
    pub digest: String,
}

/// Load or generate the configured dataset. The digest always covers the
/// canonical JSONL serialization, so a generated dataset and the same
/// dataset read back from `gen` output digest identically.
pub fn load_experiment_dataset(cfg: &ExperimentConfig) -> Result<LoadedDataset> {
    let (samples, manifest) = match cfg.dataset.spec()? {
        DatasetSpec::Path(p) => {
            load_dataset(&p).with_context(|| format!("loading dataset {}", p.display()))?
        }
        DatasetSpec::Generate(g) => generate_drift_dataset(&g)?,
    };
    let mut bytes = Vec::new();
    for s in &samples {
        bytes.extend_from_slice(record_line(s)?.as_bytes());
        bytes.push(b'\n');
    }
    Ok(LoadedDataset {
        digest: hex_digest(&bytes),
        samples,
        manifest,
    })
}

fn build_detector(
    cfg: &ExperimentConfig,
    train: &[Sample],
    input_dim: usize,
    seed: u64,
) -> Result<Box<dyn Detector>> {
    Ok(match cfg.model.name {
        ModelName::Drmd => {
            let sigma_hat = estimate_sigma_hat(train)?;
            let origin = train
                .iter()
                .map(|s| s.month)
                .min()
                .context("training split is empty")?;
            let reward = cfg.reward.to_reward_config(sigma_hat, origin);
            let agent_cfg = cfg.agent.to_agent_config(cfg.model.policy, seed);
            Box::new(DrmdDetector::train(input_dim, agent_cfg, reward, train)?)
        }
        ModelName::DrmdIcmdp => {
            let icmdp_cfg = IcmdpConfig {
                gamma: cfg.icmdp.gamma,
                gae_lambda: cfg.icmdp.gae_lambda,
                agent: cfg.agent.to_agent_config(PolicyKind::ClassifyOnly, seed),
            };
            Box::new(IcmdpDetector::train(input_dim, icmdp_cfg, train)?)
        }
        ModelName::Svm => Box::new(SvmDetector::train(
            input_dim,
            cfg.svm.c,
            cfg.svm.max_iterations,
            train,
        )?),
        ModelName::DeepMlp => {
            let mut mlp_cfg = MlpBaselineConfig::deep_drebin();
            mlp_cfg.seed = seed;
            Box::new(MlpDetector::train(input_dim, mlp_cfg, train)?)
        }
        ModelName::SlDrmd => {
            let mut mlp_cfg = MlpBaselineConfig::sl_drmd();
            mlp_cfg.seed = seed;
            Box::new(MlpDetector::train(input_dim, mlp_cfg, train)?)
        }
    })
}

/// One seed, end to end: split, optional feature selection (training split
/// only), train, run the protocol.
pub fn execute_seed(
    cfg: &ExperimentConfig,
    data: &LoadedDataset,
    seed: u64,
) -> Result<EvalReport> {
    let split = split_timeline(&data.samples, &cfg.split)?;
    let (split, input_dim) = if cfg.features.select_top_k > 0 {
        let map = select_features(
            &split.train,
            data.manifest.feature_dim,
            cfg.features.select_top_k,
        )?;
        let test_months = split
            .test_months
            .iter()
            .map(|(m, bucket)| Ok((*m, map.apply_all(bucket)?)))
            .collect::<drmd_core::Result<Vec<_>>>()?;
        (
            TimelineSplit {
                train: map.apply_all(&split.train)?,
                test_months,
            },
            map.reduced_dim(),
        )
    } else {
        (split, data.manifest.feature_dim)
    };
    let mut detector = build_detector(cfg, &split.train, input_dim, seed)?;
    let report = run_monthly_eval(detector.as_mut(), &split, &cfg.protocol)?;
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into())
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<i32> {
    let data = load_experiment_dataset(cfg)?;
    let out_dir = resolve_output_dir(&cfg.run.output_dir);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let cfg_digest = config_digest(cfg)?;

    let mut per_seed = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for &seed in &cfg.run.seeds {
        match execute_seed(cfg, &data, seed) {
            Ok(report) => {
                write_seed_outputs(&out_dir, cfg, &cfg_digest, &data.digest, seed, &report)?;
                println!(
                    "seed {seed}: aut_f1 = {} over {} test months",
                    fmt_opt(report.aut_f1),
                    report.months.len()
                );
                per_seed.push((seed, report.aut_f1));
            }
            Err(e) => {
                eprintln!("seed {seed} failed: {e:#}");
                failures.push(format!("seed {seed}: {e:#}"));
            }
        }
    }

    let auts: Vec<f64> = per_seed.iter().filter_map(|(_, a)| *a).collect();
    let (mean, std) = super::run_stats(&auts);
    let summary = json!({
        "config": cfg,
        "config_digest": cfg_digest,
        "dataset_digest": data.digest,
        "model": cfg.model.name.as_str(),
        "seeds": per_seed
            .iter()
            .map(|(seed, aut)| json!({"seed": seed, "aut_f1": aut}))
            .collect::<Vec<_>>(),
        "aut_f1_mean": mean,
        "aut_f1_std": std,
        "failures": failures,
    });
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    match (mean, std) {
        (Some(m), Some(s)) => println!("aggregate aut_f1 = {m:.4} ± {s:.4} ({} seeds)", auts.len()),
        (Some(m), None) => println!("aggregate aut_f1 = {m:.4} (1 seed)"),
        _ => println!("aggregate aut_f1 undefined"),
    }
    println!("reports written to {}", out_dir.display());
    Ok(if failures.is_empty() { 0 } else { 1 })
}

fn write_seed_outputs(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    cfg_digest: &str,
    dataset_digest: &str,
    seed: u64,
    report: &EvalReport,
) -> Result<()> {
    fs::write(
        out_dir.join(format!("seed_{seed}_months.csv")),
        report.to_csv(),
    )?;
    let summary = json!({
        "seed": seed,
        "aut_f1": report.aut_f1,
        "config_digest": cfg_digest,
        "dataset_digest": dataset_digest,
        "model": cfg.model.name.as_str(),
        "months": report.months,
        "config": cfg,
    });
    fs::write(
        out_dir.join(format!("seed_{seed}_summary.json")),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(())
}
