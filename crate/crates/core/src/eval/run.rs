//! The monthly evaluation loop: score, quarantine, measure, label, refit.
//!
//! Each test month runs the same causal sequence: every sample is scored
//! first (so rejection bookkeeping can never change recorded predictions),
//! quarantine is applied (the model's own reject actions, then the budget
//! top-up), metrics are computed on the accepted remainder, the labeling
//! protocol picks samples whose ground truth the model may see, and the
//! model refits before the next month begins. Ground-truth labels are
//! consumed in exactly two places: post-hoc metric computation and the
//! labels attached to protocol-selected samples.

use crate::env::{Action, Label, Sample};
use crate::error::{Error, Result};
use crate::eval::metrics::{aut_defined, prf};
use crate::eval::protocol::{select_top_uncertain, ProtocolConfig};
use crate::eval::split::TimelineSplit;
use crate::model::Detector;
use serde::{Deserialize, Serialize};

/// One test month's outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRecord {
    pub month: u32,
    /// Malware-class metrics over accepted samples; `None` when undefined
    /// (no accepted samples, or no malware involved).
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Total quarantined (integrated + budget).
    pub n_rejected: usize,
    /// Samples whose ground truth was released for retraining.
    pub n_al: usize,
    /// Accepted samples the metrics cover.
    pub n_evaluated: usize,
    /// Quarantines issued by the model's own reject action.
    pub n_integrated_rejected: usize,
    /// Rejected samples whose counterfactual classification was wrong.
    pub n_rejected_counterfactual_err: usize,
    /// Accepted samples classified incorrectly.
    pub n_accepted_err: usize,
}

/// Full run outcome: per-month records plus the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub months: Vec<MonthRecord>,
    /// Trapezoidal mean of monthly F1, skipping undefined months; `None`
    /// when fewer than two months have defined F1.
    pub aut_f1: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    pub fn f1_series(&self) -> Vec<Option<f64>> {
        self.months.iter().map(|m| m.f1).collect()
    }

    /// Fixed-column CSV; undefined metrics are empty cells. Float cells use
    /// shortest-roundtrip formatting, so equal runs produce equal bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,f1,precision,recall,n_rejected,n_al,n_evaluated\n");
        for m in &self.months {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                m.month,
                fmt_opt(m.f1),
                fmt_opt(m.precision),
                fmt_opt(m.recall),
                m.n_rejected,
                m.n_al,
                m.n_evaluated
            ));
        }
        out
    }
}

struct ScoredBucket<'a> {
    samples: &'a [Sample],
    actions: Vec<Action>,
    uncertainties: Vec<f64>,
}

impl<'a> ScoredBucket<'a> {
    fn ids_of(&self, indices: &[usize]) -> Vec<&str> {
        indices.iter().map(|&i| self.samples[i].id.as_str()).collect()
    }

    fn scores_of(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.uncertainties[i]).collect()
    }
}

/// Run the full monthly protocol over a split with an already-trained
/// model. See the module docs for the per-month sequence.
pub fn run_monthly_eval(
    model: &mut dyn Detector,
    split: &TimelineSplit,
    protocol: &ProtocolConfig,
) -> Result<EvalReport> {
    protocol.validate()?;
    if protocol.integrated_rejection && !model.can_reject() {
        return Err(Error::Config(
            "integrated rejection requires a model with a reject action".into(),
        ));
    }
    if model.can_reject() && !protocol.integrated_rejection {
        return Err(Error::Config(
            "a rejecting model needs integrated_rejection so its abstentions are honored".into(),
        ));
    }

    let mut months = Vec::with_capacity(split.test_months.len());
    for (month, bucket) in &split.test_months {
        // (1) Score everything up front.
        let mut actions = Vec::with_capacity(bucket.len());
        let mut uncertainties = Vec::with_capacity(bucket.len());
        for s in bucket {
            actions.push(model.predict(s)?);
            uncertainties.push(model.uncertainty(s)?);
        }
        let scored = ScoredBucket { samples: bucket, actions, uncertainties };

        // (2) Integrated rejections: the model's own abstentions.
        let mut rejected = vec![false; bucket.len()];
        if protocol.integrated_rejection {
            for (i, a) in scored.actions.iter().enumerate() {
                if *a == Action::Reject {
                    rejected[i] = true;
                }
            }
        }
        let integrated: Vec<usize> = (0..bucket.len()).filter(|&i| rejected[i]).collect();

        // (3) Budget rejection over the remainder.
        if protocol.monthly_rejection_budget > 0 {
            let candidates: Vec<usize> = (0..bucket.len()).filter(|&i| !rejected[i]).collect();
            let picked = select_top_uncertain(
                &scored.ids_of(&candidates),
                &scored.scores_of(&candidates),
                protocol.monthly_rejection_budget,
            )?;
            for p in picked {
                rejected[candidates[p]] = true;
            }
        }
        let accepted: Vec<usize> = (0..bucket.len()).filter(|&i| !rejected[i]).collect();
        let all_rejected: Vec<usize> = (0..bucket.len()).filter(|&i| rejected[i]).collect();

        // (4) Metrics over accepted samples only.
        let mut preds = Vec::with_capacity(accepted.len());
        let mut labels = Vec::with_capacity(accepted.len());
        let mut n_accepted_err = 0;
        for &i in &accepted {
            let predicted = match scored.actions[i] {
                Action::Goodware => Label::Goodware,
                Action::Malware => Label::Malware,
                Action::Reject => {
                    return Err(Error::Contract(
                        "an accepted sample cannot carry a reject action".into(),
                    ))
                }
            };
            if predicted != bucket[i].label {
                n_accepted_err += 1;
            }
            preds.push(predicted);
            labels.push(bucket[i].label);
        }
        let metrics = prf(&preds, &labels)?;

        let mut n_rejected_counterfactual_err = 0;
        for &i in &all_rejected {
            let cf = model.classify_counterfactual(&bucket[i])?;
            if cf != Action::from_label(bucket[i].label) {
                n_rejected_counterfactual_err += 1;
            }
        }

        // (5) Labeling selection.
        let labeled_indices: Vec<usize> = if protocol.integrated_al {
            integrated.clone()
        } else if protocol.augmented_al {
            let budget = protocol.al_budget_for_iraal;
            let order = select_top_uncertain(
                &scored.ids_of(&integrated),
                &scored.scores_of(&integrated),
                budget,
            )?;
            let mut picked: Vec<usize> = order.iter().map(|&p| integrated[p]).collect();
            if picked.len() < budget {
                let top_up = select_top_uncertain(
                    &scored.ids_of(&accepted),
                    &scored.scores_of(&accepted),
                    budget - picked.len(),
                )?;
                picked.extend(top_up.into_iter().map(|p| accepted[p]));
            }
            picked
        } else if protocol.monthly_al_budget > 0 {
            select_top_uncertain(
                &scored.ids_of(&(0..bucket.len()).collect::<Vec<_>>()),
                &scored.uncertainties,
                protocol.monthly_al_budget,
            )?
        } else {
            Vec::new()
        };

        // (6) Release ground truth for the selected samples and refit.
        let n_al = labeled_indices.len();
        if n_al > 0 {
            let labeled: Vec<Sample> =
                labeled_indices.iter().map(|&i| bucket[i].clone()).collect();
            model.observe_labeled(&labeled);
            model.refit()?;
        }

        months.push(MonthRecord {
            month: *month,
            f1: metrics.map(|m| m.f1),
            precision: metrics.map(|m| m.precision),
            recall: metrics.map(|m| m.recall),
            n_rejected: all_rejected.len(),
            n_al,
            n_evaluated: accepted.len(),
            n_integrated_rejected: integrated.len(),
            n_rejected_counterfactual_err,
            n_accepted_err,
        });
    }

    let aut_f1 = aut_defined(&months.iter().map(|m| m.f1).collect::<Vec<_>>())?;
    Ok(EvalReport { months, aut_f1 })
}
