//! Rejection and labeling budget mechanics for the monthly loop.
//!
//! Selection is always the same primitive: take the top-`budget` samples by
//! uncertainty, breaking ties by sample id so runs are reproducible. The
//! protocol flags decide where those selections come from and what happens
//! to them — quarantine (rejection) or labeling (active learning).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-month budgets and flags for one evaluation run.
///
/// The three active-learning modes are mutually exclusive:
/// - a plain monthly budget (`monthly_al_budget > 0`) labels the most
///   uncertain samples of each bucket;
/// - `integrated_al` labels exactly the samples the agent itself rejected;
/// - `augmented_al` labels the rejected samples topped up (or truncated)
///   to `al_budget_for_iraal` using uncertainty order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Most-uncertain samples quarantined per month (0 disables).
    pub monthly_rejection_budget: usize,
    /// Most-uncertain samples labeled per month (0 disables).
    pub monthly_al_budget: usize,
    /// Honor the agent's own reject actions as quarantine decisions.
    pub integrated_rejection: bool,
    /// Label every integrated-rejected sample.
    pub integrated_al: bool,
    /// Label rejected samples topped up to a fixed budget.
    pub augmented_al: bool,
    /// The fixed budget for `augmented_al`.
    pub al_budget_for_iraal: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            monthly_rejection_budget: 0,
            monthly_al_budget: 0,
            integrated_rejection: false,
            integrated_al: false,
            augmented_al: false,
            al_budget_for_iraal: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let al_modes = usize::from(self.monthly_al_budget > 0)
            + usize::from(self.integrated_al)
            + usize::from(self.augmented_al);
        if al_modes > 1 {
            return Err(Error::Config(
                "active-learning modes are mutually exclusive: pick one of a monthly \
                 budget, integrated labeling, or augmented labeling"
                    .into(),
            ));
        }
        if (self.integrated_al || self.augmented_al) && !self.integrated_rejection {
            return Err(Error::Config(
                "labeling rejected samples requires integrated rejection".into(),
            ));
        }
        if self.augmented_al && self.al_budget_for_iraal == 0 {
            return Err(Error::Config(
                "augmented labeling needs a positive budget".into(),
            ));
        }
        Ok(())
    }
}

/// Indices of the `budget` most-uncertain entries, ties broken by ascending
/// id. Budgets beyond the candidate count select everything. Non-finite
/// uncertainties are a contract violation.
pub fn select_top_uncertain(
    ids: &[&str],
    uncertainties: &[f64],
    budget: usize,
) -> Result<Vec<usize>> {
    if ids.len() != uncertainties.len() {
        return Err(Error::Contract(format!(
            "selection needs matching lengths, got {} ids and {} scores",
            ids.len(),
            uncertainties.len()
        )));
    }
    if let Some(bad) = uncertainties.iter().find(|u| !u.is_finite()) {
        return Err(Error::Contract(format!(
            "uncertainty scores must be finite, got {bad}"
        )));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        uncertainties[b]
            .partial_cmp(&uncertainties[a])
            .expect("finiteness checked above")
            .then_with(|| ids[a].cmp(ids[b]))
    });
    order.truncate(budget);
    Ok(order)
}

/// Quarantine selection: the budget most-uncertain samples of a bucket.
pub fn monthly_reject(ids: &[&str], uncertainties: &[f64], budget: usize) -> Result<Vec<usize>> {
    select_top_uncertain(ids, uncertainties, budget)
}

/// Labeling selection: identical mechanics, different consumer.
pub fn monthly_al(ids: &[&str], uncertainties: &[f64], budget: usize) -> Result<Vec<usize>> {
    select_top_uncertain(ids, uncertainties, budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_zero_selects_nothing() {
        let ids = ["a", "b", "c"];
        assert!(monthly_reject(&ids, &[0.9, 0.1, 0.5], 0).unwrap().is_empty());
    }

    #[test]
    fn selects_by_uncertainty_descending() {
        let ids = ["a", "b", "c"];
        let picked = monthly_reject(&ids, &[0.9, 0.1, 0.5], 2).unwrap();
        assert_eq!(picked, vec![0, 2]);
    }

    #[test]
    fn budget_at_bucket_size_takes_everything() {
        let ids = ["a", "b", "c"];
        let picked = monthly_reject(&ids, &[0.9, 0.1, 0.5], 3).unwrap();
        assert_eq!(picked.len(), 3);
        let over = monthly_reject(&ids, &[0.9, 0.1, 0.5], 10).unwrap();
        assert_eq!(over.len(), 3);
    }

    #[test]
    fn ties_break_by_id_order() {
        let ids = ["zeta", "alpha", "mid"];
        let picked = select_top_uncertain(&ids, &[0.5, 0.5, 0.5], 2).unwrap();
        assert_eq!(picked, vec![1, 2], "alpha then mid on equal scores");
    }

    #[test]
    fn non_finite_scores_are_contract_errors() {
        let ids = ["a", "b"];
        assert!(matches!(
            select_top_uncertain(&ids, &[0.5, f64::NAN], 1),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            select_top_uncertain(&ids, &[0.5], 1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn al_mode_exclusivity_is_enforced() {
        assert!(ProtocolConfig::default().validate().is_ok());
        let ok = ProtocolConfig {
            integrated_rejection: true,
            augmented_al: true,
            al_budget_for_iraal: 400,
            ..ProtocolConfig::default()
        };
        assert!(ok.validate().is_ok());
        for bad in [
            ProtocolConfig {
                monthly_al_budget: 50,
                integrated_al: true,
                integrated_rejection: true,
                ..ProtocolConfig::default()
            },
            ProtocolConfig {
                integrated_al: true,
                ..ProtocolConfig::default()
            },
            ProtocolConfig {
                augmented_al: true,
                integrated_rejection: true,
                al_budget_for_iraal: 0,
                ..ProtocolConfig::default()
            },
            ProtocolConfig {
                integrated_al: true,
                augmented_al: true,
                integrated_rejection: true,
                al_budget_for_iraal: 10,
                ..ProtocolConfig::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
