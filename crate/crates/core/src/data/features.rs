//! Training-split feature selection and class-prevalence estimation.
//!
//! Both operations read only the training split — they run before any test
//! month is touched, and their outputs (the index map, the imbalance scale)
//! stay frozen for the rest of a run.

use crate::env::{Label, Sample};
use crate::error::{Error, Result};

/// A sparse projection from an original feature space onto the `k` selected
/// features, renumbered densely.
///
/// Renumbering preserves ascending index order, so applying the map to a
/// sorted feature list yields a sorted feature list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMap {
    /// `map[old] = Some(new)` for kept features.
    map: Vec<Option<u32>>,
    reduced_dim: usize,
}

impl FeatureMap {
    /// The identity map on a `dim`-wide space.
    pub fn identity(dim: usize) -> Self {
        FeatureMap {
            map: (0..dim).map(|i| Some(i as u32)).collect(),
            reduced_dim: dim,
        }
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced_dim
    }

    pub fn original_dim(&self) -> usize {
        self.map.len()
    }

    /// New index for an original feature, if it was kept.
    pub fn lookup(&self, old: u32) -> Option<u32> {
        self.map.get(old as usize).copied().flatten()
    }

    /// Project one sample: dropped features vanish, kept features are
    /// renumbered. Id, month, and label pass through untouched.
    pub fn apply(&self, sample: &Sample) -> Result<Sample> {
        let mut features = Vec::with_capacity(sample.features.len());
        for &f in &sample.features {
            let slot = self.map.get(f as usize).ok_or_else(|| {
                Error::DimensionMismatch(format!(
                    "feature index {f} outside the map's original dimension {}",
                    self.map.len()
                ))
            })?;
            if let Some(new) = slot {
                features.push(*new);
            }
        }
        Ok(Sample {
            id: sample.id.clone(),
            month: sample.month,
            label: sample.label,
            features,
        })
    }

    pub fn apply_all(&self, samples: &[Sample]) -> Result<Vec<Sample>> {
        samples.iter().map(|s| self.apply(s)).collect()
    }
}

/// Rank features by the smoothed class-conditional activation gap
/// `|(m_j+1)/(n_m+2) − (g_j+1)/(n_g+2)|` and keep the top `k`.
///
/// Ties rank by ascending feature index; kept features are renumbered in
/// ascending original order. `k = original_dim` yields the identity map.
pub fn select_features(train: &[Sample], original_dim: usize, k: usize) -> Result<FeatureMap> {
    if k == 0 {
        return Err(Error::Config("feature selection needs k >= 1".into()));
    }
    if k > original_dim {
        return Err(Error::Config(format!(
            "cannot select {k} features from a {original_dim}-wide space"
        )));
    }

    let mut malware_active = vec![0usize; original_dim];
    let mut goodware_active = vec![0usize; original_dim];
    let mut n_malware = 0usize;
    let mut n_goodware = 0usize;
    for s in train {
        let counts = match s.label {
            Label::Malware => {
                n_malware += 1;
                &mut malware_active
            }
            Label::Goodware => {
                n_goodware += 1;
                &mut goodware_active
            }
        };
        for &f in &s.features {
            let idx = f as usize;
            if idx >= original_dim {
                return Err(Error::DimensionMismatch(format!(
                    "feature index {f} outside the declared dimension {original_dim}"
                )));
            }
            counts[idx] += 1;
        }
    }

    let m_denom = (n_malware + 2) as f64;
    let g_denom = (n_goodware + 2) as f64;
    let mut ranked: Vec<(f64, usize)> = (0..original_dim)
        .map(|j| {
            let p_m = (malware_active[j] + 1) as f64 / m_denom;
            let p_g = (goodware_active[j] + 1) as f64 / g_denom;
            ((p_m - p_g).abs(), j)
        })
        .collect();
    // Descending score; ascending index on ties.
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut kept: Vec<usize> = ranked[..k].iter().map(|&(_, j)| j).collect();
    kept.sort_unstable();
    let mut map = vec![None; original_dim];
    for (new, old) in kept.into_iter().enumerate() {
        map[old] = Some(new as u32);
    }
    Ok(FeatureMap { map, reduced_dim: k })
}

/// Malware fraction of the training split — the imbalance scale used by the
/// classification reward. Errors when no malware is present, since the scale
/// would be unbounded.
pub fn estimate_sigma_hat(train: &[Sample]) -> Result<f64> {
    let malware = train.iter().filter(|s| s.label.is_malware()).count();
    if malware == 0 {
        return Err(Error::Config(
            "imbalance scale needs at least one malware training sample".into(),
        ));
    }
    Ok(malware as f64 / train.len() as f64)
}
