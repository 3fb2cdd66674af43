//! Label space, instances, datasets and run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// A class label as seen by the models: a dense known-class id, or the single
/// sentinel every unknown class collapses into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Known(usize),
    Unknown,
}

impl Label {
    pub fn is_unknown(self) -> bool {
        matches!(self, Label::Unknown)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Known(i) => write!(f, "{i}"),
            Label::Unknown => f.write_str("unknown"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unknown" => Ok(Label::Unknown),
            other => other
                .parse::<usize>()
                .map(Label::Known)
                .map_err(|_| Error::InvalidParameter(format!("not a label: {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: Label,
    /// Row of the source dataset.
    pub index: usize,
}

/// A labeled dataset before any known/unknown split. Labels are raw class ids
/// `Known(0..n_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub n_classes: usize,
    pub dim: usize,
    pub instances: Vec<Instance>,
}

impl Dataset {
    /// Builds a dataset and checks that dimensions and labels are consistent
    /// and every feature is finite.
    pub fn new(
        name: impl Into<String>,
        n_classes: usize,
        dim: usize,
        instances: Vec<Instance>,
    ) -> Result<Self> {
        for (row, inst) in instances.iter().enumerate() {
            if inst.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: inst.features.len(),
                });
            }
            if let Some(bad) = inst.features.iter().find(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: row + 1,
                    message: format!("non-finite feature value {bad}"),
                });
            }
            match inst.label {
                Label::Known(c) if c < n_classes => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "row {row}: label {other} outside 0..{n_classes}"
                    )))
                }
            }
        }
        Ok(Self {
            name: name.into(),
            n_classes,
            dim,
            instances,
        })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for inst in &self.instances {
            if let Label::Known(c) = inst.label {
                counts[c] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Warm-up only, then frozen.
    Static,
    /// Learns every verified label, registering `Unknown` as a class on first sight.
    Incremental,
    /// Clustering + entropy detector in front of the incremental classifier.
    Sosr,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Static, Baseline::Incremental, Baseline::Sosr];

    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::Static => "static",
            Baseline::Incremental => "incremental",
            Baseline::Sosr => "sosr",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(Baseline::Static),
            "incremental" => Ok(Baseline::Incremental),
            "sosr" => Ok(Baseline::Sosr),
            other => Err(Error::InvalidParameter(format!(
                "unknown baseline {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Missing-class ratio |UC| / (|KC| + |UC|).
    pub beta: f64,
    pub seed: u64,
    pub baseline: Baseline,
    pub learning_rate: f64,
    pub warmup_epochs: usize,
    /// Fixed detection threshold. `None` selects the Youden-optimal threshold
    /// after the run.
    pub gamma_h: Option<f64>,
    pub lloyd_max_iters: usize,
    pub lloyd_tol: f64,
}

impl ExperimentConfig {
    pub fn new(beta: f64, seed: u64, baseline: Baseline) -> Self {
        Self {
            beta,
            seed,
            baseline,
            learning_rate: 0.01,
            warmup_epochs: 1,
            gamma_h: None,
            lloyd_max_iters: 100,
            lloyd_tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be in (0,1), got {}",
                self.beta
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.warmup_epochs == 0 {
            return Err(Error::InvalidParameter(
                "warmup_epochs must be at least 1".into(),
            ));
        }
        if let Some(g) = self.gamma_h {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "gamma_h must be in (0,1], got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// Number of classes withheld as unknown: `max(1, floor(beta * n + 0.5))`.
pub fn n_unknown_classes(n_classes: usize, beta: f64) -> usize {
    ((beta * n_classes as f64 + 0.5).floor() as usize).max(1)
}

/// The split of raw class ids into known and unknown classes, with the dense
/// re-indexing of the known ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    pub kc_ids: Vec<usize>,
    pub uc_ids: Vec<usize>,
    to_dense: BTreeMap<usize, usize>,
}

impl LabelSpace {
    pub fn from_ids(mut kc_ids: Vec<usize>, mut uc_ids: Vec<usize>) -> Self {
        kc_ids.sort_unstable();
        uc_ids.sort_unstable();
        let to_dense = kc_ids
            .iter()
            .enumerate()
            .map(|(dense, &raw)| (raw, dense))
            .collect();
        Self {
            kc_ids,
            uc_ids,
            to_dense,
        }
    }

    pub fn n_known(&self) -> usize {
        self.kc_ids.len()
    }

    /// Maps a raw class id to the label the models see. Known classes are
    /// re-indexed densely in increasing raw-id order.
    pub fn map(&self, raw: usize) -> Label {
        match self.to_dense.get(&raw) {
            Some(&dense) => Label::Known(dense),
            None => Label::Unknown,
        }
    }

    pub fn is_known(&self, raw: usize) -> bool {
        self.to_dense.contains_key(&raw)
    }
}

/// Draws the unknown classes uniformly without replacement.
pub fn label_space_partition(n_classes: usize, beta: f64, rng: &mut Rng) -> Result<LabelSpace> {
    if n_classes < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 classes, got {n_classes}"
        )));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be in (0,1), got {beta}"
        )));
    }
    let n_uc = n_unknown_classes(n_classes, beta);
    let n_kc = n_classes.saturating_sub(n_uc);
    if n_kc < 2 {
        return Err(Error::InfeasibleBeta {
            beta,
            n_classes,
            n_known: n_kc,
        });
    }
    let uc_ids: Vec<usize> = index::sample(rng, n_classes, n_uc).into_vec();
    let kc_ids = (0..n_classes).filter(|c| !uc_ids.contains(c)).collect();
    Ok(LabelSpace::from_ids(kc_ids, uc_ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use std::collections::BTreeSet;

    #[test]
    fn partition_sizes() {
        let mut rng = seed::rng(1);
        let ls = label_space_partition(10, 0.2, &mut rng).unwrap();
        assert_eq!((ls.uc_ids.len(), ls.kc_ids.len()), (2, 8));
        let ls = label_space_partition(6, 0.5, &mut rng).unwrap();
        assert_eq!((ls.uc_ids.len(), ls.kc_ids.len()), (3, 3));
        let ls = label_space_partition(5, 0.1, &mut rng).unwrap();
        assert_eq!((ls.uc_ids.len(), ls.kc_ids.len()), (1, 4));
    }

    #[test]
    fn partition_rejects_too_few_known() {
        let mut rng = seed::rng(1);
        // 5 classes at 0.75: floor(3.75 + 0.5) = 4 unknown, 1 known.
        assert!(matches!(
            label_space_partition(5, 0.75, &mut rng),
            Err(Error::InfeasibleBeta { n_known: 1, .. })
        ));
        assert!(label_space_partition(2, 0.4, &mut rng).is_err());
        assert!(label_space_partition(10, 0.0, &mut rng).is_err());
        assert!(label_space_partition(10, 1.0, &mut rng).is_err());
    }

    #[test]
    fn partition_is_deterministic_and_disjoint() {
        for s in 0..20 {
            let a = label_space_partition(12, 0.4, &mut seed::rng(s)).unwrap();
            let b = label_space_partition(12, 0.4, &mut seed::rng(s)).unwrap();
            assert_eq!(a, b);
            let kc: BTreeSet<_> = a.kc_ids.iter().copied().collect();
            let uc: BTreeSet<_> = a.uc_ids.iter().copied().collect();
            assert!(kc.is_disjoint(&uc));
            assert_eq!(kc.union(&uc).count(), 12);
        }
    }

    #[test]
    fn relabel_is_dense_bijection_on_known() {
        let ls = LabelSpace::from_ids(vec![7, 2, 4], vec![0, 9]);
        assert_eq!(ls.map(2), Label::Known(0));
        assert_eq!(ls.map(4), Label::Known(1));
        assert_eq!(ls.map(7), Label::Known(2));
        assert_eq!(ls.map(0), Label::Unknown);
        assert_eq!(ls.map(9), Label::Unknown);
    }

    #[test]
    fn label_text_round_trip() {
        for l in [Label::Known(0), Label::Known(17), Label::Unknown] {
            assert_eq!(l.to_string().parse::<Label>().unwrap(), l);
        }
        assert!("x".parse::<Label>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(0.2, 0, Baseline::Sosr);
        assert!(c.validate().is_ok());
        c.gamma_h = Some(0.0);
        assert!(c.validate().is_err());
        c.gamma_h = Some(1.0);
        assert!(c.validate().is_ok());
        c.learning_rate = -1.0;
        assert!(c.validate().is_err());
    }
}
