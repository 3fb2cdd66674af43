//! Grouping of per-run reports into mean ± std summaries, with paired
//! Wilcoxon tests of each single-classifier baseline against sosr.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::wilcoxon::wilcoxon_signed_rank;
use super::MetricsReport;
use crate::domain::Baseline;

pub const SIGNIFICANCE_ALPHA: f64 = 0.05;

/// One evaluated run, tagged with what it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRun {
    /// Aggregation group: a generator family, or a real dataset's name.
    pub group: String,
    pub dataset: String,
    pub beta: f64,
    pub baseline: Baseline,
    pub seed: u64,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        if values.iter().all(|v| *v == values[0]) {
            return Some(Self {
                mean: values[0],
                std: 0.0,
            });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Score {
    KcAcc,
    UcAcc,
    OpenF1,
    Auroc,
    DbIndex,
}

impl Score {
    pub fn of(self, r: &MetricsReport) -> Option<f64> {
        match self {
            Score::KcAcc => r.kc_acc,
            Score::UcAcc => r.uc_acc,
            Score::OpenF1 => Some(r.open_f1),
            Score::Auroc => r.auroc,
            Score::DbIndex => r.db_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub group: String,
    pub beta: f64,
    pub baseline: Baseline,
    pub n_runs: usize,
    pub kc_acc: Option<MeanStd>,
    pub uc_acc: Option<MeanStd>,
    pub open_f1: Option<MeanStd>,
    pub auroc: Option<MeanStd>,
    pub db_index: Option<MeanStd>,
    /// Whether this baseline differs significantly from sosr on the score;
    /// `None` for sosr itself or when the test cannot be run.
    pub kc_acc_sig: Option<bool>,
    pub uc_acc_sig: Option<bool>,
    pub open_f1_sig: Option<bool>,
}

type GroupKey = (String, u64, Baseline);

fn values(runs: &[&ScoredRun], score: Score) -> Vec<f64> {
    runs.iter().filter_map(|r| score.of(&r.report)).collect()
}

/// Paired test of `runs` against `reference`, pairing on (dataset, seed).
fn paired_flag(runs: &[&ScoredRun], reference: &[&ScoredRun], score: Score) -> Option<bool> {
    let by_key: BTreeMap<(&str, u64), f64> = reference
        .iter()
        .filter_map(|r| {
            score
                .of(&r.report)
                .map(|v| ((r.dataset.as_str(), r.seed), v))
        })
        .collect();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for r in runs {
        if let (Some(v), Some(&w)) = (
            score.of(&r.report),
            by_key.get(&(r.dataset.as_str(), r.seed)),
        ) {
            a.push(v);
            b.push(w);
        }
    }
    if a.is_empty() {
        return None;
    }
    wilcoxon_signed_rank(&a, &b, SIGNIFICANCE_ALPHA)
        .ok()
        .map(|t| t.significant)
}

/// Summarizes runs by `(group, beta, baseline)`, in that sort order.
pub fn aggregate(runs: &[ScoredRun]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<GroupKey, Vec<&ScoredRun>> = BTreeMap::new();
    for r in runs {
        groups
            .entry((r.group.clone(), r.beta.to_bits(), r.baseline))
            .or_default()
            .push(r);
    }
    let empty = Vec::new();
    groups
        .iter()
        .map(|((group, beta_bits, baseline), members)| {
            let sosr = groups
                .get(&(group.clone(), *beta_bits, Baseline::Sosr))
                .unwrap_or(&empty);
            let flag = |score| {
                (*baseline != Baseline::Sosr)
                    .then(|| paired_flag(members, sosr, score))
                    .flatten()
            };
            SummaryRow {
                group: group.clone(),
                beta: f64::from_bits(*beta_bits),
                baseline: *baseline,
                n_runs: members.len(),
                kc_acc: MeanStd::of(&values(members, Score::KcAcc)),
                uc_acc: MeanStd::of(&values(members, Score::UcAcc)),
                open_f1: MeanStd::of(&values(members, Score::OpenF1)),
                auroc: MeanStd::of(&values(members, Score::Auroc)),
                db_index: MeanStd::of(&values(members, Score::DbIndex)),
                kc_acc_sig: flag(Score::KcAcc),
                uc_acc_sig: flag(Score::UcAcc),
                open_f1_sig: flag(Score::OpenF1),
            }
        })
        .collect()
}
