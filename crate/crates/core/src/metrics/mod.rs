//! Evaluation of run records: closed/open accuracies, open macro F1, ROC
//! analysis of the entropy score, and the Davies-Bouldin diagnostic.

pub mod aggregate;
pub mod rank;
pub mod roc;
pub mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::clustering::davies_bouldin;
use crate::domain::{Instance, Label};
use crate::error::{Error, Result};
use crate::framework::RunRecord;

pub use aggregate::{aggregate, ScoredRun, SummaryRow};
pub use rank::{average_ranks, spearman};
pub use roc::{roc_auc_youden, RocPoint, RocResult};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kc_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub uc_acc: Option<f64>,
    pub open_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auroc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub db_index: Option<f64>,
    /// Clusters that received no stream instance when computing `db_index`.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub db_empty_clusters: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chosen_threshold: Option<f64>,
    pub n_kc: usize,
    pub n_uc: usize,
}

/// Final `(true, predicted)` labels of a run.
///
/// With entropies and a threshold, `H >= threshold` predicts `Unknown`;
/// otherwise the logged closed-set prediction stands. Labels of consolidated
/// classes (ids at or beyond the warm-up known count) count as `Unknown`.
pub fn resolve_predictions(
    record: &RunRecord,
    threshold: Option<f64>,
) -> Result<Vec<(Label, Label)>> {
    if threshold.is_some() && !record.has_entropy() {
        return Err(Error::InvalidParameter(
            "a threshold needs a record with entropies".into(),
        ));
    }
    let fold = |l: Label| match l {
        Label::Known(c) if c >= record.n_known => Label::Unknown,
        other => other,
    };
    Ok(record
        .rows
        .iter()
        .map(|r| {
            let pred = match (r.entropy, threshold) {
                (Some(h), Some(th)) if h >= th => Label::Unknown,
                _ => fold(r.closed_pred),
            };
            (r.true_label, pred)
        })
        .collect())
}

/// Accuracy over true-known rows and over true-unknown rows; `None` when the
/// corresponding denominator is zero.
pub fn kc_uc_accuracy(pairs: &[(Label, Label)]) -> (Option<f64>, Option<f64>) {
    let (mut kc, mut kc_ok, mut uc, mut uc_ok) = (0usize, 0usize, 0usize, 0usize);
    for &(t, p) in pairs {
        if t.is_unknown() {
            uc += 1;
            uc_ok += usize::from(p.is_unknown());
        } else {
            kc += 1;
            kc_ok += usize::from(p == t);
        }
    }
    let rate = |ok: usize, n: usize| (n > 0).then(|| ok as f64 / n as f64);
    (rate(kc_ok, kc), rate(uc_ok, uc))
}

/// Macro F1 over the known classes only. Unknown rows count as false
/// positives/negatives for the known classes but never as true positives.
pub fn open_macro_f1(pairs: &[(Label, Label)], kc_classes: &[Label]) -> f64 {
    if kc_classes.is_empty() {
        return 0.0;
    }
    let total: f64 = kc_classes
        .iter()
        .map(|&k| {
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for &(t, p) in pairs {
                match (t == k, p == k) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fn_ += 1,
                    (false, false) => {}
                }
            }
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .sum();
    total / kc_classes.len() as f64
}

/// Scores one run. `stream` must be the instances the record was produced
/// from; it is only used for the Davies-Bouldin index of sosr runs.
pub fn evaluate(record: &RunRecord, stream: &[Instance]) -> Result<MetricsReport> {
    let n_uc = record
        .rows
        .iter()
        .filter(|r| r.true_label.is_unknown())
        .count();
    let n_kc = record.rows.len() - n_uc;
    let kc_classes: Vec<Label> = (0..record.n_known).map(Label::Known).collect();

    let mut auroc = None;
    let mut threshold = None;
    if record.has_entropy() {
        let scores: Vec<(f64, bool)> = record
            .rows
            .iter()
            .map(|r| (r.entropy.unwrap_or(0.0), r.true_label.is_unknown()))
            .collect();
        let roc = roc_auc_youden(&scores).ok();
        auroc = roc.as_ref().map(|r| r.auroc);
        threshold = record.config.gamma_h.or(roc.map(|r| r.best_threshold));
    }
    let pairs = resolve_predictions(record, threshold)?;
    let (kc_acc, uc_acc) = kc_uc_accuracy(&pairs);
    let open_f1 = open_macro_f1(&pairs, &kc_classes);

    let (db_index, db_empty_clusters) = match &record.final_clusters {
        Some(state) => {
            let points: Vec<&[f64]> = stream.iter().map(|i| i.features.as_slice()).collect();
            match davies_bouldin(state, &points) {
                Ok(db) => (Some(db.index), db.empty_clusters),
                Err(_) => (None, Vec::new()),
            }
        }
        None => (None, Vec::new()),
    };

    Ok(MetricsReport {
        kc_acc,
        uc_acc,
        open_f1,
        auroc,
        db_index,
        db_empty_clusters,
        chosen_threshold: threshold,
        n_kc,
        n_uc,
    })
}
