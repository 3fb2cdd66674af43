//! ROC analysis of a novelty score where positives are unknown instances.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Instances with `score >= threshold` are predicted positive.
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    pub auroc: f64,
    /// Threshold maximizing Youden's J = TPR - FPR (lowest among ties).
    pub best_threshold: f64,
    pub best_j: f64,
    /// From the highest threshold (nothing positive) to the lowest
    /// (everything positive).
    pub curve: Vec<RocPoint>,
}

/// AUROC by the trapezoidal rule over every distinct score, plus the Youden
/// optimal threshold.
///
/// Candidate thresholds are one sentinel above the maximum, the midpoints
/// between consecutive distinct scores and one sentinel below the minimum.
/// The area is accumulated in integer counts, so it equals
/// `(concordant + tied / 2) / (n_pos * n_neg)` exactly.
pub fn roc_auc_youden(scores: &[(f64, bool)]) -> Result<RocResult> {
    if scores.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidParameter("NaN score".into()));
    }
    let n_pos = scores.iter().filter(|s| s.1).count() as u64;
    let n_neg = scores.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined(format!(
            "AUROC needs both classes ({n_pos} positives, {n_neg} negatives)"
        )));
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (pos_f, neg_f) = (n_pos as f64, n_neg as f64);
    let mut curve = vec![RocPoint {
        threshold: sorted[0].0 + 1.0,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, times n_pos * n_neg
    let mut area2: u128 = 0;
    let mut best_j_num: i128 = 0;
    let mut best_threshold = curve[0].threshold;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < sorted.len() && sorted[i].0 == v {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        let threshold = match sorted.get(i) {
            Some(&(next, _)) => {
                let mid = next + (v - next) / 2.0;
                if mid > next && mid <= v {
                    mid
                } else {
                    v
                }
            }
            None => v - 1.0,
        };
        curve.push(RocPoint {
            threshold,
            tpr: tp as f64 / pos_f,
            fpr: fp as f64 / neg_f,
        });
        // J * n_pos * n_neg, compared exactly; `>=` keeps the lower threshold
        let j_num = i128::from(tp) * i128::from(n_neg) - i128::from(fp) * i128::from(n_pos);
        if j_num >= best_j_num {
            best_j_num = j_num;
            best_threshold = threshold;
        }
    }
    let denom = 2 * u128::from(n_pos) * u128::from(n_neg);
    Ok(RocResult {
        auroc: area2 as f64 / denom as f64,
        best_threshold,
        best_j: best_j_num as f64 / (pos_f * neg_f),
        curve,
    })
}
