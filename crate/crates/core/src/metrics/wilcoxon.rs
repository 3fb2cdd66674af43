//! Two-sided Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are dropped and tied magnitudes share their average
//! rank. Up to [`EXACT_MAX_N`] nonzero pairs the null distribution of the
//! positive rank sum is computed exactly (a subset-sum count over doubled
//! ranks, which are integers even with ties); above that a normal
//! approximation with tie and continuity corrections is used.

use statrs::distribution::{ContinuousCDF, Normal};

use super::rank::average_ranks;
use crate::error::{Error, Result};

pub const EXACT_MAX_N: usize = 20;
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences `a - b`.
    pub w_plus: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Nonzero differences used.
    pub n: usize,
    pub exact: bool,
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alpha: f64) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::InvalidParameter("NaN in paired samples".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w_plus: 0.0,
            p_value: 1.0,
            significant: false,
            n: 0,
            exact: true,
        });
    }
    if n < MIN_PAIRS {
        return Err(Error::InsufficientData(format!(
            "{n} nonzero differences (need {MIN_PAIRS})"
        )));
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    let (p_value, exact) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, w_plus), true)
    } else {
        (normal_p(&ranks, w_plus), false)
    };
    Ok(WilcoxonResult {
        w_plus,
        p_value,
        significant: p_value < alpha,
        n,
        exact,
    })
}

fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    // counts[s] = number of sign patterns whose doubled positive sum is s
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(ranks.len() as i32);
    let w = (w_plus * 2.0).round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * std_normal.sf(z)).min(1.0)
}
