//! Entropy-based unknown detection against the current centroids.
//!
//! Each centroid gets a weight `1 / d(x, c)^2`; normalized, the weights form a
//! pseudo-probability over clusters. Its Shannon entropy in base `M` (the
//! number of clusters) lies in `[0, 1]`: close to 0 when `x` sits on one
//! centroid, close to 1 when all centroids look alike from `x`.

use crate::clustering::{sq_dist, ClusterState};
use crate::error::{Error, Result};

/// Distances below this count as coinciding with a centroid.
pub const COINCIDENCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyScore {
    pub pseudo_probs: Vec<f64>,
    pub entropy: f64,
}

/// Inverse-square-distance affinities, normalized to sum to one.
///
/// When `x` coincides with one or more centroids the mass is split uniformly
/// over those centroids.
pub fn pseudo_probabilities(x: &[f64], state: &ClusterState) -> Result<Vec<f64>> {
    state.check_dim(x)?;
    affinities(x, state.centroids())
}

pub(crate) fn affinities(x: &[f64], centroids: &[Vec<f64>]) -> Result<Vec<f64>> {
    if centroids.is_empty() {
        return Err(Error::Undefined(
            "pseudo-probabilities need at least one centroid".into(),
        ));
    }
    let d2: Vec<f64> = centroids.iter().map(|c| sq_dist(x, c)).collect();
    let eps2 = COINCIDENCE_EPS * COINCIDENCE_EPS;
    let hits = d2.iter().filter(|&&d| d < eps2).count();
    if hits > 0 {
        let share = 1.0 / hits as f64;
        return Ok(d2
            .iter()
            .map(|&d| if d < eps2 { share } else { 0.0 })
            .collect());
    }
    // Scaled by the smallest squared distance: weights in (0, 1], no overflow.
    let dmin = d2.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = d2.iter().map(|&d| dmin / d).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Base-`m` Shannon entropy of `p`, with `0 log 0 = 0`, clamped to `[0, 1]`.
pub fn entropy(p: &[f64], m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Undefined(format!("base-{m} entropy is undefined")));
    }
    if p.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: p.len(),
        });
    }
    let ln_m = (m as f64).ln();
    let h: f64 = p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln() / ln_m)
        .sum();
    Ok(h.clamp(0.0, 1.0))
}

pub fn score(x: &[f64], state: &ClusterState) -> Result<NoveltyScore> {
    let pseudo_probs = pseudo_probabilities(x, state)?;
    let entropy = entropy(&pseudo_probs, state.n_clusters())?;
    Ok(NoveltyScore {
        pseudo_probs,
        entropy,
    })
}

/// `H >= gamma_h` is unknown; the known branch is the strict `H < gamma_h`.
pub fn is_unknown(h: f64, gamma_h: f64) -> bool {
    h >= gamma_h
}
