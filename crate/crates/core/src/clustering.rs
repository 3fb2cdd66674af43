//! Incremental k-means.
//!
//! Centroids are seeded once from the warm-up data (k-means++ followed by
//! Lloyd iterations) and afterwards move by a per-instance running mean: each
//! arriving point is absorbed by its nearest centroid only.

use std::collections::BTreeSet;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    centroids: Vec<Vec<f64>>,
    counts: Vec<u64>,
    dim: usize,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn nearest<C: AsRef<[f64]>>(centroids: &[C], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (m, c) in centroids.iter().enumerate() {
        let d = sq_dist(c.as_ref(), x);
        // strict: ties keep the lower index
        if d < best_d {
            best_d = d;
            best = m;
        }
    }
    best
}

impl ClusterState {
    /// Builds a state directly from centroids and counts.
    pub fn from_parts(centroids: Vec<Vec<f64>>, counts: Vec<u64>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one centroid is required".into(),
            ));
        }
        if centroids.len() != counts.len() {
            return Err(Error::InvalidParameter(format!(
                "{} centroids but {} counts",
                centroids.len(),
                counts.len()
            )));
        }
        let dim = centroids[0].len();
        for c in &centroids {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "non-finite centroid coordinate".into(),
                ));
            }
        }
        Ok(Self {
            centroids,
            counts,
            dim,
        })
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Seeds `k` clusters with k-means++ and refines them with Lloyd
    /// iterations until the largest centroid shift drops below `tol` or
    /// `max_iters` is reached. `counts` are the final cluster sizes, so each
    /// centroid is the exact mean of the points counted in it.
    pub fn warmup_init<P: AsRef<[f64]>>(
        points: &[P],
        k: usize,
        rng: &mut Rng,
        max_iters: usize,
        tol: f64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if points.len() < k {
            return Err(Error::DegenerateWarmup(format!(
                "{} points for {k} clusters",
                points.len()
            )));
        }
        let dim = points[0].as_ref().len();
        for p in points {
            if p.as_ref().len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.as_ref().len(),
                });
            }
        }
        let distinct: BTreeSet<Vec<u64>> = points
            .iter()
            .map(|p| p.as_ref().iter().map(|v| v.to_bits()).collect())
            .collect();
        if distinct.len() < k {
            return Err(Error::DegenerateWarmup(format!(
                "{} distinct points for {k} clusters",
                distinct.len()
            )));
        }

        let mut centroids = kmeans_plus_plus(points, k, rng);
        let mut assignment = vec![0usize; points.len()];
        let mut counts = vec![0u64; k];
        for _ in 0..max_iters.max(1) {
            for (a, p) in assignment.iter_mut().zip(points) {
                *a = nearest(&centroids, p.as_ref());
            }
            reseed_empty(points, &centroids, &mut assignment, k);

            let mut sums = vec![vec![0.0; dim]; k];
            counts.iter_mut().for_each(|c| *c = 0);
            for (&a, p) in assignment.iter().zip(points) {
                counts[a] += 1;
                for (s, v) in sums[a].iter_mut().zip(p.as_ref()) {
                    *s += v;
                }
            }
            let mut shift: f64 = 0.0;
            for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
                let next: Vec<f64> = s.into_iter().map(|v| v / n as f64).collect();
                shift = shift.max(dist(c, &next));
                *c = next;
            }
            if shift < tol {
                break;
            }
        }
        Ok(Self {
            centroids,
            counts,
            dim,
        })
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn assign(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x)
    }

    /// Absorbs `x` into its nearest cluster with a running-mean step and
    /// returns that cluster's index.
    pub fn update(&mut self, x: &[f64]) -> Result<usize> {
        self.check_dim(x)?;
        let m = self.assign(x);
        self.counts[m] += 1;
        let n = self.counts[m] as f64;
        for (c, v) in self.centroids[m].iter_mut().zip(x) {
            *c += (v - *c) / n;
        }
        Ok(m)
    }

    /// Appends a new cluster; used when an unknown class is consolidated.
    pub fn add_centroid(&mut self, centroid: Vec<f64>, count: u64) -> Result<usize> {
        self.check_dim(&centroid)?;
        self.centroids.push(centroid);
        self.counts.push(count.max(1));
        Ok(self.centroids.len() - 1)
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

fn kmeans_plus_plus<P: AsRef<[f64]>>(points: &[P], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first].as_ref().to_vec()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p.as_ref(), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            chosen = Some(i);
            if acc > target {
                break;
            }
        }
        // at least k distinct points exist, so some weight is positive
        let i = chosen.expect("positive D^2 mass");
        let c = points[i].as_ref().to_vec();
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(sq_dist(p.as_ref(), &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Moves the point farthest from its centroid into each empty cluster.
fn reseed_empty<P: AsRef<[f64]>>(
    points: &[P],
    centroids: &[Vec<f64>],
    assignment: &mut [usize],
    k: usize,
) {
    let mut sizes = vec![0usize; k];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    let mut moved = vec![false; points.len()];
    for m in 0..k {
        if sizes[m] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            let a = assignment[i];
            if moved[i] || sizes[a] < 2 {
                continue;
            }
            let d = sq_dist(p.as_ref(), &centroids[a]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        if let Some(i) = far {
            sizes[assignment[i]] -= 1;
            assignment[i] = m;
            sizes[m] = 1;
            moved[i] = true;
        }
    }
}

/// Davies-Bouldin index of a clustering evaluated on a set of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct DaviesBouldin {
    pub index: f64,
    /// Clusters that received no instance; they are left out of the average.
    pub empty_clusters: Vec<usize>,
}

/// `DB = (1/M) Σ_i max_{j≠i} (S_i + S_j) / d(c_i, c_j)` with `S_i` the mean
/// distance of the instances assigned to cluster `i` from its centroid.
pub fn davies_bouldin<P: AsRef<[f64]>>(
    state: &ClusterState,
    instances: &[P],
) -> Result<DaviesBouldin> {
    let m = state.n_clusters();
    if m < 2 {
        return Err(Error::Undefined(
            "Davies-Bouldin index needs at least 2 clusters".into(),
        ));
    }
    let mut spread = vec![0.0; m];
    let mut sizes = vec![0usize; m];
    for x in instances {
        let x = x.as_ref();
        state.check_dim(x)?;
        let a = state.assign(x);
        spread[a] += dist(x, &state.centroids[a]);
        sizes[a] += 1;
    }
    let empty_clusters: Vec<usize> = (0..m).filter(|&i| sizes[i] == 0).collect();
    let live: Vec<usize> = (0..m).filter(|&i| sizes[i] > 0).collect();
    if live.len() < 2 {
        return Err(Error::Undefined(format!(
            "only {} cluster(s) received instances",
            live.len()
        )));
    }
    for &i in &live {
        spread[i] /= sizes[i] as f64;
    }
    let mut total = 0.0;
    for &i in &live {
        let mut worst: f64 = 0.0;
        for &j in &live {
            if i == j {
                continue;
            }
            let sep = dist(&state.centroids[i], &state.centroids[j]);
            if sep == 0.0 {
                return Err(Error::Undefined(format!(
                    "clusters {i} and {j} share a centroid"
                )));
            }
            worst = worst.max((spread[i] + spread[j]) / sep);
        }
        total += worst;
    }
    Ok(DaviesBouldin {
        index: total / live.len() as f64,
        empty_clusters,
    })
}
