//! Spatial grouping of ground nodes with plain Lloyd K-means.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster id of each input point, by input index.
    pub assignments: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each iteration.
    pub wcss_history: Vec<f64>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == cluster).collect()
    }

    pub fn wcss(&self, points: &[[f64; 2]]) -> f64 {
        wcss(points, &self.assignments, &self.centroids)
    }
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn wcss(points: &[[f64; 2]], assignments: &[usize], centroids: &[[f64; 2]]) -> f64 {
    points.iter().zip(assignments).map(|(p, &c)| dist2(p, &centroids[c])).sum()
}

fn nearest(p: &[f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        // strict comparison keeps the lowest id on ties
        if dist2(p, centroid) < dist2(p, &centroids[best]) {
            best = c;
        }
    }
    best
}

fn means(points: &[[f64; 2]], assignments: &[usize], previous: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut sums = vec![[0.0, 0.0]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (p, &c) in points.iter().zip(assignments) {
        sums[c][0] += p[0];
        sums[c][1] += p[1];
        counts[c] += 1;
    }
    sums.iter()
        .zip(&counts)
        .zip(previous)
        .map(|((s, &n), prev)| if n == 0 { *prev } else { [s[0] / n as f64, s[1] / n as f64] })
        .collect()
}

/// Moves the farthest point into each empty cluster.
fn repair_empty(points: &[[f64; 2]], assignments: &mut [usize], centroids: &mut [[f64; 2]]) {
    loop {
        let mut counts = vec![0usize; centroids.len()];
        for &c in assignments.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else { return };
        let far = (0..points.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&a, &b| {
                dist2(&points[a], &centroids[assignments[a]])
                    .total_cmp(&dist2(&points[b], &centroids[assignments[b]]))
                    .then(b.cmp(&a))
            })
            .expect("more points than clusters");
        assignments[far] = empty;
        centroids[empty] = points[far];
    }
}

fn distinct_count(points: &[[f64; 2]]) -> usize {
    let mut keys: Vec<(u64, u64)> = points.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Independent restarts per call; the lowest final WCSS wins.
pub const RESTARTS: usize = 10;

/// Lloyd K-means from random data points, best of [`RESTARTS`] seeded runs.
pub fn kmeans(points: &[[f64; 2]], c: usize, seed: u64, max_iters: usize) -> Result<Clustering> {
    kmeans_with_restarts(points, c, seed, max_iters, RESTARTS)
}

pub fn kmeans_with_restarts(
    points: &[[f64; 2]],
    c: usize,
    seed: u64,
    max_iters: usize,
    restarts: usize,
) -> Result<Clustering> {
    let distinct = distinct_count(points);
    if c == 0 || c > distinct {
        return Err(Error::TooManyClusters { clusters: c, points: distinct });
    }
    let mut best: Option<Clustering> = None;
    for run in 0..restarts.max(1) {
        let k = lloyd(points, c, rng::derive(seed, &[0x4B4D, run as u64]), max_iters);
        // strict comparison keeps the earliest run on ties
        if best.as_ref().is_none_or(|b| k.wcss(points) < b.wcss(points)) {
            best = Some(k);
        }
    }
    Ok(best.expect("at least one run"))
}

/// One Lloyd run from `c` distinct data points drawn with `seed`.
fn lloyd(points: &[[f64; 2]], c: usize, seed: u64, max_iters: usize) -> Clustering {
    let mut r = rng::rng(seed);
    let mut centroids: Vec<[f64; 2]> = Vec::with_capacity(c);
    while centroids.len() < c {
        // redraw until the chosen points are pairwise distinct
        centroids = sample(&mut r, points.len(), c).into_iter().map(|i| points[i]).collect();
        if distinct_count(&centroids) < c {
            centroids.clear();
        }
    }

    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    repair_empty(points, &mut assignments, &mut centroids);
    centroids = means(points, &assignments, &centroids);
    let mut history = vec![wcss(points, &assignments, &centroids)];
    let mut iterations = 1;
    while iterations < max_iters {
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        repair_empty(points, &mut next, &mut centroids);
        let stable = next == assignments;
        assignments = next;
        centroids = means(points, &assignments, &centroids);
        history.push(wcss(points, &assignments, &centroids));
        iterations += 1;
        if stable {
            break;
        }
    }
    Clustering { assignments, centroids, iterations, wcss_history: history }
}
