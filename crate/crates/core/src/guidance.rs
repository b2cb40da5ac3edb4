//! Guidance toward the nearest cluster of uninspected points.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inspection::{ChiefModel, PointMask};
use crate::seed;

pub const MAX_LLOYD_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub centers: Vec<Vector3<f64>>,
    /// `assignment[i]` is the center index of `points[i]`.
    pub assignment: Vec<usize>,
}

impl ClusterResult {
    /// Sum of squared distances from each point to its center.
    pub fn inertia(&self, points: &[Vector3<f64>]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| (p - self.centers[c]).norm_squared())
            .sum()
    }
}

/// How many clusters to form for a given number of uninspected points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub points_per_cluster: usize,
    pub max_clusters: usize,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            points_per_cluster: 10,
            max_clusters: 6,
        }
    }
}

impl GuidanceConfig {
    pub fn cluster_count(&self, uninspected: usize) -> usize {
        uninspected
            .div_ceil(self.points_per_cluster.max(1))
            .min(self.max_clusters.max(1))
            .min(uninspected)
    }
}

fn nearest(p: &Vector3<f64>, centers: &[Vector3<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Deterministic in `(points, k, seed)`. Stops when assignments stop
/// changing or after [`MAX_LLOYD_ITERATIONS`] rounds. A cluster that loses
/// all its points keeps its previous center.
pub fn kmeans(points: &[Vector3<f64>], k: usize, seed: u64) -> Result<ClusterResult> {
    if points.is_empty() {
        return Err(Error::domain("k-means needs at least one point"));
    }
    if k == 0 || k > points.len() {
        return Err(Error::domain(format!(
            "k = {k} must lie in 1..={}",
            points.len()
        )));
    }
    let mut rng = seed::episode_rng(seed);

    let mut centers = Vec::with_capacity(k);
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    centers.push(points[first]);
    chosen[first] = true;
    let mut d2: Vec<f64> = points.iter().map(|p| (p - points[first]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = None;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 {
                    idx = Some(i);
                    if target < *w {
                        break;
                    }
                    target -= w;
                }
            }
            idx.expect("positive total weight")
        } else {
            // all remaining points coincide with a center
            let free: Vec<usize> = (0..points.len()).filter(|i| !chosen[*i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centers.push(points[pick]);
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min((p - points[pick]).norm_squared());
        }
    }

    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = vec![Vector3::zeros(); k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a] += p;
            counts[a] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j] / counts[j] as f64;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(ClusterResult {
        centers,
        assignment,
    })
}

/// Unit vector from the deputy toward the nearest cluster center of the
/// uninspected surface points, or exactly zero when nothing is left.
pub fn guidance_vector(
    model: &ChiefModel,
    inspected: PointMask,
    deputy_pos: &Vector3<f64>,
    seed: u64,
    cfg: &GuidanceConfig,
) -> Vector3<f64> {
    let remaining: Vec<Vector3<f64>> = (0..model.len())
        .filter(|i| !inspected.contains(*i))
        .map(|i| model.surface_point(i))
        .collect();
    if remaining.is_empty() {
        return Vector3::zeros();
    }
    let k = cfg.cluster_count(remaining.len());
    let clusters = kmeans(&remaining, k, seed).expect("1 <= k <= |points|");
    let (best, _) = nearest(deputy_pos, &clusters.centers);
    let dir = clusters.centers[best] - deputy_pos;
    let norm = dir.norm();
    if norm > 0.0 {
        dir / norm
    } else {
        Vector3::zeros()
    }
}
