//! Surface-normal estimation and the Difference-of-Normals filter.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KdTree, PerceptionError};
use crate::geometry::{PointCloud, Vec3};

/// Minimum neighbourhood size (the query point included) for a normal.
pub const MIN_NEIGHBORS: usize = 3;

/// Unit normals, `None` where the neighbourhood is too small.
#[derive(Debug, Clone)]
pub struct NormalField {
    pub normals: Vec<Option<Vec3>>,
}

impl NormalField {
    pub fn degenerate_count(&self) -> usize {
        self.normals.iter().filter(|n| n.is_none()).count()
    }

    /// The cloud restricted to points with a normal, normals attached.
    pub fn into_cloud(&self, cloud: &PointCloud) -> PointCloud {
        let idx: Vec<usize> = (0..cloud.len()).filter(|&i| self.normals[i].is_some()).collect();
        PointCloud {
            points: idx.iter().map(|&i| cloud.points[i]).collect(),
            normals: Some(idx.iter().map(|&i| self.normals[i].unwrap()).collect()),
        }
    }
}

fn normal_at(tree: &KdTree, p: &Vec3, radius: f64, viewpoint: &Vec3) -> Option<Vec3> {
    let pts = tree.points();
    let mut n = 0usize;
    let mut sum = Vec3::zeros();
    let mut outer = Matrix3::zeros();
    // Accumulate relative to p to keep the covariance well conditioned.
    tree.for_each_within(p, radius, |i, _| {
        let d = pts[i] - p;
        n += 1;
        sum += d;
        outer += d * d.transpose();
    });
    if n < MIN_NEIGHBORS {
        return None;
    }
    let mean = sum / n as f64;
    let cov = outer / n as f64 - mean * mean.transpose();
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let mut normal: Vec3 = eig.eigenvectors.column(k).into_owned();
    let norm = normal.norm();
    if !(norm > 0.0) {
        return None;
    }
    normal /= norm;
    if normal.dot(&(viewpoint - p)) < 0.0 {
        normal = -normal;
    }
    Some(normal)
}

/// Normal at each point from the smallest-eigenvalue eigenvector of its
/// neighbourhood covariance, flipped to face `viewpoint`.
pub fn estimate_normals(cloud: &PointCloud, radius: f64, viewpoint: &Vec3) -> NormalField {
    let tree = KdTree::new(&cloud.points);
    estimate_normals_with(&tree, radius, viewpoint)
}

pub fn estimate_normals_with(tree: &KdTree, radius: f64, viewpoint: &Vec3) -> NormalField {
    assert!(radius > 0.0, "support radius must be positive");
    let normals = tree.points().par_iter().map(|p| normal_at(tree, p, radius, viewpoint)).collect();
    NormalField { normals }
}

/// Support radii (mm) and magnitude threshold of the Difference-of-Normals filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DonParams {
    pub r1: f64,
    pub r2: f64,
    pub threshold: f64,
    /// Exterior point normals are oriented toward.
    #[serde(default = "default_viewpoint")]
    pub viewpoint: Vec3,
}

fn default_viewpoint() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0e6)
}

impl Default for DonParams {
    fn default() -> Self {
        Self { r1: 5.0, r2: 50.0, threshold: 0.1, viewpoint: default_viewpoint() }
    }
}

impl DonParams {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(self.r1 > 0.0 && self.r1 < self.r2) {
            return Err(PerceptionError::InvalidParams(format!("need 0 < r1 < r2, got r1={} r2={}", self.r1, self.r2)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(PerceptionError::InvalidParams(format!("threshold {} outside [0,1]", self.threshold)));
        }
        Ok(())
    }
}

/// Filter output: the kept points plus per-input-point magnitudes.
#[derive(Debug, Clone)]
pub struct DonResult {
    pub cloud: PointCloud,
    pub kept: Vec<usize>,
    /// `‖Δn̂‖` per input point; `None` when either normal was degenerate.
    pub magnitudes: Vec<Option<f64>>,
    pub degenerate: usize,
}

/// `Δn̂ = (n̂(p, r1) − n̂(p, r2)) / 2` with the two normals sign-aligned first.
pub fn don_vector(n_small: &Vec3, n_large: &Vec3) -> Vec3 {
    let large = if n_small.dot(n_large) < 0.0 { -n_large } else { *n_large };
    (n_small - large) / 2.0
}

/// Keeps points whose `‖Δn̂‖` does not exceed the threshold; degenerate points are dropped.
pub fn don_filter(cloud: &PointCloud, params: &DonParams) -> Result<DonResult, PerceptionError> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(PerceptionError::EmptyCloud);
    }
    let tree = KdTree::new(&cloud.points);
    let small = estimate_normals_with(&tree, params.r1, &params.viewpoint);
    let large = estimate_normals_with(&tree, params.r2, &params.viewpoint);
    let magnitudes: Vec<Option<f64>> = small
        .normals
        .iter()
        .zip(&large.normals)
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Some(don_vector(a, b).norm()),
            _ => None,
        })
        .collect();
    let degenerate = magnitudes.iter().filter(|m| m.is_none()).count();
    let kept: Vec<usize> = magnitudes
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_some_and(|m| m <= params.threshold))
        .map(|(i, _)| i)
        .collect();
    let mut out = cloud.select(&kept);
    out.normals = Some(kept.iter().map(|&i| small.normals[i].unwrap()).collect());
    Ok(DonResult { cloud: out, kept, magnitudes, degenerate })
}
