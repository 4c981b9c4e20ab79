use nalgebra::{Matrix3, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KdTree, PerceptionError};
use crate::geometry::{PointCloud, RigidTransform, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Pairs farther apart than this (mm) are not matched.
    pub correspondence_cutoff: f64,
    /// Stop once the score improves by less than this (mm²).
    pub epsilon: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self { max_iterations: 50, correspondence_cutoff: 100.0, epsilon: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps the source cloud onto the target.
    pub transform: RigidTransform,
    /// Mean over source points of `min(d², cutoff²)` at the final pose (mm²).
    pub convergence_score: f64,
    /// Mean squared distance over matched pairs only (mm²).
    pub matched_mse: f64,
    pub matched_fraction: f64,
    pub iterations_run: usize,
    pub converged: bool,
    /// Score before the first iteration and after each one.
    pub score_trace: Vec<f64>,
}

struct Matching {
    pairs: Vec<(Vec3, Vec3)>,
    score: f64,
    matched_mse: f64,
}

fn match_points(source: &[Vec3], tree: &KdTree, pose: &RigidTransform, cutoff: f64) -> Matching {
    let c2 = cutoff * cutoff;
    let results: Vec<(Vec3, usize, f64)> = source
        .par_iter()
        .map(|p| {
            let q = pose.apply_point(p);
            let (i, d) = tree.nearest(&q);
            (q, i, d * d)
        })
        .collect();
    let mut pairs = Vec::with_capacity(results.len());
    let mut total = 0.0;
    let mut matched = 0.0;
    for (q, i, d2) in results {
        if d2 <= c2 {
            pairs.push((q, tree.points()[i]));
            matched += d2;
            total += d2;
        } else {
            total += c2;
        }
    }
    let n = pairs.len();
    Matching {
        score: if source.is_empty() { 0.0 } else { total / source.len() as f64 },
        matched_mse: if n > 0 { matched / n as f64 } else { f64::NAN },
        pairs,
    }
}

/// Least-squares rigid motion taking `pairs[i].0` to `pairs[i].1`.
///
/// Rotation from the SVD of the cross-covariance with a determinant guard
/// against reflections.
pub fn best_fit_transform(pairs: &[(Vec3, Vec3)]) -> RigidTransform {
    let n = pairs.len() as f64;
    let (ms, mt) = pairs.iter().fold((Vec3::zeros(), Vec3::zeros()), |(a, b), (s, t)| (a + s, b + t));
    let (ms, mt) = (ms / n, mt / n);
    let mut h = Matrix3::zeros();
    for (s, t) in pairs {
        h += (s - ms) * (t - mt).transpose();
    }
    let svd = SVD::new(h, true, true);
    let u = svd.u.expect("svd u");
    let v = svd.v_t.expect("svd v").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let rot = RigidTransform::from_matrix(&r, Vec3::zeros());
    RigidTransform::new(rot.rotation, mt - rot.rotation * ms)
}

/// Point-to-point ICP from the identity.
pub fn icp(source: &PointCloud, target: &PointCloud, params: &IcpParams) -> Result<IcpResult, PerceptionError> {
    if target.len() < 3 || source.len() < 3 {
        return Err(PerceptionError::TooFewPoints);
    }
    let tree = KdTree::new(&target.points);
    icp_with(&source.points, &tree, params, RigidTransform::identity())
}

/// ICP against a prebuilt target index, starting from `initial`.
///
/// The score is the truncated mean squared distance, which cannot increase
/// from one iteration to the next.
pub fn icp_with(
    source: &[Vec3],
    target: &KdTree,
    params: &IcpParams,
    initial: RigidTransform,
) -> Result<IcpResult, PerceptionError> {
    let mut pose = initial;
    let mut m = match_points(source, target, &pose, params.correspondence_cutoff);
    let mut trace = vec![m.score];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=params.max_iterations {
        if m.pairs.len() < 3 {
            return Err(PerceptionError::NoCorrespondences { iteration: it, matched: m.pairs.len() });
        }
        let step = best_fit_transform(&m.pairs);
        pose = step.compose(&pose);
        let prev = m.score;
        m = match_points(source, target, &pose, params.correspondence_cutoff);
        trace.push(m.score);
        iterations = it;
        if prev - m.score < params.epsilon {
            converged = true;
            break;
        }
    }
    let matched_fraction = m.pairs.len() as f64 / source.len().max(1) as f64;
    Ok(IcpResult {
        transform: pose,
        convergence_score: m.score,
        matched_mse: m.matched_mse,
        matched_fraction,
        iterations_run: iterations,
        converged,
        score_trace: trace,
    })
}

/// Truncated mean squared distance of `source` under `pose` against `target`.
pub fn alignment_score(source: &[Vec3], target: &KdTree, pose: &RigidTransform, cutoff: f64) -> f64 {
    match_points(source, target, pose, cutoff).score
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    X,
    Y,
    Z,
    Yaw,
}

impl SweepAxis {
    /// Offset applied to a cloud. Translations in mm, yaw in radians about a
    /// vertical axis through `pivot`.
    pub fn offset_transform(&self, offset: f64, pivot: &Vec3) -> RigidTransform {
        match self {
            SweepAxis::X => RigidTransform::from_translation(offset, 0.0, 0.0),
            SweepAxis::Y => RigidTransform::from_translation(0.0, offset, 0.0),
            SweepAxis::Z => RigidTransform::from_translation(0.0, 0.0, offset),
            SweepAxis::Yaw => RigidTransform::yaw_about(pivot, offset),
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "x" => Ok(Self::X),
            "y" => Ok(Self::Y),
            "z" => Ok(Self::Z),
            "yaw" => Ok(Self::Yaw),
            _ => Err(format!("unknown axis '{s}' (expected x, y, z or yaw)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub offset: f64,
    pub score: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Set when ICP failed at this offset; `score` is then the score of the offset pose.
    pub failure: Option<String>,
}

/// One ICP run per offset applied to the source. Offsets must be ascending.
pub fn robustness_sweep(
    source: &PointCloud,
    target: &PointCloud,
    axis: SweepAxis,
    offsets: &[f64],
    params: &IcpParams,
) -> Result<Vec<SweepEntry>, PerceptionError> {
    if offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(PerceptionError::InvalidParams("sweep offsets must be ascending".into()));
    }
    if target.len() < 3 || source.len() < 3 {
        return Err(PerceptionError::TooFewPoints);
    }
    let tree = KdTree::new(&target.points);
    let pivot = target.centroid().unwrap_or_default();
    let entries = offsets
        .par_iter()
        .map(|&offset| {
            let moved = axis.offset_transform(offset, &pivot).apply(source);
            match icp_with(&moved.points, &tree, params, RigidTransform::identity()) {
                Ok(r) => SweepEntry {
                    offset,
                    score: r.convergence_score,
                    converged: r.converged,
                    iterations: r.iterations_run,
                    failure: None,
                },
                Err(e) => SweepEntry {
                    offset,
                    score: alignment_score(&moved.points, &tree, &RigidTransform::identity(), params.correspondence_cutoff),
                    converged: false,
                    iterations: 0,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(entries)
}
