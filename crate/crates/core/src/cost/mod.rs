//! Path-quality measures: TCP position and orientation divergence from a
//! goal pose, and the discretised integral of a configuration cost along a path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{euler_from_quaternion, RigidTransform, UnitQuaternion, Vec3};
use crate::kinematics::{JointConfig, KinematicChain};

/// Target TCP position (mm) and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub position: Vec3,
    pub orientation: UnitQuaternion,
}

impl GoalSpec {
    pub fn from_pose(pose: &RigidTransform) -> Self {
        Self { position: pose.translation, orientation: pose.rotation }
    }

    pub fn pose(&self) -> RigidTransform {
        RigidTransform::new(self.orientation, self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationMetric {
    /// `min(‖q − q_t‖, ‖q + q_t‖)` on quaternion 4-vectors.
    #[default]
    Quaternion,
    /// Norm of the difference of ZYX Euler angles, each wrapped to `(−π, π]`.
    Euler,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("path has no waypoints")]
    EmptyPath,
    #[error("number of subdivisions must be at least 1")]
    ZeroSubdivisions,
}

/// Distance between rotations as quaternion 4-vectors, taken over the sign ambiguity. In `[0, √2]`.
pub fn quaternion_distance(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let (a, b) = (a.as_ref().coords, b.as_ref().coords);
    (a - b).norm().min((a + b).norm())
}

fn wrap(angle: f64) -> f64 {
    let w = angle.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

pub fn euler_distance(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let (ea, eb) = (euler_from_quaternion(a).angles, euler_from_quaternion(b).angles);
    (ea - eb).map(wrap).norm()
}

/// TCP distance to the goal position, mm.
pub fn c_pos(chain: &KinematicChain, q: &JointConfig, goal: &GoalSpec) -> f64 {
    (chain.fk(q).translation - goal.position).norm()
}

/// TCP orientation divergence from the goal (quaternion metric).
pub fn c_orient(chain: &KinematicChain, q: &JointConfig, goal: &GoalSpec) -> f64 {
    quaternion_distance(&chain.fk(q).rotation, &goal.orientation)
}

pub fn c_orient_with(chain: &KinematicChain, q: &JointConfig, goal: &GoalSpec, metric: OrientationMetric) -> f64 {
    let r = chain.fk(q).rotation;
    match metric {
        OrientationMetric::Quaternion => quaternion_distance(&r, &goal.orientation),
        OrientationMetric::Euler => euler_distance(&r, &goal.orientation),
    }
}

/// Joint-space arc length (rad).
pub fn path_length(path: &[JointConfig]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Configurations at arc-length fractions `k/n`, `k = 1..=n`, by piecewise-linear interpolation.
pub fn arc_length_samples(path: &[JointConfig], n: usize) -> Result<Vec<JointConfig>, CostError> {
    if path.is_empty() {
        return Err(CostError::EmptyPath);
    }
    if n == 0 {
        return Err(CostError::ZeroSubdivisions);
    }
    let lengths: Vec<f64> = path.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = lengths.iter().sum();
    let last = *path.last().unwrap();
    if total == 0.0 {
        return Ok(vec![last; n]);
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    let mut start = 0.0;
    for k in 1..=n {
        if k == n {
            out.push(last);
            break;
        }
        let s = total * k as f64 / n as f64;
        while seg < lengths.len() - 1 && start + lengths[seg] < s {
            start += lengths[seg];
            seg += 1;
        }
        let t = if lengths[seg] > 0.0 { ((s - start) / lengths[seg]).clamp(0.0, 1.0) } else { 0.0 };
        out.push(path[seg] + (path[seg + 1] - path[seg]) * t);
    }
    Ok(out)
}

/// `(L / n) · Σ_{k=1..n} c(π(k/n))` with `L` the joint-space length; zero for a zero-length path.
pub fn integral_cost(path: &[JointConfig], n: usize, c: impl Fn(&JointConfig) -> f64) -> Result<f64, CostError> {
    let samples = arc_length_samples(path, n)?;
    let length = path_length(path);
    if length == 0.0 {
        return Ok(0.0);
    }
    Ok(length / n as f64 * samples.iter().map(c).sum::<f64>())
}

/// One arc-length sample of a cost trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostSample {
    /// Normalised path parameter `k/n`.
    pub s: f64,
    pub c_pos: f64,
    pub c_orient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    /// `(c_pos, c_orient)` at each waypoint.
    pub waypoints: Vec<(f64, f64)>,
    pub samples: Vec<CostSample>,
    pub length: f64,
    pub n: usize,
    pub ic_pos: f64,
    pub ic_orient: f64,
}

pub fn evaluate_path(chain: &KinematicChain, path: &[JointConfig], goal: &GoalSpec, n: usize) -> Result<CostReport, CostError> {
    evaluate_path_with(chain, path, goal, n, OrientationMetric::Quaternion)
}

pub fn evaluate_path_with(
    chain: &KinematicChain,
    path: &[JointConfig],
    goal: &GoalSpec,
    n: usize,
    metric: OrientationMetric,
) -> Result<CostReport, CostError> {
    let cp = |q: &JointConfig| c_pos(chain, q, goal);
    let co = |q: &JointConfig| c_orient_with(chain, q, goal, metric);
    let ic_pos = integral_cost(path, n, cp)?;
    let ic_orient = integral_cost(path, n, co)?;
    let samples = arc_length_samples(path, n)?
        .iter()
        .enumerate()
        .map(|(k, q)| CostSample { s: (k + 1) as f64 / n as f64, c_pos: cp(q), c_orient: co(q) })
        .collect();
    Ok(CostReport {
        waypoints: path.iter().map(|q| (cp(q), co(q))).collect(),
        samples,
        length: path_length(path),
        n,
        ic_pos,
        ic_orient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn q(v: [f64; 6]) -> JointConfig {
        JointConfig::from_column_slice(&v)
    }

    #[test]
    fn position_cost_is_axis_distance() {
        let j = |d| crate::kinematics::DhJoint { a: 0.0, alpha: 0.0, d, theta_offset: 0.0, lo: -1.0, hi: 1.0 };
        let chain = KinematicChain::new([j(0.0); 6], RigidTransform::from_translation(100.0, 0.0, 0.0)).unwrap();
        let goal = GoalSpec { position: Vec3::zeros(), orientation: UnitQuaternion::identity() };
        assert_eq!(c_pos(&chain, &JointConfig::zeros(), &goal), 100.0);
        assert_eq!(c_orient(&chain, &JointConfig::zeros(), &goal), 0.0);
    }

    #[test]
    fn orientation_extremes() {
        let a = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 0.4);
        let neg = UnitQuaternion::new_unchecked(-a.into_inner());
        assert_eq!(quaternion_distance(&a, &neg), 0.0);
        // 180° apart about the same axis: orthogonal 4-vectors.
        let b = a * UnitQuaternion::from_axis_angle(&Vec3::z_axis(), std::f64::consts::PI);
        assert_relative_eq!(quaternion_distance(&a, &b), 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(euler_distance(&a, &a), 0.0);
    }

    #[test]
    fn single_subdivision_uses_endpoint() {
        let path = [q([0.0; 6]), q([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]), q([1.0, 2.0, 0.0, 0.0, 0.0, 0.0])];
        let ic = integral_cost(&path, 1, |c| c[1] + 1.0).unwrap();
        assert_eq!(ic, 3.0 * 3.0);
    }

    #[test]
    fn zero_length_and_errors() {
        let p = [q([0.5; 6]), q([0.5; 6])];
        assert_eq!(integral_cost(&p, 10, |_| 7.0).unwrap(), 0.0);
        assert_eq!(integral_cost(&[], 10, |_| 7.0), Err(CostError::EmptyPath));
        assert_eq!(integral_cost(&p, 0, |_| 7.0), Err(CostError::ZeroSubdivisions));
    }

    #[test]
    fn trivial_path_at_goal_costs_nothing() {
        let chain = KinematicChain::industrial_6dof();
        let home = JointConfig::zeros();
        let goal = GoalSpec::from_pose(&chain.fk(&home));
        let r = evaluate_path(&chain, &[home], &goal, 100).unwrap();
        assert_eq!((r.ic_pos, r.ic_orient), (0.0, 0.0));
        assert_eq!(r.samples.len(), 100);
    }

    fn cfg() -> impl Strategy<Value = JointConfig> {
        proptest::array::uniform6(-2.0..2.0f64).prop_map(|a| JointConfig::from_column_slice(&a))
    }

    proptest! {
        #[test]
        fn collinear_waypoint_does_not_change_integral(a in cfg(), b in cfg(), t in 0.05..0.95f64, n in 1usize..200) {
            let c = |x: &JointConfig| x.iter().map(|v| v.sin()).sum::<f64>() + 10.0;
            let direct = integral_cost(&[a, b], n, c).unwrap();
            let split = integral_cost(&[a, a + (b - a) * t, b], n, c).unwrap();
            prop_assert!((direct - split).abs() <= 1e-9 * direct.abs().max(1.0));
        }

        #[test]
        fn integral_is_linear_in_cost(a in cfg(), b in cfg(), alpha in 0.0..50.0f64) {
            let c = |x: &JointConfig| x.norm();
            let base = integral_cost(&[a, b], 37, c).unwrap();
            let scaled = integral_cost(&[a, b], 37, |x| alpha * c(x)).unwrap();
            prop_assert!((scaled - alpha * base).abs() <= 1e-9 * (alpha * base).abs().max(1.0));
        }
    }
}
