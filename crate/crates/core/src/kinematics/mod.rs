//! Forward and inverse kinematics of a 6-joint revolute chain with a tool offset.
//!
//! Joint frames follow the standard Denavit–Hartenberg convention: frame `i`
//! is frame `i-1` moved by `Rz(θ) Tz(d) Tx(a) Rx(α)` with `θ = q_i + θ_offset`.

use nalgebra::{Matrix6, SMatrix, SVector, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RigidTransform, UnitQuaternion, Vec3};

pub const DOF: usize = 6;

/// Joint angles in radians.
pub type JointConfig = SVector<f64, DOF>;
pub type Jacobian = Matrix6<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhJoint {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
    pub lo: f64,
    pub hi: f64,
}

impl DhJoint {
    /// Frame `i` relative to frame `i-1` at joint angle `q`.
    pub fn transform(&self, q: f64) -> RigidTransform {
        let theta = q + self.theta_offset;
        let (s, c) = theta.sin_cos();
        let rotation = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), theta)
            * UnitQuaternion::from_axis_angle(&Vec3::x_axis(), self.alpha);
        RigidTransform::new(rotation, Vec3::new(self.a * c, self.a * s, self.d))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("joint {joint}: lower limit {lo} is not below upper limit {hi}")]
    BadLimits { joint: usize, lo: f64, hi: f64 },
    #[error("joint {0}: non-finite parameter")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicChain {
    pub joints: [DhJoint; DOF],
    /// Flange to torch tip.
    pub tool: RigidTransform,
}

impl KinematicChain {
    pub fn new(joints: [DhJoint; DOF], tool: RigidTransform) -> Result<Self, ChainError> {
        for (i, j) in joints.iter().enumerate() {
            if ![j.a, j.alpha, j.d, j.theta_offset, j.lo, j.hi].iter().all(|v| v.is_finite()) {
                return Err(ChainError::NonFinite(i + 1));
            }
            if j.lo >= j.hi {
                return Err(ChainError::BadLimits { joint: i + 1, lo: j.lo, hi: j.hi });
            }
        }
        Ok(Self { joints, tool })
    }

    /// A six-axis industrial arm of roughly 1.5 m reach carrying a 250 mm welding torch.
    ///
    /// | joint | a (mm) | α (°) | d (mm) | θ offset (°) | limits (°) |
    /// |---|---|---|---|---|---|
    /// | 1 | 150 | −90 | 445 | 0 | ±170 |
    /// | 2 | 700 | 0 | 0 | −90 | −95 … 155 |
    /// | 3 | 115 | −90 | 0 | 0 | −180 … 75 |
    /// | 4 | 0 | 90 | 795 | 0 | ±180 |
    /// | 5 | 0 | −90 | 0 | 0 | ±120 |
    /// | 6 | 0 | 0 | 85 | 0 | ±180 |
    ///
    /// The torch tip sits 250 mm along the flange `z` axis.
    pub fn industrial_6dof() -> Self {
        let deg = f64::to_radians;
        let j = |a: f64, alpha: f64, d: f64, off: f64, lo: f64, hi: f64| DhJoint {
            a,
            alpha: deg(alpha),
            d,
            theta_offset: deg(off),
            lo: deg(lo),
            hi: deg(hi),
        };
        Self::new(
            [
                j(150.0, -90.0, 445.0, 0.0, -170.0, 170.0),
                j(700.0, 0.0, 0.0, -90.0, -95.0, 155.0),
                j(115.0, -90.0, 0.0, 0.0, -180.0, 75.0),
                j(0.0, 90.0, 795.0, 0.0, -180.0, 180.0),
                j(0.0, -90.0, 0.0, 0.0, -120.0, 120.0),
                j(0.0, 0.0, 85.0, 0.0, -180.0, 180.0),
            ],
            RigidTransform::from_translation(0.0, 0.0, 250.0),
        )
        .expect("fixture chain is valid")
    }

    pub fn lower(&self) -> JointConfig {
        JointConfig::from_fn(|i, _| self.joints[i].lo)
    }

    pub fn upper(&self) -> JointConfig {
        JointConfig::from_fn(|i, _| self.joints[i].hi)
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        q.iter().zip(&self.joints).all(|(v, j)| *v >= j.lo && *v <= j.hi)
    }

    pub fn clamp(&self, q: &JointConfig) -> JointConfig {
        JointConfig::from_fn(|i, _| q[i].clamp(self.joints[i].lo, self.joints[i].hi))
    }

    /// Base frame followed by frames 1..=6 (frame 6 is the flange).
    pub fn link_frames(&self, q: &JointConfig) -> [RigidTransform; DOF + 1] {
        let mut frames = [RigidTransform::identity(); DOF + 1];
        for i in 0..DOF {
            frames[i + 1] = frames[i].compose(&self.joints[i].transform(q[i]));
        }
        frames
    }

    /// Base to torch tip.
    pub fn fk(&self, q: &JointConfig) -> RigidTransform {
        self.link_frames(q)[DOF].compose(&self.tool)
    }

    /// Geometric Jacobian at the torch tip: rows are linear (mm/rad) then angular (rad/rad) velocity.
    pub fn jacobian(&self, q: &JointConfig) -> Jacobian {
        let frames = self.link_frames(q);
        let tip = frames[DOF].compose(&self.tool).translation;
        let mut jac = Jacobian::zeros();
        for i in 0..DOF {
            let z = frames[i].apply_vector(&Vec3::z());
            let lin = z.cross(&(tip - frames[i].translation));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
        }
        jac
    }
}

/// Six-vector `[Δp; ω]` taking `current` to `target`: translation difference
/// and the scaled axis-angle of `R_target · R_currentᵀ`.
pub fn pose_error(current: &RigidTransform, target: &RigidTransform) -> Vector6<f64> {
    let dp = target.translation - current.translation;
    let dr = (target.rotation * current.rotation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IkMethod {
    PseudoInverse,
    DampedLeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    pub method: IkMethod,
    pub damping: f64,
    pub max_iterations: usize,
    /// mm
    pub position_tolerance: f64,
    /// rad
    pub orientation_tolerance: f64,
    /// Largest per-joint change in one iteration, rad.
    pub step_clamp: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            method: IkMethod::DampedLeastSquares,
            damping: 0.05,
            max_iterations: 200,
            position_tolerance: 0.5,
            orientation_tolerance: 1e-3,
            step_clamp: 0.2,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), IkError> {
        let bad = |m: &str| Err(IkError::InvalidParams(m.to_string()));
        if self.method == IkMethod::DampedLeastSquares && !(self.damping > 0.0) {
            return bad("damping must be positive");
        }
        if !(self.position_tolerance > 0.0 && self.orientation_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.step_clamp > 0.0) {
            return bad("step clamp must be positive");
        }
        Ok(())
    }
}

/// One logged IK iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkStep {
    /// ‖e‖ before the update.
    pub error_norm: f64,
    /// Norm of the solver step before clamping.
    pub raw_step_norm: f64,
    /// Norm of the step actually applied (after clamping to the step and joint limits).
    pub applied_step_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: JointConfig,
    pub iterations: usize,
    pub position_error: f64,
    pub orientation_error: f64,
    pub trace: Vec<IkStep>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IkError {
    #[error("IK did not converge: best residual {position_error:.3} mm / {orientation_error:.5} rad")]
    NoConvergence { best: JointConfig, position_error: f64, orientation_error: f64 },
    #[error("IK stuck against the limits of joints {joints:?}")]
    JointLimitStuck { joints: Vec<usize>, q: JointConfig },
    #[error("seed violates joint limits")]
    SeedOutOfLimits,
    #[error("invalid IK parameters: {0}")]
    InvalidParams(String),
}

fn residuals(e: &Vector6<f64>) -> (f64, f64) {
    (e.fixed_rows::<3>(0).norm(), e.fixed_rows::<3>(3).norm())
}

/// `J⁺ e` via SVD (singular values below 1e-10 of the largest are dropped).
pub fn pinv_step(jac: &Jacobian, e: &Vector6<f64>) -> Vector6<f64> {
    let svd = jac.svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    svd.solve(e, tol).expect("svd has u and v")
}

/// `Jᵀ (J Jᵀ + λ² I)⁻¹ e`.
pub fn dls_step(jac: &Jacobian, e: &Vector6<f64>, lambda: f64) -> Vector6<f64> {
    let a: SMatrix<f64, 6, 6> = jac * jac.transpose() + Matrix6::identity() * (lambda * lambda);
    let y = a.cholesky().expect("damped normal matrix is positive definite").solve(e);
    jac.transpose() * y
}

/// Iterative IK from `seed`.
pub fn ik(
    chain: &KinematicChain,
    target: &RigidTransform,
    seed: &JointConfig,
    params: &IkParams,
) -> Result<IkSolution, IkError> {
    params.validate()?;
    if !chain.within_limits(seed) {
        return Err(IkError::SeedOutOfLimits);
    }
    let mut q = *seed;
    let mut trace = Vec::new();
    let mut best = (q, f64::INFINITY, f64::INFINITY);
    for it in 0..=params.max_iterations {
        let e = pose_error(&chain.fk(&q), target);
        let (pe, oe) = residuals(&e);
        if pe + oe < best.1 + best.2 {
            best = (q, pe, oe);
        }
        if pe <= params.position_tolerance && oe <= params.orientation_tolerance {
            return Ok(IkSolution { q, iterations: it, position_error: pe, orientation_error: oe, trace });
        }
        if it == params.max_iterations {
            break;
        }
        let jac = chain.jacobian(&q);
        let raw = match params.method {
            IkMethod::PseudoInverse => pinv_step(&jac, &e),
            IkMethod::DampedLeastSquares => dls_step(&jac, &e, params.damping),
        };
        let peak = raw.amax();
        let step = if peak > params.step_clamp { raw * (params.step_clamp / peak) } else { raw };
        let next = chain.clamp(&(q + step));
        let applied = next - q;
        trace.push(IkStep { error_norm: e.norm(), raw_step_norm: raw.norm(), applied_step_norm: applied.norm() });
        if applied.norm() < 1e-12 {
            let joints = (0..DOF)
                .filter(|&i| step[i] != 0.0 && (q[i] <= chain.joints[i].lo || q[i] >= chain.joints[i].hi))
                .map(|i| i + 1)
                .collect();
            return Err(IkError::JointLimitStuck { joints, q });
        }
        q = next;
    }
    Err(IkError::NoConvergence { best: best.0, position_error: best.1, orientation_error: best.2 })
}
