//! Core 3-D math shared by the rest of the crate.
//!
//! Lengths are millimetres, angles radians. Rotations are stored as unit
//! quaternions; rotation matrices are derived on demand.

mod cloud;
pub mod io;
mod mesh;
mod raycast;

pub use cloud::PointCloud;
pub use mesh::TriangleMesh;
pub use raycast::{ray_cast, ray_triangle, MeshBvh, RayHit};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// A point or direction in millimetres.
pub type Vec3 = Vector3<f64>;

/// Rotation stored as a unit quaternion. `q` and `-q` denote the same rotation.
pub type UnitQuaternion = nalgebra::UnitQuaternion<f64>;

/// Rigid motion of SE(3): rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: UnitQuaternion, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: UnitQuaternion::identity(), translation: Vec3::zeros() }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self { rotation: UnitQuaternion::identity(), translation: Vec3::new(x, y, z) }
    }

    pub fn from_rotation(rotation: UnitQuaternion) -> Self {
        Self { rotation, translation: Vec3::zeros() }
    }

    /// Rotation of `angle` rad about the unit `axis` through the origin.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Self::from_rotation(UnitQuaternion::from_axis_angle(&axis, angle))
    }

    /// Rotation about a vertical axis passing through `pivot`.
    pub fn yaw_about(pivot: &Vec3, angle: f64) -> Self {
        let rot = Self::from_axis_angle(&Vec3::z(), angle);
        let to = Self::new(UnitQuaternion::identity(), *pivot);
        let from = Self::new(UnitQuaternion::identity(), -pivot);
        to.compose(&rot).compose(&from)
    }

    /// Builds a transform from a 3x3 rotation and a translation. The matrix is
    /// projected onto the nearest proper rotation first.
    pub fn from_matrix(rotation: &Matrix3<f64>, translation: Vec3) -> Self {
        let svd = rotation.svd(true, true);
        let (u, v_t) = (svd.u.expect("svd u"), svd.v_t.expect("svd v"));
        let d = (u * v_t).determinant().signum();
        let r = u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t;
        let rot = nalgebra::Rotation3::from_matrix_unchecked(r);
        Self { rotation: UnitQuaternion::from_rotation_matrix(&rot), translation }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform { rotation: inv, translation: -(inv * self.translation) }
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// Rotates then translates every point; normals are only rotated.
    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        let points = cloud.points.iter().map(|p| self.apply_point(p)).collect();
        let normals = cloud
            .normals
            .as_ref()
            .map(|ns| ns.iter().map(|n| self.apply_vector(n)).collect());
        PointCloud { points, normals }
    }

    /// Rotation angle in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }

    /// Translation distance and rotation angle between `self` and `other`.
    pub fn error_to(&self, other: &RigidTransform) -> (f64, f64) {
        let d = self.inverse().compose(other);
        ((self.translation - other.translation).norm(), d.rotation.angle())
    }
}

/// Euler angles in intrinsic Z-Y-X order, stored as `(yaw, pitch, roll)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZyx {
    pub angles: Vec3,
    /// Set when `|pitch|` is at π/2; roll is then reported as zero.
    pub gimbal_lock: bool,
}

const GIMBAL_EPS: f64 = 1e-9;

/// Decomposes `q` as `Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn euler_from_quaternion(q: &UnitQuaternion) -> EulerZyx {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let sin_pitch = 2.0 * (w * y - z * x);
    if sin_pitch.abs() >= 1.0 - GIMBAL_EPS {
        let m = q.to_rotation_matrix().into_inner();
        let pitch = std::f64::consts::FRAC_PI_2.copysign(sin_pitch);
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        return EulerZyx { angles: Vec3::new(yaw, pitch, 0.0), gimbal_lock: true };
    }
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    let pitch = sin_pitch.asin();
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    EulerZyx { angles: Vec3::new(yaw, pitch, roll), gimbal_lock: false }
}

/// Inverse of [`euler_from_quaternion`]; `angles = (yaw, pitch, roll)`.
pub fn quaternion_from_euler(angles: &Vec3) -> UnitQuaternion {
    let rz = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), angles.x);
    let ry = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), angles.y);
    let rx = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), angles.z);
    rz * ry * rx
}

/// Axis-aligned box; `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// Panics if `min > max` on any axis.
    pub fn new(min: Vec3, max: Vec3) -> Self {
        assert!(
            min.iter().zip(max.iter()).all(|(a, b)| a <= b),
            "Aabb min must not exceed max"
        );
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    /// Closed-interval membership.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        Aabb { min: self.min.add_scalar(-margin), max: self.max.add_scalar(margin) }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i] <= self.max[i])
    }
}
