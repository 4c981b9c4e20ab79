use serde::{Deserialize, Serialize};

use crate::geometry::{RigidTransform, TriangleMesh, UnitQuaternion, Vec3};

/// Collision shape in millimetres.
///
/// Boxes and cylinders are posed by a transform of their local frame; the
/// cylinder axis is local `z`, spanning `±half_length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Primitive {
    Sphere { center: Vec3, radius: f64 },
    Capsule { a: Vec3, b: Vec3, radius: f64 },
    Box { pose: RigidTransform, half_extents: Vec3 },
    Cylinder { pose: RigidTransform, radius: f64, half_length: f64 },
}

/// Closest points between segments `p0p1` and `q0q1`; returns the squared distance.
pub fn segment_segment_dist2(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    const EPS: f64 = 1e-18;
    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm_squared();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let s0 = if denom > EPS * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm_squared()
}

pub fn point_segment_dist(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    segment_segment_dist2(p, p, a, b).sqrt()
}

/// Minimum of a convex function on `[0, 1]` by golden-section search.
fn convex_min(f: impl Fn(f64) -> f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = f(0.0).min(f(1.0)).min(f1).min(f2);
    for _ in 0..60 {
        if best == 0.0 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
            best = best.min(f1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
            best = best.min(f2);
        }
    }
    best
}

fn point_box_dist(p: &Vec3, half: &Vec3) -> f64 {
    (p.abs() - half).sup(&Vec3::zeros()).norm()
}

fn point_cylinder_dist(p: &Vec3, radius: f64, half_length: f64) -> f64 {
    let dr = (p.xy().norm() - radius).max(0.0);
    let dz = (p.z.abs() - half_length).max(0.0);
    dr.hypot(dz)
}

impl Primitive {
    /// Cylinder whose axis runs from `a` to `b`.
    pub fn cylinder_between(a: &Vec3, b: &Vec3, radius: f64) -> Primitive {
        let axis = b - a;
        let rotation = UnitQuaternion::rotation_between(&Vec3::z(), &axis)
            .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI));
        Primitive::Cylinder {
            pose: RigidTransform::new(rotation, (a + b) / 2.0),
            radius,
            half_length: axis.norm() / 2.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Primitive::Sphere { radius, .. } | Primitive::Capsule { radius, .. } => *radius > 0.0,
            Primitive::Box { half_extents, .. } => half_extents.iter().all(|h| *h > 0.0),
            Primitive::Cylinder { radius, half_length, .. } => *radius > 0.0 && *half_length > 0.0,
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Primitive {
        match self {
            Primitive::Sphere { center, radius } => Primitive::Sphere { center: t.apply_point(center), radius: *radius },
            Primitive::Capsule { a, b, radius } => {
                Primitive::Capsule { a: t.apply_point(a), b: t.apply_point(b), radius: *radius }
            }
            Primitive::Box { pose, half_extents } => Primitive::Box { pose: t.compose(pose), half_extents: *half_extents },
            Primitive::Cylinder { pose, radius, half_length } => {
                Primitive::Cylinder { pose: t.compose(pose), radius: *radius, half_length: *half_length }
            }
        }
    }

    /// Same shape with every radius and half-extent reduced by `eps` (floored at a tiny positive value).
    pub fn shrunk(&self, eps: f64) -> Primitive {
        let s = |v: f64| (v - eps).max(1e-9);
        match self {
            Primitive::Sphere { center, radius } => Primitive::Sphere { center: *center, radius: s(*radius) },
            Primitive::Capsule { a, b, radius } => Primitive::Capsule { a: *a, b: *b, radius: s(*radius) },
            Primitive::Box { pose, half_extents } => Primitive::Box { pose: *pose, half_extents: half_extents.map(s) },
            Primitive::Cylinder { pose, radius, half_length } => {
                Primitive::Cylinder { pose: *pose, radius: s(*radius), half_length: s(*half_length) }
            }
        }
    }

    /// Centre and radius of a sphere enclosing the shape.
    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        match self {
            Primitive::Sphere { center, radius } => (*center, *radius),
            Primitive::Capsule { a, b, radius } => ((a + b) / 2.0, (b - a).norm() / 2.0 + radius),
            Primitive::Box { pose, half_extents } => (pose.translation, half_extents.norm()),
            Primitive::Cylinder { pose, radius, half_length } => (pose.translation, radius.hypot(*half_length)),
        }
    }

    /// Distance from the segment `ab` to the shape's surface; negative for
    /// sphere and capsule overlap depth, zero when the segment touches or
    /// enters a box or cylinder.
    pub fn segment_distance(&self, a: &Vec3, b: &Vec3) -> f64 {
        match self {
            Primitive::Sphere { center, radius } => point_segment_dist(center, a, b) - radius,
            Primitive::Capsule { a: p, b: q, radius } => segment_segment_dist2(a, b, p, q).sqrt() - radius,
            Primitive::Box { pose, half_extents } => {
                let inv = pose.inverse();
                let (la, lb) = (inv.apply_point(a), inv.apply_point(b));
                convex_min(|t| point_box_dist(&(la + (lb - la) * t), half_extents))
            }
            Primitive::Cylinder { pose, radius, half_length } => {
                let inv = pose.inverse();
                let (la, lb) = (inv.apply_point(a), inv.apply_point(b));
                convex_min(|t| point_cylinder_dist(&(la + (lb - la) * t), *radius, *half_length))
            }
        }
    }

    /// The core segment and radius of a sphere or capsule.
    pub fn swept_sphere(&self) -> Option<(Vec3, Vec3, f64)> {
        match self {
            Primitive::Sphere { center, radius } => Some((*center, *center, *radius)),
            Primitive::Capsule { a, b, radius } => Some((*a, *b, *radius)),
            _ => None,
        }
    }

    /// Triangulated surface, for rendering and synthetic sensing.
    pub fn to_mesh(&self) -> TriangleMesh {
        const SEG: usize = 48;
        match self {
            Primitive::Sphere { center, radius } => {
                TriangleMesh::uv_sphere(*radius, SEG, SEG / 2).transformed(&RigidTransform::from_translation(center.x, center.y, center.z))
            }
            Primitive::Capsule { a, b, radius } => {
                let axis = b - a;
                let len = axis.norm();
                let mut mesh = TriangleMesh::uv_sphere(*radius, SEG, SEG / 2)
                    .transformed(&RigidTransform::from_translation(a.x, a.y, a.z));
                mesh.merge(&TriangleMesh::uv_sphere(*radius, SEG, SEG / 2).transformed(&RigidTransform::from_translation(b.x, b.y, b.z)));
                if len > 0.0 {
                    let rot = crate::geometry::UnitQuaternion::rotation_between(&Vec3::z(), &axis)
                        .unwrap_or_else(|| crate::geometry::UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI));
                    let c = (a + b) / 2.0;
                    mesh.merge(&TriangleMesh::cylinder(*radius, len / 2.0, SEG).transformed(&RigidTransform::new(rot, c)));
                }
                mesh
            }
            Primitive::Box { pose, half_extents } => TriangleMesh::cuboid(*half_extents).transformed(pose),
            Primitive::Cylinder { pose, radius, half_length } => {
                TriangleMesh::cylinder(*radius, *half_length, SEG).transformed(pose)
            }
        }
    }
}
