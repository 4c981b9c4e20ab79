use rayon::prelude::*;

use super::PerceptionError;
use crate::geometry::{MeshBvh, PointCloud, RigidTransform, TriangleMesh, Vec3};

/// Pinhole depth cameras placed on a sphere, each looking at the sphere centre.
///
/// A viewpoint maps camera coordinates to world coordinates; the camera
/// looks along its local `+z` with image rows along local `+y`.
#[derive(Debug, Clone)]
pub struct VirtualCameraRig {
    pub viewpoints: Vec<RigidTransform>,
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, rad.
    pub hfov: f64,
    pub radius: f64,
    pub center: Vec3,
}

fn golden() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// Adds every sign combination of `base` under cyclic coordinate permutation.
fn push_even_perms(out: &mut Vec<Vec3>, base: [f64; 3]) {
    for perm in 0..3 {
        let b = [base[perm % 3], base[(perm + 1) % 3], base[(perm + 2) % 3]];
        for signs in 0..8u8 {
            let v = Vec3::new(
                if signs & 1 != 0 { -b[0] } else { b[0] },
                if signs & 2 != 0 { -b[1] } else { b[1] },
                if signs & 4 != 0 { -b[2] } else { b[2] },
            );
            if !out.iter().any(|w| (w - v).norm() < 1e-9) {
                out.push(v);
            }
        }
    }
}

/// The 60 vertex directions of a truncated icosahedron, unit length.
pub fn truncated_icosahedron_vertices() -> Vec<Vec3> {
    let phi = golden();
    let mut v = Vec::with_capacity(60);
    push_even_perms(&mut v, [0.0, 1.0, 3.0 * phi]);
    push_even_perms(&mut v, [1.0, 2.0 + phi, 2.0 * phi]);
    push_even_perms(&mut v, [phi, 2.0, phi * phi * phi]);
    v.into_iter().map(|p| p.normalize()).collect()
}

/// The 32 face-centre directions (12 pentagons, 20 hexagons), unit length.
pub fn truncated_icosahedron_faces() -> Vec<Vec3> {
    let phi = golden();
    let mut v = Vec::with_capacity(32);
    push_even_perms(&mut v, [0.0, 1.0, phi]);
    push_even_perms(&mut v, [1.0, 1.0, 1.0]);
    push_even_perms(&mut v, [0.0, 1.0 / phi, phi]);
    v.into_iter().map(|p| p.normalize()).collect()
}

/// Camera pose at `eye` looking at `target`.
pub fn look_at(eye: &Vec3, target: &Vec3) -> RigidTransform {
    let forward = (target - eye).normalize();
    let up = if forward.z.abs() > 0.99 { Vec3::y() } else { Vec3::z() };
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right);
    let m = nalgebra::Matrix3::from_columns(&[right, down, forward]);
    RigidTransform::from_matrix(&m, *eye)
}

impl VirtualCameraRig {
    pub fn new(directions: &[Vec3], center: Vec3, radius: f64, width: usize, height: usize, hfov: f64) -> Self {
        let viewpoints = directions.iter().map(|d| look_at(&(center + d.normalize() * radius), &center)).collect();
        Self { viewpoints, width, height, hfov, radius, center }
    }

    /// All 60 truncated-icosahedron vertices.
    pub fn truncated_icosahedron(center: Vec3, radius: f64, width: usize, height: usize, hfov: f64) -> Self {
        Self::new(&truncated_icosahedron_vertices(), center, radius, width, height, hfov)
    }

    /// Default rig for a mesh: 60 views at three times its bounding radius, 128x128, 60° FOV.
    pub fn around(mesh: &TriangleMesh) -> Self {
        let center = mesh.bounds().center();
        let r = mesh.bounding_radius(&center);
        Self::truncated_icosahedron(center, 3.0 * r, 128, 128, 60f64.to_radians())
    }

    /// Keeps only viewpoints whose position satisfies `keep`.
    pub fn retain(mut self, keep: impl Fn(&Vec3) -> bool) -> Self {
        self.viewpoints.retain(|v| keep(&v.translation));
        self
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            viewpoints: self.viewpoints.iter().map(|v| t.compose(v)).collect(),
            center: t.apply_point(&self.center),
            ..self.clone()
        }
    }

    /// World-frame ray direction through the centre of pixel `(u, v)`.
    pub fn pixel_ray(&self, view: &RigidTransform, u: usize, v: usize) -> Vec3 {
        let tx = (self.hfov / 2.0).tan();
        let ty = tx * self.height as f64 / self.width as f64;
        let x = tx * (2.0 * (u as f64 + 0.5) / self.width as f64 - 1.0);
        let y = ty * (2.0 * (v as f64 + 0.5) / self.height as f64 - 1.0);
        view.apply_vector(&Vec3::new(x, y, 1.0).normalize())
    }
}

/// Back-projects one depth image per viewpoint and merges them in viewpoint order.
pub fn raytrace_cloud(mesh: &TriangleMesh, rig: &VirtualCameraRig) -> Result<PointCloud, PerceptionError> {
    if mesh.bounding_radius(&rig.center) >= rig.radius {
        return Err(PerceptionError::MeshOutsideRig);
    }
    let bvh = MeshBvh::new(mesh.clone());
    let per_view: Vec<Vec<Vec3>> = rig
        .viewpoints
        .par_iter()
        .map(|view| {
            let mut pts = Vec::new();
            for v in 0..rig.height {
                for u in 0..rig.width {
                    let dir = rig.pixel_ray(view, u, v);
                    if let Some(hit) = bvh.cast(&view.translation, &dir) {
                        pts.push(hit.point);
                    }
                }
            }
            pts
        })
        .collect();
    let points: Vec<Vec3> = per_view.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(PerceptionError::EmptyCloud);
    }
    Ok(PointCloud::from_points(points))
}
