use std::f64::consts::TAU;

use super::{Aabb, RigidTransform, Vec3};

/// Indexed triangle soup in millimetres.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

const MIN_AREA: f64 = 1e-9;

impl TriangleMesh {
    /// Builds a mesh, dropping degenerate triangles. Fails on out-of-range indices.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, String> {
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(format!("triangle {t:?} indexes past {} vertices", vertices.len()));
        }
        let mut mesh = Self { vertices, triangles };
        mesh.triangles.retain(|t| {
            let [a, b, c] = t.map(|i| mesh.vertices[i]);
            (b - a).cross(&(c - a)).norm() * 0.5 > MIN_AREA
        });
        Ok(mesh)
    }

    pub fn is_valid(&self) -> bool {
        self.triangles.iter().all(|t| {
            t.iter().all(|&i| i < self.vertices.len()) && self.triangle_area(t) > MIN_AREA
        })
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|v| self.vertices[v])
    }

    fn triangle_area(&self, t: &[usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i]);
        (b - a).cross(&(c - a)).norm() * 0.5
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Radius of the smallest origin-centred sphere around `center` enclosing every vertex.
    pub fn bounding_radius(&self, center: &Vec3) -> f64 {
        self.vertices.iter().map(|v| (v - center).norm()).fold(0.0, f64::max)
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| t.apply_point(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn merge(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + off)));
    }

    /// Axis-aligned box centred at the origin, outward-wound.
    pub fn cuboid(half: Vec3) -> TriangleMesh {
        let v = |x: f64, y: f64, z: f64| Vec3::new(x * half.x, y * half.y, z * half.z);
        let vertices = vec![
            v(-1.0, -1.0, -1.0),
            v(1.0, -1.0, -1.0),
            v(1.0, 1.0, -1.0),
            v(-1.0, 1.0, -1.0),
            v(-1.0, -1.0, 1.0),
            v(1.0, -1.0, 1.0),
            v(1.0, 1.0, 1.0),
            v(-1.0, 1.0, 1.0),
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        TriangleMesh { vertices, triangles }
    }

    /// UV sphere centred at the origin.
    pub fn uv_sphere(radius: f64, slices: usize, stacks: usize) -> TriangleMesh {
        assert!(slices >= 3 && stacks >= 2);
        let mut vertices = vec![Vec3::new(0.0, 0.0, radius)];
        for i in 1..stacks {
            let phi = std::f64::consts::PI * i as f64 / stacks as f64;
            for j in 0..slices {
                let th = TAU * j as f64 / slices as f64;
                vertices.push(radius * Vec3::new(phi.sin() * th.cos(), phi.sin() * th.sin(), phi.cos()));
            }
        }
        vertices.push(Vec3::new(0.0, 0.0, -radius));
        let south = vertices.len() - 1;
        let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
        let mut triangles = Vec::new();
        for j in 0..slices {
            triangles.push([0, ring(1, j), ring(1, j + 1)]);
            triangles.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
        }
        for i in 1..stacks - 1 {
            for j in 0..slices {
                let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        TriangleMesh { vertices, triangles }
    }

    /// Capped cylinder along local z, centred at the origin.
    pub fn cylinder(radius: f64, half_length: f64, segments: usize) -> TriangleMesh {
        assert!(segments >= 3);
        let mut vertices = Vec::with_capacity(2 * segments + 2);
        for j in 0..segments {
            let th = TAU * j as f64 / segments as f64;
            let (s, c) = th.sin_cos();
            vertices.push(Vec3::new(radius * c, radius * s, -half_length));
            vertices.push(Vec3::new(radius * c, radius * s, half_length));
        }
        let bottom = vertices.len();
        vertices.push(Vec3::new(0.0, 0.0, -half_length));
        vertices.push(Vec3::new(0.0, 0.0, half_length));
        let top = bottom + 1;
        let mut triangles = Vec::new();
        for j in 0..segments {
            let k = (j + 1) % segments;
            let (b0, t0, b1, t1) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
            triangles.push([b0, b1, t1]);
            triangles.push([b0, t1, t0]);
            triangles.push([bottom, b1, b0]);
            triangles.push([top, t0, t1]);
        }
        TriangleMesh { vertices, triangles }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_indices_and_drops_degenerates() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 0, 1]]).unwrap();
        assert_eq!(m.triangles.len(), 1);
        assert!(m.is_valid());
    }

    #[test]
    fn primitive_areas() {
        let cube = TriangleMesh::cuboid(Vec3::repeat(0.5));
        assert!((cube.area() - 6.0).abs() < 1e-12);
        assert!(cube.is_valid());
        let cyl = TriangleMesh::cylinder(1.0, 1.0, 256);
        let exact = 2.0 * std::f64::consts::PI * 2.0 + 2.0 * std::f64::consts::PI;
        assert!((cyl.area() - exact).abs() / exact < 1e-3);
        let s = TriangleMesh::uv_sphere(1.0, 64, 32);
        assert!((s.area() - 4.0 * std::f64::consts::PI).abs() / (4.0 * std::f64::consts::PI) < 5e-3);
    }
}
