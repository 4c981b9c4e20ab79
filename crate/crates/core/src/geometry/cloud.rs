use std::collections::BTreeMap;

use super::{Aabb, Vec3};

/// Ordered list of points (mm) with optional per-point unit normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vec3>) -> Self {
        Self { points, normals: None }
    }

    /// Returns `None` when the lengths differ or a normal is not unit length.
    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Option<Self> {
        let cloud = Self { points, normals: Some(normals) };
        cloud.is_valid().then_some(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        let finite = self.points.iter().all(|p| p.iter().all(|c| c.is_finite()));
        match &self.normals {
            None => finite,
            Some(ns) => {
                finite && ns.len() == self.points.len() && ns.iter().all(|n| (n.norm() - 1.0).abs() <= 1e-6)
            }
        }
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
        Some(sum / self.points.len() as f64)
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }

    /// Keeps the points whose index passes `keep`, carrying normals along.
    pub fn filter_indices(&self, mut keep: impl FnMut(usize) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.select(&idx)
    }

    pub fn select(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            normals: self.normals.as_ref().map(|ns| idx.iter().map(|&i| ns[i]).collect()),
        }
    }

    /// Concatenates two clouds. Normals survive only if both carry them.
    pub fn extend(&mut self, other: &PointCloud) {
        self.normals = match (self.normals.take(), &other.normals) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            (None, _) if self.points.is_empty() => other.normals.clone(),
            _ => None,
        };
        self.points.extend_from_slice(&other.points);
    }

    /// Replaces each occupied voxel by the centroid of its points.
    ///
    /// Output order follows the lexicographic voxel index, so the result does
    /// not depend on input order.
    pub fn voxel_downsample(&self, voxel: f64) -> PointCloud {
        assert!(voxel > 0.0, "voxel size must be positive");
        let mut cells: BTreeMap<(i64, i64, i64), (Vec3, usize)> = BTreeMap::new();
        for p in &self.points {
            let key = ((p.x / voxel).floor() as i64, (p.y / voxel).floor() as i64, (p.z / voxel).floor() as i64);
            let e = cells.entry(key).or_insert((Vec3::zeros(), 0));
            e.0 += p;
            e.1 += 1;
        }
        PointCloud::from_points(cells.into_values().map(|(s, n)| s / n as f64).collect())
    }
}
