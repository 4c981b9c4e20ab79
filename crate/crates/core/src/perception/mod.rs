//! Dense cloud synthesis from meshes, Cartesian segmentation,
//! Difference-of-Normals denoising and point-to-point ICP.

mod don;
mod icp;
mod kdtree;
mod raytrace;

pub use don::{don_filter, don_vector, estimate_normals, estimate_normals_with, DonParams, DonResult, NormalField};
pub use icp::{
    alignment_score, best_fit_transform, icp, icp_with, robustness_sweep, IcpParams, IcpResult, SweepAxis, SweepEntry,
};
pub use kdtree::KdTree;
pub use raytrace::{
    look_at, raytrace_cloud, truncated_icosahedron_faces, truncated_icosahedron_vertices, VirtualCameraRig,
};

use thiserror::Error;

use crate::geometry::{Aabb, PointCloud};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("no ray hit the mesh")]
    EmptyCloud,
    #[error("mesh does not fit inside the camera sphere")]
    MeshOutsideRig,
    #[error("fewer than 3 correspondences in ICP iteration {iteration} ({matched} matched)")]
    NoCorrespondences { iteration: usize, matched: usize },
    #[error("registration needs at least 3 points in each cloud")]
    TooFewPoints,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Points inside the closed box, normals carried along.
pub fn segment_box(cloud: &PointCloud, bounds: &Aabb) -> PointCloud {
    cloud.filter_indices(|i| bounds.contains(&cloud.points[i]))
}
