//! The reference welding cell: a TKY tubular joint clamped on a workbench,
//! collision proxies for [`KinematicChain::industrial_6dof`], and synthetic
//! sensor clouds of the cell.
//!
//! World frame: robot base at the origin, `z` up, the workbench in front of
//! the robot along `+x`, the chord running along `y`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{PointCloud, RigidTransform, TriangleMesh, UnitQuaternion, Vec3};
use crate::kinematics::{ik, IkError, IkParams, IkSolution, JointConfig, KinematicChain};
use crate::perception::{raytrace_cloud, PerceptionError, VirtualCameraRig};
use crate::scene::{LinkProxy, Obstacle, Primitive, Scene, SceneError};

/// Link pairs exempt from self-collision besides adjacent links: the wrist
/// housing and the torch, which sit on either side of the massless link 5.
pub const EXEMPT_PAIRS: [(usize, usize); 1] = [(4, 6)];

/// Safety margin, mm.
pub const DEFAULT_MARGIN: f64 = 10.0;


/// Chord along `y`, a vertical brace (the T) and a brace tilted in the `y–z`
/// plane (the Y), all meeting the chord's upper surface. Dimensions in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TkyJoint {
    pub chord_center: Vec3,
    pub chord_radius: f64,
    pub chord_half_length: f64,
    pub brace_radius: f64,
    /// Height of the vertical brace's top above the chord axis.
    pub brace_height: f64,
    pub y_brace_radius: f64,
    /// Position of the tilted brace's foot along the chord.
    pub y_brace_offset: f64,
    /// Tilt from vertical toward `+y`, rad.
    pub y_brace_tilt: f64,
    /// Length from the chord axis to the tilted brace's end.
    pub y_brace_length: f64,
}

impl Default for TkyJoint {
    fn default() -> Self {
        Self {
            chord_center: Vec3::new(1100.0, 0.0, 500.0),
            chord_radius: 150.0,
            chord_half_length: 600.0,
            brace_radius: 90.0,
            brace_height: 500.0,
            y_brace_radius: 70.0,
            y_brace_offset: 300.0,
            y_brace_tilt: std::f64::consts::FRAC_PI_4,
            y_brace_length: 500.0,
        }
    }
}

impl TkyJoint {
    /// The three pipes as workpiece-attached cylinders.
    pub fn members(&self) -> Vec<Obstacle> {
        let c = self.chord_center;
        let along = Vec3::y() * self.chord_half_length;
        let chord = Primitive::cylinder_between(&(c - along), &(c + along), self.chord_radius);
        let brace = Primitive::cylinder_between(&c, &(c + Vec3::z() * self.brace_height), self.brace_radius);
        let foot = c + Vec3::y() * self.y_brace_offset;
        let (s, co) = self.y_brace_tilt.sin_cos();
        let top = foot + Vec3::new(0.0, s, co) * self.y_brace_length;
        let y_brace = Primitive::cylinder_between(&foot, &top, self.y_brace_radius);
        [("chord", chord), ("brace", brace), ("y_brace", y_brace)]
            .into_iter()
            .map(|(name, shape)| Obstacle { name: name.into(), shape, attached: true })
            .collect()
    }

    /// Closed surface mesh of the joint (overlapping pipe meshes; only the outer hull is visible).
    pub fn mesh(&self) -> TriangleMesh {
        obstacle_mesh(&self.members())
    }
}

/// Two saddle supports under the chord and a clamp on either side of each;
/// all attached to the workpiece.
pub fn fixtures(joint: &TkyJoint) -> Vec<Obstacle> {
    let c = joint.chord_center;
    let r = joint.chord_radius;
    let bench_top = c.z - r - 50.0;
    let mut out = Vec::new();
    for (tag, y) in [("neg", -0.75 * joint.chord_half_length), ("pos", 0.75 * joint.chord_half_length)] {
        let support_top = c.z - r + 10.0;
        out.push(Obstacle {
            name: format!("support_{tag}"),
            shape: Primitive::Box {
                pose: RigidTransform::from_translation(c.x, y, (bench_top + support_top) / 2.0),
                half_extents: Vec3::new(0.8 * r, 40.0, (support_top - bench_top) / 2.0),
            },
            attached: true,
        });
        for (side, sx) in [("a", -1.0), ("b", 1.0)] {
            let height = c.z + 20.0 - bench_top;
            out.push(Obstacle {
                name: format!("clamp_{tag}_{side}"),
                shape: Primitive::Box {
                    pose: RigidTransform::from_translation(c.x + sx * (r + 30.0), y, bench_top + height / 2.0),
                    half_extents: Vec3::new(25.0, 30.0, height / 2.0),
                },
                attached: true,
            });
        }
    }
    out
}

/// The bench slab whose top is 50 mm below the chord.
pub fn workbench(joint: &TkyJoint) -> Obstacle {
    let top = joint.chord_center.z - joint.chord_radius - 50.0;
    Obstacle {
        name: "workbench".into(),
        shape: Primitive::Box {
            pose: RigidTransform::from_translation(joint.chord_center.x, joint.chord_center.y, top / 2.0),
            half_extents: Vec3::new(450.0, joint.chord_half_length + 200.0, top / 2.0),
        },
        attached: false,
    }
}

/// Spheres and capsules for [`KinematicChain::industrial_6dof`], in DH link frames.
pub fn link_proxies() -> Vec<LinkProxy> {
    let cap = |link, a: [f64; 3], b: [f64; 3], radius| LinkProxy {
        link,
        shape: Primitive::Capsule { a: Vec3::from(a), b: Vec3::from(b), radius },
    };
    vec![
        // Base column.
        cap(0, [0.0, 0.0, 0.0], [0.0, 0.0, 200.0], 120.0),
        // Shoulder housing along the joint 2 axis.
        cap(1, [0.0, 0.0, -100.0], [0.0, 0.0, 100.0], 110.0),
        // Upper arm from the shoulder to the elbow.
        cap(2, [-700.0, 0.0, 0.0], [0.0, 0.0, 0.0], 90.0),
        // Elbow offset and forearm, stopping short of the wrist.
        cap(3, [-115.0, 0.0, 0.0], [0.0, 0.0, 0.0], 90.0),
        cap(3, [0.0, 0.0, 0.0], [0.0, 0.0, 675.0], 70.0),
        // Wrist housing.
        LinkProxy { link: 4, shape: Primitive::Sphere { center: Vec3::zeros(), radius: 75.0 } },
        // Torch body and neck; the last 40 mm to the tip carry no proxy.
        cap(6, [0.0, 0.0, 0.0], [0.0, 0.0, 120.0], 45.0),
        cap(6, [0.0, 0.0, 120.0], [0.0, 0.0, 210.0], 15.0),
    ]
}

/// Merged surface mesh of the given obstacles at their nominal poses.
pub fn obstacle_mesh(obstacles: &[Obstacle]) -> TriangleMesh {
    let mut mesh = TriangleMesh::default();
    for o in obstacles {
        mesh.merge(&o.shape.to_mesh());
    }
    mesh
}

/// The reference cell: joint, fixtures and bench, with the arm's proxies.
pub fn default_scene(joint: &TkyJoint) -> Result<Scene, SceneError> {
    let mut obstacles = joint.members();
    obstacles.extend(fixtures(joint));
    obstacles.push(workbench(joint));
    Ok(Scene::new(obstacles, link_proxies(), DEFAULT_MARGIN)?.with_exempt_pairs(&EXEMPT_PAIRS))
}

/// Adds isotropic Gaussian noise of standard deviation `sigma` (mm) to every point.
pub fn add_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> PointCloud {
    if sigma <= 0.0 {
        return cloud.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = cloud
        .points
        .iter()
        .map(|p| p + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    PointCloud::from_points(points)
}

/// What a depth sensor would return for the cell: `scene_mesh` (workpiece plus
/// anything else in view) moved by `offset`, raytraced from `rig`, with noise.
pub fn sensor_cloud(
    scene_mesh: &TriangleMesh,
    rig: &VirtualCameraRig,
    offset: &RigidTransform,
    noise_sigma: f64,
    seed: u64,
) -> Result<PointCloud, PerceptionError> {
    let clean = raytrace_cloud(&scene_mesh.transformed(offset), &rig.transformed(offset))?;
    Ok(add_noise(&clean, noise_sigma, seed))
}

/// Pose at `position` whose tool axis points along `direction`, reached from
/// `reference` by the smallest rotation.
pub fn approach_pose(reference: &RigidTransform, position: Vec3, direction: &Vec3) -> RigidTransform {
    let current = reference.rotation * Vec3::z();
    // Exactly opposite: turn half a revolution about the reference tool x axis.
    let flip = || UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(reference.rotation * Vec3::x()), std::f64::consts::PI);
    let turn = UnitQuaternion::rotation_between(&current, direction).unwrap_or_else(flip);
    RigidTransform::new(turn * reference.rotation, position)
}

/// IK for an approach pose seeded at `home`, the tool axis rotated minimally
/// from the home orientation.
pub fn solve_approach(
    chain: &KinematicChain,
    home: &JointConfig,
    position: Vec3,
    direction: &Vec3,
    params: &IkParams,
) -> Result<IkSolution, IkError> {
    let target = approach_pose(&chain.fk(home), position, direction);
    ik(chain, &target, home, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn home_is_clear_of_the_cell() {
        let chain = KinematicChain::industrial_6dof();
        let scene = default_scene(&TkyJoint::default()).unwrap();
        assert!(scene.collisions(&chain, &JointConfig::zeros()).is_empty());
    }

    #[test]
    fn approach_pose_points_the_tool() {
        let chain = KinematicChain::industrial_6dof();
        let home = chain.fk(&JointConfig::zeros());
        let d = Vec3::new(1.0, 0.0, -1.0).normalize();
        let pose = approach_pose(&home, Vec3::new(1.0, 2.0, 3.0), &d);
        assert!((pose.rotation * Vec3::z() - d).norm() < 1e-12);
        let back = approach_pose(&home, Vec3::zeros(), &-(home.rotation * Vec3::z()));
        assert!((back.rotation * Vec3::z() + home.rotation * Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn noise_is_seeded() {
        let cloud = PointCloud::from_points(vec![Vec3::zeros(); 100]);
        let a = add_noise(&cloud, 2.0, 5);
        assert_eq!(a, add_noise(&cloud, 2.0, 5));
        assert_ne!(a, add_noise(&cloud, 2.0, 6));
        let rms = (a.points.iter().map(|p| p.norm_squared()).sum::<f64>() / 300.0).sqrt();
        assert!((rms - 2.0).abs() < 0.4, "{rms}");
    }
}
