//! Primitive-based workcell model and collision queries.
//!
//! Robot links carry spheres and capsules in their DH frames (link `k` is
//! frame `k`; link 0 is the base). Obstacles are any [`Primitive`]; those
//! flagged `attached` move rigidly with the workpiece pose.

mod primitive;

pub use primitive::{point_segment_dist, segment_segment_dist2, Primitive};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RigidTransform, Vec3};
use crate::kinematics::{JointConfig, KinematicChain, DOF};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub name: String,
    #[serde(flatten)]
    pub shape: Primitive,
    /// Moves with the workpiece; `shape` is then its pose at the nominal workpiece pose.
    #[serde(default)]
    pub attached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkProxy {
    pub link: usize,
    #[serde(flatten)]
    pub shape: Primitive,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("duplicate obstacle name '{0}'")]
    DuplicateName(String),
    #[error("obstacle '{0}' has a non-positive size")]
    InvalidObstacle(String),
    #[error("link proxy #{index}: {reason}")]
    InvalidProxy { index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Link(usize),
    Obstacle(String),
}

/// A pair closer than the safety margin. For link pairs `link` is the lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub link: usize,
    pub other: Body,
    /// Surface distance (mm); may be negative for overlapping round shapes.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionCheckParams {
    /// Largest per-joint change between checked samples, rad.
    pub resolution: f64,
    /// Extra clearance (mm) demanded at every sample. When positive, the
    /// segment is sampled densely enough that no point of any link moves
    /// farther than this between a configuration on the segment and its
    /// nearest sample, so the whole continuous segment keeps the nominal margin.
    pub clearance_pad: f64,
}

impl Default for MotionCheckParams {
    fn default() -> Self {
        Self { resolution: 0.01, clearance_pad: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    obstacles: Vec<Obstacle>,
    posed: Vec<Primitive>,
    bounds: Vec<(Vec3, f64)>,
    links: Vec<LinkProxy>,
    exempt: Vec<(usize, usize)>,
    workpiece_pose: RigidTransform,
    /// Safety margin, mm.
    pub margin: f64,
}

impl Scene {
    pub fn new(obstacles: Vec<Obstacle>, links: Vec<LinkProxy>, margin: f64) -> Result<Self, SceneError> {
        for (i, o) in obstacles.iter().enumerate() {
            if obstacles[..i].iter().any(|p| p.name == o.name) {
                return Err(SceneError::DuplicateName(o.name.clone()));
            }
            if !o.shape.is_valid() {
                return Err(SceneError::InvalidObstacle(o.name.clone()));
            }
        }
        for (index, p) in links.iter().enumerate() {
            let reason = if p.link > DOF {
                format!("link {} out of range 0..={DOF}", p.link)
            } else if p.shape.swept_sphere().is_none() {
                "links carry only spheres and capsules".to_string()
            } else if !p.shape.is_valid() {
                "non-positive radius".to_string()
            } else {
                continue;
            };
            return Err(SceneError::InvalidProxy { index, reason });
        }
        let mut scene = Self {
            posed: Vec::new(),
            bounds: Vec::new(),
            obstacles,
            links,
            exempt: Vec::new(),
            workpiece_pose: RigidTransform::identity(),
            margin,
        };
        scene.repose();
        Ok(scene)
    }

    /// A scene with neither obstacles nor link geometry.
    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), 0.0).expect("empty scene is valid")
    }

    /// Link pairs exempt from self-collision in addition to adjacent links.
    pub fn with_exempt_pairs(mut self, pairs: &[(usize, usize)]) -> Self {
        self.exempt = pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        self
    }

    pub fn with_margin(&self, margin: f64) -> Self {
        Self { margin, ..self.clone() }
    }

    fn repose(&mut self) {
        self.posed = self
            .obstacles
            .iter()
            .map(|o| if o.attached { o.shape.transformed(&self.workpiece_pose) } else { o.shape.clone() })
            .collect();
        self.bounds = self.posed.iter().map(|p| p.bounding_sphere()).collect();
    }

    /// Re-poses workpiece-attached obstacles to `t` relative to their nominal pose.
    /// Absolute: earlier updates are discarded.
    pub fn update_workpiece(&self, t: &RigidTransform) -> Scene {
        let mut s = self.clone();
        s.workpiece_pose = *t;
        s.repose();
        s
    }

    pub fn workpiece_pose(&self) -> &RigidTransform {
        &self.workpiece_pose
    }

    /// Obstacles as given (nominal poses).
    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    /// Obstacle names with their current world-frame shapes.
    pub fn posed_obstacles(&self) -> impl Iterator<Item = (&str, &Primitive)> {
        self.obstacles.iter().map(|o| o.name.as_str()).zip(&self.posed)
    }

    pub fn link_proxies(&self) -> &[LinkProxy] {
        &self.links
    }

    fn exempt_pair(&self, i: usize, j: usize) -> bool {
        let (a, b) = (i.min(j), i.max(j));
        b - a <= 1 || self.exempt.contains(&(a, b))
    }

    fn world_proxies(&self, chain: &KinematicChain, q: &JointConfig) -> Vec<(usize, Vec3, Vec3, f64)> {
        let frames = chain.link_frames(q);
        self.links
            .iter()
            .map(|p| {
                let (a, b, r) = p.shape.swept_sphere().expect("validated at construction");
                let f = &frames[p.link];
                (p.link, f.apply_point(&a), f.apply_point(&b), r)
            })
            .collect()
    }

    fn check(
        &self,
        chain: &KinematicChain,
        q: &JointConfig,
        obstacle_margin: f64,
        self_margin: f64,
        mut report: Option<&mut Vec<Contact>>,
    ) -> bool {
        let proxies = self.world_proxies(chain, q);
        let mut hit = false;
        for (pi, &(link, a, b, r)) in proxies.iter().enumerate() {
            for (oi, prim) in self.posed.iter().enumerate() {
                let (c, br) = self.bounds[oi];
                if point_segment_dist(&c, &a, &b) - br - r >= obstacle_margin {
                    continue;
                }
                let d = prim.segment_distance(&a, &b) - r;
                if d < obstacle_margin {
                    hit = true;
                    match report.as_deref_mut() {
                        Some(out) => out.push(Contact { link, other: Body::Obstacle(self.obstacles[oi].name.clone()), distance: d }),
                        None => return true,
                    }
                }
            }
            for &(link2, a2, b2, r2) in &proxies[pi + 1..] {
                if self.exempt_pair(link, link2) {
                    continue;
                }
                let d = segment_segment_dist2(&a, &b, &a2, &b2).sqrt() - r - r2;
                if d < self_margin {
                    hit = true;
                    match report.as_deref_mut() {
                        Some(out) => {
                            out.push(Contact { link: link.min(link2), other: Body::Link(link.max(link2)), distance: d })
                        }
                        None => return true,
                    }
                }
            }
        }
        hit
    }

    pub fn in_collision(&self, chain: &KinematicChain, q: &JointConfig) -> bool {
        self.check(chain, q, self.margin, self.margin, None)
    }

    /// Collision test with `pad` added to the margin (twice `pad` between links), as used
    /// at the samples of a padded [`Scene::motion_valid`].
    pub fn in_collision_padded(&self, chain: &KinematicChain, q: &JointConfig, pad: f64) -> bool {
        self.check(chain, q, self.margin + pad, self.margin + 2.0 * pad, None)
    }

    /// Every pair closer than the margin, in proxy then obstacle order.
    pub fn collisions(&self, chain: &KinematicChain, q: &JointConfig) -> Vec<Contact> {
        let mut out = Vec::new();
        self.check(chain, q, self.margin, self.margin, Some(&mut out));
        out
    }

    /// Upper bound, per joint, on how far (mm) any link-proxy point moves per radian of that joint.
    pub fn lever_arms(&self, chain: &KinematicChain) -> [f64; DOF] {
        let reach: Vec<f64> = chain.joints.iter().map(|j| j.a.hypot(j.d)).collect();
        let mut levers = [0.0f64; DOF];
        for p in &self.links {
            let (a, b, _) = p.shape.swept_sphere().expect("validated at construction");
            let local = a.norm().max(b.norm());
            // Joint j (0-based) moves frames j+1..; proxies on link k move with joints 0..k.
            for (j, lever) in levers.iter_mut().enumerate().take(p.link) {
                let l = reach[j + 1..p.link].iter().sum::<f64>() + reach[j] + local;
                *lever = f64::max(*lever, l);
            }
        }
        levers
    }

    /// Whether the straight joint-space segment is collision-free at the given sampling.
    /// Symmetric in its endpoints.
    pub fn motion_valid(&self, chain: &KinematicChain, qa: &JointConfig, qb: &JointConfig, params: &MotionCheckParams) -> bool {
        // Interpolate from a canonical endpoint so (a, b) and (b, a) sample identical points.
        let (qa, qb) = if qa.iter().partial_cmp(qb.iter()) == Some(std::cmp::Ordering::Greater) { (qb, qa) } else { (qa, qb) };
        let delta = qb - qa;
        let mut n = (delta.amax() / params.resolution).ceil().max(1.0);
        let pad = params.clearance_pad;
        if pad > 0.0 {
            let sweep: f64 = self.lever_arms(chain).iter().zip(delta.iter()).map(|(l, d)| l * d.abs()).sum();
            n = n.max((sweep / (2.0 * pad)).ceil());
        }
        let n = n as usize;
        // Two links can approach each other from both sides, hence twice the pad between links.
        let (mo, ms) = (self.margin + pad, self.margin + 2.0 * pad);
        (0..=n).all(|i| {
            let q = if i == n { *qb } else { qa + delta * (i as f64 / n as f64) };
            !self.check(chain, &q, mo, ms, None)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain() -> KinematicChain {
        KinematicChain::industrial_6dof()
    }

    fn tip_ball(radius: f64) -> Vec<LinkProxy> {
        // A small sphere at the torch tip, expressed in the flange frame.
        vec![LinkProxy { link: 6, shape: Primitive::Sphere { center: chain().tool.translation, radius } }]
    }

    fn sphere(name: &str, center: Vec3, radius: f64) -> Obstacle {
        Obstacle { name: name.into(), shape: Primitive::Sphere { center, radius }, attached: false }
    }

    #[test]
    fn empty_scene_never_collides() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Scene::empty();
        for _ in 0..100 {
            let q = JointConfig::from_fn(|_, _| rng.random_range(-3.0..3.0));
            assert!(!s.in_collision(&chain(), &q));
        }
    }

    #[test]
    fn obstacle_at_home_tip_collides() {
        let c = chain();
        let home = JointConfig::zeros();
        let tip = c.fk(&home).translation;
        let s = Scene::new(vec![sphere("ball", tip, 50.0)], tip_ball(5.0), 10.0).unwrap();
        assert!(s.in_collision(&c, &home));
        let contacts = s.collisions(&c, &home);
        assert_eq!(contacts.len(), 1);
        assert_eq!(contacts[0].other, Body::Obstacle("ball".into()));
    }

    #[test]
    fn margin_boundary_on_spheres() {
        let c = chain();
        let home = JointConfig::zeros();
        let tip = c.fk(&home).translation;
        let (r1, r2, m) = (5.0, 40.0, 10.0);
        for (gap, expect) in [(1.0, false), (-1.0, true)] {
            let center = tip + Vec3::new(0.0, r1 + r2 + m + gap, 0.0);
            let s = Scene::new(vec![sphere("ball", center, r2)], tip_ball(r1), m).unwrap();
            assert_eq!(s.in_collision(&c, &home), expect, "gap {gap}");
        }
    }

    #[test]
    fn workpiece_update_is_absolute() {
        let o = Obstacle {
            name: "pipe".into(),
            shape: Primitive::Cylinder { pose: RigidTransform::from_translation(1.0, 2.0, 3.0), radius: 5.0, half_length: 9.0 },
            attached: true,
        };
        let bench = Obstacle { attached: false, ..sphere("bench", Vec3::zeros(), 1.0) };
        let s = Scene::new(vec![o, bench], vec![], 10.0).unwrap();
        let shifted = s.update_workpiece(&RigidTransform::from_translation(200.0, 0.0, 0.0));
        let pose = |s: &Scene| match s.posed_obstacles().next().unwrap().1 {
            Primitive::Cylinder { pose, .. } => pose.translation,
            _ => unreachable!(),
        };
        assert_eq!(pose(&shifted), Vec3::new(201.0, 2.0, 3.0));
        assert_eq!(shifted.posed_obstacles().nth(1).unwrap().1, s.posed_obstacles().nth(1).unwrap().1);
        let t1 = RigidTransform::from_axis_angle(&Vec3::x(), 0.3);
        let t2 = RigidTransform::from_translation(-5.0, 7.0, 1.0);
        let twice = s.update_workpiece(&t1).update_workpiece(&t2);
        assert_eq!(pose(&twice), pose(&s.update_workpiece(&t2)));
        assert_eq!(pose(&s.update_workpiece(&RigidTransform::identity())), pose(&s));
    }

    #[test]
    fn rejects_duplicate_names_and_bad_proxies() {
        let a = sphere("x", Vec3::zeros(), 1.0);
        assert_eq!(Scene::new(vec![a.clone(), a], vec![], 0.0).unwrap_err(), SceneError::DuplicateName("x".into()));
        let bad = LinkProxy { link: 2, shape: Primitive::Box { pose: RigidTransform::identity(), half_extents: Vec3::repeat(1.0) } };
        assert!(matches!(Scene::new(vec![], vec![bad], 0.0), Err(SceneError::InvalidProxy { index: 0, .. })));
    }

    #[test]
    fn motion_through_obstacle_is_invalid() {
        let c = chain();
        let qa = JointConfig::from_column_slice(&[-0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let qb = JointConfig::from_column_slice(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mid = c.fk(&JointConfig::zeros()).translation;
        let s = Scene::new(vec![sphere("block", mid, 30.0)], tip_ball(5.0), 10.0).unwrap();
        assert!(!s.in_collision(&c, &qa) && !s.in_collision(&c, &qb));
        let p = MotionCheckParams::default();
        assert!(!s.motion_valid(&c, &qa, &qb, &p));
        assert!(!s.motion_valid(&c, &qb, &qa, &p));
        assert!(s.motion_valid(&c, &qa, &qa, &p));
    }

    #[test]
    fn self_collision_respects_exemptions() {
        let c = chain();
        let links = vec![
            LinkProxy { link: 1, shape: Primitive::Sphere { center: Vec3::zeros(), radius: 10.0 } },
            LinkProxy { link: 3, shape: Primitive::Sphere { center: Vec3::zeros(), radius: 2000.0 } },
        ];
        let s = Scene::new(vec![], links, 0.0).unwrap();
        let q = JointConfig::zeros();
        assert_eq!(s.collisions(&c, &q), vec![Contact { link: 1, other: Body::Link(3), distance: s.collisions(&c, &q)[0].distance }]);
        assert!(!s.with_exempt_pairs(&[(3, 1)]).in_collision(&c, &q));
    }

    #[test]
    fn padded_check_certifies_dense_resampling() {
        let c = chain();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let links = vec![
            LinkProxy { link: 3, shape: Primitive::Capsule { a: Vec3::zeros(), b: Vec3::new(0.0, 0.0, 600.0), radius: 60.0 } },
            LinkProxy { link: 6, shape: Primitive::Capsule { a: Vec3::zeros(), b: Vec3::new(0.0, 0.0, 220.0), radius: 20.0 } },
        ];
        let obstacles = vec![sphere("s", Vec3::new(900.0, 300.0, 900.0), 150.0), sphere("t", Vec3::new(700.0, -400.0, 700.0), 120.0)];
        let s = Scene::new(obstacles, links, 10.0).unwrap();
        let coarse = MotionCheckParams { resolution: 0.05, clearance_pad: 5.0 };
        let fine = MotionCheckParams { resolution: 0.0005, clearance_pad: 0.0 };
        let mut checked = 0;
        for _ in 0..300 {
            let qa = JointConfig::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let qb = qa + JointConfig::from_fn(|_, _| rng.random_range(-0.2..0.2));
            if s.motion_valid(&c, &qa, &qb, &coarse) {
                checked += 1;
                assert!(s.motion_valid(&c, &qa, &qb, &fine));
            }
        }
        assert!(checked > 50, "{checked}");
    }
}
