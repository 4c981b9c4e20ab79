//! The workcell configuration file.
//!
//! A single TOML document describing the arm, the scene, the perception
//! pipeline, planner parameters and named goal poses. Lengths are mm; angles
//! are degrees where the key ends in `_deg` and radians otherwise. Relative
//! file paths resolve against the config file's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tkyweld::cost::GoalSpec;
use tkyweld::geometry::{io::read_mesh, quaternion_from_euler, Aabb, RigidTransform, TriangleMesh, Vec3};
use tkyweld::kinematics::{DhJoint, IkParams, JointConfig, KinematicChain, DOF};
use tkyweld::perception::{DonParams, IcpParams, VirtualCameraRig};
use tkyweld::planners::{PlannerKind, PlannerSettings};
use tkyweld::scene::{LinkProxy, Obstacle, Primitive, Scene};
use tkyweld::workcell::{approach_pose, solve_approach};

use crate::error::{file_err, CliError};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkcellConfig {
    /// Master seed; every stochastic stage derives its stream from it.
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub chain: ChainConfig,
    pub workpiece: WorkpieceConfig,
    pub scene: SceneConfig,
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub ik: IkParams,
    #[serde(default)]
    pub planner: PlannerConfig,
    pub goals: Vec<GoalConfig>,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_trials() -> usize {
    15
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Standard DH table; the built-in six-axis arm when absent.
    #[serde(default)]
    pub joints: Option<Vec<JointSpec>>,
    #[serde(default = "default_tool")]
    pub tool: [f64; 3],
    #[serde(default)]
    pub home_deg: [f64; DOF],
}

fn default_tool() -> [f64; 3] {
    [0.0, 0.0, 250.0]
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { joints: None, tool: default_tool(), home_deg: [0.0; DOF] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub a: f64,
    pub alpha_deg: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset_deg: f64,
    pub min_deg: f64,
    pub max_deg: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub position: [f64; 3],
    /// Roll, pitch, yaw about fixed x, y, z.
    #[serde(default)]
    pub rpy_deg: [f64; 3],
}

impl PoseSpec {
    pub fn transform(&self) -> RigidTransform {
        let [r, p, y] = self.rpy_deg.map(f64::to_radians);
        RigidTransform::new(quaternion_from_euler(&Vec3::new(y, p, r)), Vec3::from(self.position))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkpieceConfig {
    /// PLY or STL surface of the workpiece, in its own frame.
    pub mesh: PathBuf,
    /// Where that frame sits in the world before registration.
    #[serde(default)]
    pub nominal_pose: PoseSpec,
}

/// Human-facing primitive description.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum ShapeSpec {
    Sphere { center: [f64; 3], radius: f64 },
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64 },
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
        #[serde(default)]
        rpy_deg: [f64; 3],
    },
    /// Solid cylinder whose axis runs from `a` to `b`.
    Cylinder { a: [f64; 3], b: [f64; 3], radius: f64 },
}

impl ShapeSpec {
    pub fn primitive(&self) -> Primitive {
        match self {
            ShapeSpec::Sphere { center, radius } => Primitive::Sphere { center: Vec3::from(*center), radius: *radius },
            ShapeSpec::Capsule { a, b, radius } => {
                Primitive::Capsule { a: Vec3::from(*a), b: Vec3::from(*b), radius: *radius }
            }
            ShapeSpec::Box { center, half_extents, rpy_deg } => Primitive::Box {
                pose: PoseSpec { position: *center, rpy_deg: *rpy_deg }.transform(),
                half_extents: Vec3::from(*half_extents),
            },
            ShapeSpec::Cylinder { a, b, radius } => Primitive::cylinder_between(&Vec3::from(*a), &Vec3::from(*b), *radius),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ObstacleSpec {
    pub name: String,
    /// Moves with the workpiece when registration updates its pose.
    #[serde(default)]
    pub attached: bool,
    #[serde(flatten)]
    pub shape: ShapeSpec,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LinkSpec {
    pub link: usize,
    #[serde(flatten)]
    pub shape: ShapeSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub exempt_pairs: Vec<[usize; 2]>,
    pub obstacles: Vec<ObstacleSpec>,
    pub links: Vec<LinkSpec>,
}

fn default_margin() -> f64 {
    tkyweld::workcell::DEFAULT_MARGIN
}

/// Virtual cameras on a truncated icosahedron around the workpiece.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigConfig {
    #[serde(default = "default_resolution")]
    pub width: usize,
    #[serde(default = "default_resolution")]
    pub height: usize,
    #[serde(default = "default_hfov")]
    pub hfov_deg: f64,
    /// Rig sphere radius as a multiple of the workpiece's bounding radius.
    #[serde(default = "default_radius_factor")]
    pub radius_factor: f64,
}

fn default_resolution() -> usize {
    128
}

fn default_hfov() -> f64 {
    60.0
}

fn default_radius_factor() -> f64 {
    3.0
}

impl Default for RigConfig {
    fn default() -> Self {
        Self { width: default_resolution(), height: default_resolution(), hfov_deg: default_hfov(), radius_factor: default_radius_factor() }
    }
}

/// The synthetic depth sensor: same sphere as the CAD rig, its own image size.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    #[serde(default = "default_resolution")]
    pub width: usize,
    #[serde(default = "default_resolution")]
    pub height: usize,
    /// Keep only viewpoints above this height (mm); a real sensor cannot look up through the bench.
    #[serde(default)]
    pub min_height: Option<f64>,
    /// Standard deviation of the Gaussian range noise, mm.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    /// Obstacles besides the workpiece that show up in the sensor cloud.
    #[serde(default)]
    pub extras: Vec<String>,
}

fn default_noise() -> f64 {
    2.0
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            width: default_resolution(),
            height: default_resolution(),
            min_height: None,
            noise_sigma: default_noise(),
            extras: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    #[serde(default)]
    pub rig: RigConfig,
    #[serde(default)]
    pub sensor: SensorConfig,
    /// Cartesian segmentation box applied to sensor clouds.
    pub segment_min: [f64; 3],
    pub segment_max: [f64; 3],
    /// Voxel edge for downsampling before ICP, mm; 0 disables.
    #[serde(default)]
    pub voxel: f64,
    #[serde(default)]
    pub don: DonParams,
    #[serde(default)]
    pub icp: IcpParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// `c_pos + orientation_weight · c_orient` relative to the goal pose.
    #[default]
    Pose,
    /// Constant cost: BiTRRT behaves as RRT-Connect.
    Constant,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    /// Wall-clock safety cap per query, seconds.
    #[serde(default = "default_budget")]
    pub time_budget: f64,
    #[serde(default)]
    pub cost: CostMode,
    /// mm per unit of `c_orient` in the planning cost.
    #[serde(default = "default_orientation_weight")]
    pub orientation_weight: f64,
    /// `n` of the integral-cost sum.
    #[serde(default = "default_subdivisions")]
    pub ic_subdivisions: usize,
    #[serde(default)]
    pub settings: PlannerSettings,
}

fn default_budget() -> f64 {
    5.0
}

fn default_orientation_weight() -> f64 {
    100.0
}

fn default_subdivisions() -> usize {
    100
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            time_budget: default_budget(),
            cost: CostMode::default(),
            orientation_weight: default_orientation_weight(),
            ic_subdivisions: default_subdivisions(),
            settings: PlannerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalConfig {
    pub name: String,
    /// `home` or the name of an earlier goal; the query starts there.
    #[serde(default = "default_from")]
    pub from: String,
    /// Torch tip position, mm.
    pub position: [f64; 3],
    /// Torch axis at the goal (normalized on load).
    pub direction: [f64; 3],
}

fn default_from() -> String {
    "home".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_planners")]
    pub planners: Vec<PlannerKind>,
    /// Largest acceptable coefficient of variation of BiTRRT's IC(c_pos).
    #[serde(default = "default_cv_bound")]
    pub cv_bound: f64,
}

fn default_planners() -> Vec<PlannerKind> {
    PlannerKind::ALL.to_vec()
}

fn default_cv_bound() -> f64 {
    0.3
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { planners: default_planners(), cv_bound: default_cv_bound() }
    }
}

/// A goal resolved to joint space.
#[derive(Debug, Clone)]
pub struct SolvedGoal {
    pub name: String,
    pub from: String,
    pub start: JointConfig,
    pub q: JointConfig,
    /// Torch tip pose at `q` (what the cost functions measure against).
    pub spec: GoalSpec,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl WorkcellConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(file_err(path))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validating or resolving paths.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(bad("trials must be at least 1"));
        }
        let mesh = self.resolve(&self.workpiece.mesh);
        if !mesh.is_file() {
            return Err(bad(format!("workpiece mesh {} does not exist", mesh.display())));
        }
        self.chain()?;
        let home = self.home();
        if !self.chain()?.within_limits(&home) {
            return Err(bad("home configuration is outside the joint limits"));
        }
        if !(self.scene.margin >= 0.0) {
            return Err(bad("scene.margin must be non-negative"));
        }
        self.scene()?;
        let p = &self.perception;
        if p.rig.width == 0 || p.rig.height == 0 || p.sensor.width == 0 || p.sensor.height == 0 {
            return Err(bad("camera image sizes must be positive"));
        }
        if !(p.rig.hfov_deg > 0.0 && p.rig.hfov_deg < 180.0) {
            return Err(bad("rig.hfov_deg must lie in (0, 180)"));
        }
        if !(p.rig.radius_factor > 1.0) {
            return Err(bad("rig.radius_factor must exceed 1"));
        }
        if !(p.sensor.noise_sigma >= 0.0) || !(p.voxel >= 0.0) {
            return Err(bad("noise_sigma and voxel must be non-negative"));
        }
        if !self.segment_bounds().is_valid() {
            return Err(bad("segment_min must not exceed segment_max"));
        }
        for name in &p.sensor.extras {
            if !self.scene.obstacles.iter().any(|o| &o.name == name) {
                return Err(bad(format!("sensor.extras names unknown obstacle '{name}'")));
            }
        }
        p.don.validate().map_err(|e| bad(e.to_string()))?;
        if p.icp.max_iterations == 0 || !(p.icp.correspondence_cutoff > 0.0) || !(p.icp.epsilon >= 0.0) {
            return Err(bad("icp needs max_iterations ≥ 1, correspondence_cutoff > 0, epsilon ≥ 0"));
        }
        self.ik.validate().map_err(|e| bad(e.to_string()))?;
        let pl = &self.planner;
        let s = &pl.settings;
        if !(pl.time_budget > 0.0) || pl.ic_subdivisions == 0 || !(pl.orientation_weight >= 0.0) {
            return Err(bad("planner needs time_budget > 0, ic_subdivisions ≥ 1, orientation_weight ≥ 0"));
        }
        if !(s.extension_step > 0.0)
            || !(0.0..=1.0).contains(&s.goal_bias)
            || s.max_iterations == 0
            || !(s.motion.resolution > 0.0)
            || !(s.motion.clearance_pad >= 0.0)
            || !(s.max_radius > 0.0)
            || !(s.lbt_epsilon >= 0.0)
            || s.joint_weights.iter().any(|w| !(*w > 0.0))
            || !(s.transition.rate > 1.0)
            || s.transition.max_fails == 0
            || !(s.transition.initial_temperature_factor > 0.0)
        {
            return Err(bad("planner settings out of range"));
        }
        if self.goals.is_empty() {
            return Err(bad("at least one goal is required"));
        }
        let mut seen = HashSet::from(["home".to_string()]);
        for g in &self.goals {
            if !seen.contains(&g.from) {
                return Err(bad(format!("goal '{}' starts from '{}', which is not home or an earlier goal", g.name, g.from)));
            }
            if !seen.insert(g.name.clone()) {
                return Err(bad(format!("duplicate goal name '{}'", g.name)));
            }
            if !(Vec3::from(g.direction).norm() > 0.0) {
                return Err(bad(format!("goal '{}' has a zero direction", g.name)));
            }
        }
        if self.bench.planners.is_empty() || !(self.bench.cv_bound > 0.0) {
            return Err(bad("bench needs at least one planner and cv_bound > 0"));
        }
        Ok(())
    }

    pub fn chain(&self) -> Result<KinematicChain, CliError> {
        let tool = RigidTransform::from_translation(self.chain.tool[0], self.chain.tool[1], self.chain.tool[2]);
        let Some(joints) = &self.chain.joints else {
            return Ok(KinematicChain { tool, ..KinematicChain::industrial_6dof() });
        };
        if joints.len() != DOF {
            return Err(bad(format!("chain.joints must list {DOF} joints, found {}", joints.len())));
        }
        let dh: Vec<DhJoint> = joints
            .iter()
            .map(|j| DhJoint {
                a: j.a,
                alpha: j.alpha_deg.to_radians(),
                d: j.d,
                theta_offset: j.theta_offset_deg.to_radians(),
                lo: j.min_deg.to_radians(),
                hi: j.max_deg.to_radians(),
            })
            .collect();
        let arr: [DhJoint; DOF] = dh.try_into().expect("length checked");
        KinematicChain::new(arr, tool).map_err(|e| bad(e.to_string()))
    }

    pub fn home(&self) -> JointConfig {
        JointConfig::from_iterator(self.chain.home_deg.iter().map(|d| d.to_radians()))
    }

    pub fn obstacles(&self) -> Vec<Obstacle> {
        self.scene
            .obstacles
            .iter()
            .map(|o| Obstacle { name: o.name.clone(), shape: o.shape.primitive(), attached: o.attached })
            .collect()
    }

    pub fn scene(&self) -> Result<Scene, CliError> {
        let links = self.scene.links.iter().map(|l| LinkProxy { link: l.link, shape: l.shape.primitive() }).collect();
        let pairs: Vec<(usize, usize)> = self.scene.exempt_pairs.iter().map(|p| (p[0], p[1])).collect();
        Ok(Scene::new(self.obstacles(), links, self.scene.margin)
            .map_err(|e| bad(e.to_string()))?
            .with_exempt_pairs(&pairs))
    }

    /// Workpiece surface at its nominal world pose.
    pub fn workpiece_mesh(&self) -> Result<TriangleMesh, CliError> {
        let mesh = read_mesh(&self.resolve(&self.workpiece.mesh))?;
        Ok(mesh.transformed(&self.workpiece.nominal_pose.transform()))
    }

    /// Workpiece plus the configured extras, as a sensor would see them.
    pub fn sensor_mesh(&self) -> Result<TriangleMesh, CliError> {
        let mut mesh = self.workpiece_mesh()?;
        for o in self.obstacles().iter().filter(|o| self.perception.sensor.extras.contains(&o.name)) {
            mesh.merge(&o.shape.to_mesh());
        }
        Ok(mesh)
    }

    /// All 60 truncated-icosahedron views around the workpiece.
    pub fn cad_rig(&self, workpiece: &TriangleMesh) -> VirtualCameraRig {
        let r = &self.perception.rig;
        let center = workpiece.bounds().center();
        let radius = r.radius_factor * workpiece.bounding_radius(&center);
        VirtualCameraRig::truncated_icosahedron(center, radius, r.width, r.height, r.hfov_deg.to_radians())
    }

    /// The sensor's viewpoints: the CAD rig's sphere at the sensor resolution,
    /// optionally restricted to views above `min_height`.
    pub fn sensor_rig(&self, workpiece: &TriangleMesh) -> VirtualCameraRig {
        let s = &self.perception.sensor;
        let rig = VirtualCameraRig { width: s.width, height: s.height, ..self.cad_rig(workpiece) };
        match s.min_height {
            Some(h) => rig.retain(|p| p.z > h),
            None => rig,
        }
    }

    pub fn segment_bounds(&self) -> Aabb {
        Aabb::new(Vec3::from(self.perception.segment_min), Vec3::from(self.perception.segment_max))
    }

    /// Goals in file order, each solved by IK seeded at its start configuration.
    pub fn solve_goals(&self) -> Result<Vec<SolvedGoal>, CliError> {
        let chain = self.chain()?;
        let mut solved: Vec<SolvedGoal> = Vec::new();
        for g in &self.goals {
            let start = if g.from == "home" {
                self.home()
            } else {
                solved.iter().find(|s| s.name == g.from).expect("validated").q
            };
            let dir = Vec3::from(g.direction).normalize();
            let sol = solve_approach(&chain, &start, Vec3::from(g.position), &dir, &self.ik)
                .map_err(|source| CliError::Goal { goal: g.name.clone(), source })?;
            let target = approach_pose(&chain.fk(&start), Vec3::from(g.position), &dir);
            solved.push(SolvedGoal {
                name: g.name.clone(),
                from: g.from.clone(),
                start,
                q: sol.q,
                spec: GoalSpec::from_pose(&target),
            });
        }
        Ok(solved)
    }
}
