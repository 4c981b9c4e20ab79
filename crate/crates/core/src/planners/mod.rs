//! Sampling-based planners in joint space.
//!
//! All planners are deterministic for a given seed: they stop on iteration
//! or sample budgets, and the wall-clock budget is only a safety cap that
//! turns into [`PlanError::Timeout`].

mod connect;
mod lbt_rrt;
mod prm_star;
mod rrt_star;
mod transition;

pub use connect::{plan_bitrrt, plan_rrt_connect};
pub use lbt_rrt::plan_lbt_rrt;
pub use prm_star::plan_prm_star;
pub use rrt_star::plan_rrt_star;
pub use transition::{transition_test, TransitionParams, TransitionState};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::path_length;
use crate::kinematics::{JointConfig, KinematicChain, DOF};
use crate::scene::{MotionCheckParams, Scene};

/// Configuration cost `c(q) ≥ 0`.
pub type CostFn<'a> = &'a (dyn Fn(&JointConfig) -> f64 + Sync);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    BiTrrt,
    RrtConnect,
    RrtStar,
    PrmStar,
    LbtRrt,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] =
        [PlannerKind::BiTrrt, PlannerKind::RrtConnect, PlannerKind::RrtStar, PlannerKind::PrmStar, PlannerKind::LbtRrt];

    pub fn name(&self) -> &'static str {
        match self {
            PlannerKind::BiTrrt => "bitrrt",
            PlannerKind::RrtConnect => "rrtconnect",
            PlannerKind::RrtStar => "rrtstar",
            PlannerKind::PrmStar => "prmstar",
            PlannerKind::LbtRrt => "lbtrrt",
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown planner '{s}' (expected bitrrt, rrtconnect, rrtstar, prmstar or lbtrrt)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSettings {
    /// Largest joint-space distance added by one tree extension, rad.
    pub extension_step: f64,
    pub goal_bias: f64,
    /// Sampling iterations before giving up (tree planners) or stopping (anytime planners).
    pub max_iterations: usize,
    /// Roadmap size for PRM*.
    pub prm_samples: usize,
    pub motion: MotionCheckParams,
    /// Per-joint weights of the joint-space metric.
    pub joint_weights: [f64; DOF],
    /// Joints the planner may move; the others stay at their start value.
    pub active_joints: [bool; DOF],
    pub transition: TransitionParams,
    /// Upper bound on the RRT* / LBT-RRT neighbourhood radius, rad.
    pub max_radius: f64,
    /// LBT-RRT approximation factor `ε`.
    pub lbt_epsilon: f64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            extension_step: 0.1,
            goal_bias: 0.05,
            max_iterations: 5000,
            prm_samples: 1000,
            motion: MotionCheckParams { resolution: 0.01, clearance_pad: 3.0 },
            joint_weights: [1.0; DOF],
            active_joints: [true; DOF],
            transition: TransitionParams::default(),
            max_radius: 0.5,
            lbt_epsilon: 0.4,
        }
    }
}

pub struct PlanRequest<'a> {
    pub start: JointConfig,
    pub goal: JointConfig,
    /// `None` plans with a constant cost.
    pub cost: Option<CostFn<'a>>,
    /// Wall-clock safety cap, seconds.
    pub time_budget: f64,
    pub seed: u64,
    pub settings: PlannerSettings,
}

impl<'a> PlanRequest<'a> {
    pub fn new(start: JointConfig, goal: JointConfig, seed: u64) -> Self {
        Self { start, goal, cost: None, time_budget: 5.0, seed, settings: PlannerSettings::default() }
    }

    pub fn with_cost(mut self, cost: CostFn<'a>) -> Self {
        self.cost = Some(cost);
        self
    }

    pub fn with_settings(mut self, settings: PlannerSettings) -> Self {
        self.settings = settings;
        self
    }
}

/// Waypoints from start to goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub waypoints: Vec<JointConfig>,
}

impl Path {
    /// Joint-space length (rad).
    pub fn length(&self) -> f64 {
        path_length(&self.waypoints)
    }

    /// Index of the first segment that fails `motion_valid`, if any. A single
    /// waypoint is checked on its own.
    pub fn first_invalid_segment(&self, scene: &Scene, chain: &KinematicChain, params: &MotionCheckParams) -> Option<usize> {
        if self.waypoints.len() == 1 {
            let q = &self.waypoints[0];
            return (!scene.motion_valid(chain, q, q, params)).then_some(0);
        }
        self.waypoints.windows(2).position(|w| !scene.motion_valid(chain, &w[0], &w[1], params))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlanStats {
    pub planner: String,
    pub seed: u64,
    pub iterations: usize,
    pub nodes: usize,
    pub motion_checks: usize,
    pub wall_time: f64,
    pub waypoints: usize,
    pub path_length: f64,
    /// Best solution cost after each iteration once one exists (anytime planners).
    #[serde(skip)]
    pub best_cost_trace: Vec<f64>,
    pub final_temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub path: Path,
    pub stats: PlanStats,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("no path within the planning budget")]
    Timeout(Box<PlanStats>),
    #[error("start and goal are not connected in the roadmap")]
    Disconnected(Box<PlanStats>),
}

impl PlanError {
    pub fn stats(&self) -> Option<&PlanStats> {
        match self {
            PlanError::Timeout(s) | PlanError::Disconnected(s) => Some(s),
            PlanError::InvalidEndpoint(_) => None,
        }
    }
}

pub fn plan(kind: PlannerKind, scene: &Scene, chain: &KinematicChain, request: &PlanRequest) -> Result<PlanOutput, PlanError> {
    match kind {
        PlannerKind::BiTrrt => plan_bitrrt(scene, chain, request),
        PlannerKind::RrtConnect => plan_rrt_connect(scene, chain, request),
        PlannerKind::RrtStar => plan_rrt_star(scene, chain, request),
        PlannerKind::PrmStar => plan_prm_star(scene, chain, request),
        PlannerKind::LbtRrt => plan_lbt_rrt(scene, chain, request),
    }
}

/// Tree vertex.
#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub q: JointConfig,
    pub parent: Option<usize>,
    /// Configuration cost (connect planners) or cost-to-come (optimising planners).
    pub cost: f64,
}

/// Shared planner plumbing: sampling, metric, validity checks, budget.
pub(crate) struct Ctx<'a> {
    pub scene: &'a Scene,
    pub chain: &'a KinematicChain,
    pub req: &'a PlanRequest<'a>,
    pub rng: ChaCha8Rng,
    lo: JointConfig,
    hi: JointConfig,
    sqrt_weights: JointConfig,
    started: Instant,
    pub stats: PlanStats,
}

impl<'a> Ctx<'a> {
    pub fn new(kind: PlannerKind, scene: &'a Scene, chain: &'a KinematicChain, req: &'a PlanRequest<'a>) -> Result<Self, PlanError> {
        let s = &req.settings;
        let mut lo = chain.lower();
        let mut hi = chain.upper();
        for j in 0..DOF {
            if !s.active_joints[j] {
                if req.goal[j] != req.start[j] {
                    return Err(PlanError::InvalidEndpoint(format!("locked joint {} differs between start and goal", j + 1)));
                }
                lo[j] = req.start[j];
                hi[j] = req.start[j];
            }
        }
        let mut ctx = Self {
            scene,
            chain,
            req,
            rng: ChaCha8Rng::seed_from_u64(req.seed),
            lo,
            hi,
            sqrt_weights: JointConfig::from_fn(|j, _| s.joint_weights[j].sqrt()),
            started: Instant::now(),
            stats: PlanStats { planner: kind.name().to_string(), seed: req.seed, ..Default::default() },
        };
        for (name, q) in [("start", &req.start), ("goal", &req.goal)] {
            if !q.iter().all(|v| v.is_finite()) || !chain.within_limits(q) {
                return Err(PlanError::InvalidEndpoint(format!("{name} is outside the joint limits")));
            }
            if !ctx.valid(q) {
                return Err(PlanError::InvalidEndpoint(format!("{name} is in collision")));
            }
        }
        Ok(ctx)
    }

    pub fn settings(&self) -> &PlannerSettings {
        &self.req.settings
    }

    pub fn dist(&self, a: &JointConfig, b: &JointConfig) -> f64 {
        (a - b).component_mul(&self.sqrt_weights).norm()
    }

    pub fn sample(&mut self) -> JointConfig {
        let (lo, hi) = (self.lo, self.hi);
        JointConfig::from_fn(|j, _| if lo[j] < hi[j] { self.rng.random_range(lo[j]..=hi[j]) } else { lo[j] })
    }

    /// `to` if within `step` of `from`, otherwise the point `step` along the way.
    pub fn steer(&self, from: &JointConfig, to: &JointConfig, step: f64) -> JointConfig {
        let d = self.dist(from, to);
        if d <= step {
            *to
        } else {
            from + (to - from) * (step / d)
        }
    }

    pub fn cost(&self, q: &JointConfig) -> f64 {
        self.req.cost.map_or(0.0, |c| c(q))
    }

    pub fn valid(&mut self, q: &JointConfig) -> bool {
        !self.scene.in_collision_padded(self.chain, q, self.req.settings.motion.clearance_pad)
    }

    pub fn edge(&mut self, a: &JointConfig, b: &JointConfig) -> bool {
        self.stats.motion_checks += 1;
        self.scene.motion_valid(self.chain, a, b, &self.req.settings.motion)
    }

    pub fn expired(&self) -> bool {
        self.started.elapsed().as_secs_f64() > self.req.time_budget
    }

    pub fn nearest(&self, nodes: &[Node], q: &JointConfig) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, n) in nodes.iter().enumerate() {
            let d = self.dist(&n.q, q);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Indices of nodes within `radius` of `q`, ascending.
    pub fn near(&self, nodes: &[Node], q: &JointConfig, radius: f64) -> Vec<usize> {
        (0..nodes.len()).filter(|&i| self.dist(&nodes[i].q, q) <= radius).collect()
    }

    /// Neighbourhood radius `min(γ (log n / n)^(1/d), max_radius)` with γ from the free-space volume bound.
    pub fn rewire_radius(&self, n: usize) -> f64 {
        let d = (0..DOF).filter(|&j| self.hi[j] > self.lo[j]).count().max(1) as f64;
        let volume: f64 = (0..DOF)
            .filter(|&j| self.hi[j] > self.lo[j])
            .map(|j| (self.hi[j] - self.lo[j]) * self.sqrt_weights[j])
            .product();
        let unit_ball = std::f64::consts::PI.powf(d / 2.0) / gamma_fn(d / 2.0 + 1.0);
        let gamma = 2.0 * (1.0 + 1.0 / d).powf(1.0 / d) * (volume / unit_ball).powf(1.0 / d);
        let n = n.max(2) as f64;
        (gamma * (n.ln() / n).powf(1.0 / d)).min(self.settings().max_radius)
    }

    pub fn trivial(&self) -> bool {
        self.req.start == self.req.goal
    }

    pub fn finish(mut self, waypoints: Vec<JointConfig>, nodes: usize) -> PlanOutput {
        let path = Path { waypoints };
        self.stats.nodes = nodes;
        self.stats.waypoints = path.waypoints.len();
        self.stats.path_length = path.length();
        self.stats.wall_time = self.started.elapsed().as_secs_f64();
        PlanOutput { path, stats: self.stats }
    }

    pub fn into_stats(mut self, nodes: usize) -> Box<PlanStats> {
        self.stats.nodes = nodes;
        self.stats.wall_time = self.started.elapsed().as_secs_f64();
        Box::new(self.stats)
    }
}

/// Γ for half-integer and integer arguments ≥ 1/2.
fn gamma_fn(x: f64) -> f64 {
    if (x - 0.5).abs() < 1e-12 {
        std::f64::consts::PI.sqrt()
    } else if x <= 1.0 + 1e-12 {
        1.0
    } else {
        (x - 1.0) * gamma_fn(x - 1.0)
    }
}

/// Configurations from the root to `i`.
pub(crate) fn branch(nodes: &[Node], mut i: usize) -> Vec<JointConfig> {
    let mut out = vec![nodes[i].q];
    while let Some(p) = nodes[i].parent {
        out.push(nodes[p].q);
        i = p;
    }
    out.reverse();
    out
}
