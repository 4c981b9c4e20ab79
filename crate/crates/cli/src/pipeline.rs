//! The experiments as in-memory functions; `commands` adds the file I/O.

use rayon::prelude::*;
use serde::Serialize;
use tkyweld::cost::{c_orient, c_pos, evaluate_path, CostReport};
use tkyweld::geometry::{euler_from_quaternion, PointCloud, RigidTransform, TriangleMesh};
use tkyweld::kinematics::{JointConfig, KinematicChain};
use tkyweld::perception::{don_filter, icp, raytrace_cloud, robustness_sweep, segment_box, IcpResult, SweepAxis, SweepEntry};
use tkyweld::planners::{plan, PlanError, PlanOutput, PlanRequest, PlanStats, PlannerKind};
use tkyweld::scene::{MotionCheckParams, Scene};
use tkyweld::workcell::sensor_cloud;

use crate::config::{CostMode, SolvedGoal, WorkcellConfig};
use crate::error::CliError;
use crate::seeds::{stream_seed, trial_seed};

/// Rigid offset injected into the sensed scene: a yaw about the vertical axis
/// through the workpiece centre, then a translation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Offset {
    /// mm
    pub translation: [f64; 3],
    /// Degrees.
    pub yaw_deg: f64,
}

impl Offset {
    pub fn transform(&self, workpiece: &TriangleMesh) -> RigidTransform {
        let [x, y, z] = self.translation;
        RigidTransform::from_translation(x, y, z)
            .compose(&RigidTransform::yaw_about(&workpiece.bounds().center(), self.yaw_deg.to_radians()))
    }
}

/// Raytraced CAD cloud of the workpiece at its nominal pose, downsampled.
pub fn cad_cloud(cfg: &WorkcellConfig) -> Result<PointCloud, CliError> {
    let mesh = cfg.workpiece_mesh()?;
    let cloud = raytrace_cloud(&mesh, &cfg.cad_rig(&mesh)).map_err(CliError::Perception)?;
    Ok(downsample(&cloud, cfg.perception.voxel))
}

/// Noisy cloud of the workpiece and the configured extras, all moved by `offset`.
pub fn synth_sensor(cfg: &WorkcellConfig, offset: &Offset, master_seed: u64) -> Result<PointCloud, CliError> {
    let workpiece = cfg.workpiece_mesh()?;
    let rig = cfg.sensor_rig(&workpiece);
    if rig.viewpoints.is_empty() {
        return Err(CliError::Config("no sensor viewpoint lies above perception.sensor.min_height".into()));
    }
    let noise_seed = stream_seed(master_seed, "sensor");
    sensor_cloud(&cfg.sensor_mesh()?, &rig, &offset.transform(&workpiece), cfg.perception.sensor.noise_sigma, noise_seed)
        .map_err(CliError::Perception)
}

fn downsample(cloud: &PointCloud, voxel: f64) -> PointCloud {
    if voxel > 0.0 {
        cloud.voxel_downsample(voxel)
    } else {
        cloud.clone()
    }
}

/// Point counts after each preprocessing stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageCounts {
    pub input: usize,
    pub segmented: usize,
    pub don_kept: usize,
    pub don_degenerate: usize,
    pub downsampled: usize,
}

/// Segmentation box, Difference-of-Normals filter, voxel downsampling.
pub fn preprocess(cfg: &WorkcellConfig, sensed: &PointCloud) -> Result<(PointCloud, StageCounts), CliError> {
    let segmented = segment_box(sensed, &cfg.segment_bounds());
    let don = don_filter(&segmented, &cfg.perception.don).map_err(CliError::Registration)?;
    let out = downsample(&don.cloud, cfg.perception.voxel);
    let counts = StageCounts {
        input: sensed.len(),
        segmented: segmented.len(),
        don_kept: don.cloud.len(),
        don_degenerate: don.degenerate,
        downsampled: out.len(),
    };
    Ok((out, counts))
}

#[derive(Debug, Clone, Serialize)]
pub struct PoseReport {
    pub translation_mm: [f64; 3],
    /// `[w, x, y, z]`
    pub quaternion_wxyz: [f64; 4],
    /// Intrinsic Z-Y-X: `[yaw, pitch, roll]`.
    pub euler_zyx_deg: [f64; 3],
    pub rotation_angle_deg: f64,
}

impl PoseReport {
    pub fn new(t: &RigidTransform) -> Self {
        let q = t.rotation;
        let e = euler_from_quaternion(&q).angles;
        Self {
            translation_mm: [t.translation.x, t.translation.y, t.translation.z],
            quaternion_wxyz: [q.w, q.i, q.j, q.k],
            euler_zyx_deg: [e.x.to_degrees(), e.y.to_degrees(), e.z.to_degrees()],
            rotation_angle_deg: t.rotation_angle().to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegistrationReport {
    pub stages: StageCounts,
    pub target_points: usize,
    /// Maps the processed sensor cloud onto the CAD cloud.
    pub icp_transform: PoseReport,
    /// The inverse: where the workpiece was sensed relative to its nominal pose.
    pub workpiece_pose: PoseReport,
    /// Mean over source points of `min(d², cutoff²)`, mm².
    pub convergence_score: f64,
    pub matched_mse: f64,
    pub matched_fraction: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub struct Registration {
    pub result: IcpResult,
    pub report: RegistrationReport,
}

/// Aligns the preprocessed `sensed` cloud onto `cad`.
pub fn register(cfg: &WorkcellConfig, sensed: &PointCloud, cad: &PointCloud) -> Result<Registration, CliError> {
    let (source, stages) = preprocess(cfg, sensed)?;
    let result = icp(&source, cad, &cfg.perception.icp).map_err(CliError::Registration)?;
    let report = RegistrationReport {
        stages,
        target_points: cad.len(),
        icp_transform: PoseReport::new(&result.transform),
        workpiece_pose: PoseReport::new(&result.transform.inverse()),
        convergence_score: result.convergence_score,
        matched_mse: result.matched_mse,
        matched_fraction: result.matched_fraction,
        iterations: result.iterations_run,
        converged: result.converged,
    };
    Ok(Registration { result, report })
}

/// `steps` evenly spaced offsets from 0 to `max` inclusive.
pub fn sweep_offsets(max: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps < 2 || !(max > 0.0) || !max.is_finite() {
        return Err(CliError::Usage("a sweep needs --steps ≥ 2 and a positive --max".into()));
    }
    Ok((0..steps).map(|k| max * k as f64 / (steps - 1) as f64).collect())
}

/// ICP robustness sweep of the preprocessed, un-offset sensor cloud against the
/// CAD cloud. `max` is mm for translations and degrees for yaw; the returned
/// entries carry offsets in the same units.
pub fn sweep(cfg: &WorkcellConfig, axis: SweepAxis, max: f64, steps: usize, master_seed: u64) -> Result<Vec<SweepEntry>, CliError> {
    let offsets = sweep_offsets(max, steps)?;
    let cad = cad_cloud(cfg)?;
    let sensed = synth_sensor(cfg, &Offset::default(), master_seed)?;
    let (source, _) = preprocess(cfg, &sensed)?;
    let yaw = axis == SweepAxis::Yaw;
    let internal: Vec<f64> = offsets.iter().map(|&o| if yaw { o.to_radians() } else { o }).collect();
    let mut entries = robustness_sweep(&source, &cad, axis, &internal, &cfg.perception.icp).map_err(CliError::Registration)?;
    for (e, o) in entries.iter_mut().zip(&offsets) {
        e.offset = *o;
    }
    Ok(entries)
}

/// Planning context shared by `plan` and `bench`.
pub struct Planning {
    pub chain: KinematicChain,
    pub scene: Scene,
    pub goals: Vec<SolvedGoal>,
}

impl Planning {
    pub fn new(cfg: &WorkcellConfig) -> Result<Self, CliError> {
        Ok(Self { chain: cfg.chain()?, scene: cfg.scene()?, goals: cfg.solve_goals()? })
    }

    pub fn goal(&self, name: &str) -> Result<&SolvedGoal, CliError> {
        self.goals.iter().find(|g| g.name == name).ok_or_else(|| {
            let names: Vec<&str> = self.goals.iter().map(|g| g.name.as_str()).collect();
            CliError::Usage(format!("unknown goal '{name}' (configured: {})", names.join(", ")))
        })
    }

    /// One query from the goal's start configuration.
    pub fn run(&self, cfg: &WorkcellConfig, kind: PlannerKind, goal: &SolvedGoal, seed: u64) -> Result<PlanOutput, PlanError> {
        let w = cfg.planner.orientation_weight;
        let spec = goal.spec;
        let chain = &self.chain;
        let cost = move |q: &JointConfig| c_pos(chain, q, &spec) + w * c_orient(chain, q, &spec);
        let mut req = PlanRequest::new(goal.start, goal.q, seed).with_settings(cfg.planner.settings);
        req.time_budget = cfg.planner.time_budget;
        if cfg.planner.cost == CostMode::Pose {
            req = req.with_cost(&cost);
        }
        plan(kind, &self.scene, &self.chain, &req)
    }

    /// Re-checks a path at half the planning resolution with no clearance pad.
    pub fn revalidate(&self, cfg: &WorkcellConfig, path: &[JointConfig]) -> Option<usize> {
        let params = validation_params(cfg);
        let p = tkyweld::planners::Path { waypoints: path.to_vec() };
        p.first_invalid_segment(&self.scene, &self.chain, &params)
    }
}

pub fn validation_params(cfg: &WorkcellConfig) -> MotionCheckParams {
    MotionCheckParams { resolution: cfg.planner.settings.motion.resolution / 2.0, clearance_pad: 0.0 }
}

/// One (planner, goal, trial) run.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub planner: PlannerKind,
    pub goal: String,
    pub goal_index: usize,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub wall_time: f64,
    pub stats: PlanStats,
    /// Set for successful runs.
    pub path: Option<Vec<JointConfig>>,
    pub costs: Option<CostReport>,
    /// First segment failing the half-resolution re-check.
    pub invalid_segment: Option<usize>,
    pub failure: Option<String>,
}

impl BenchRecord {
    pub fn path_length(&self) -> Option<f64> {
        self.costs.as_ref().map(|c| c.length)
    }

    pub fn ic_pos(&self) -> Option<f64> {
        self.costs.as_ref().map(|c| c.ic_pos)
    }

    pub fn ic_orient(&self) -> Option<f64> {
        self.costs.as_ref().map(|c| c.ic_orient)
    }
}

/// Every configured planner × goal × trial, sorted by (planner, goal order, trial).
pub fn bench(cfg: &WorkcellConfig, planning: &Planning, master_seed: u64) -> Vec<BenchRecord> {
    let mut jobs = Vec::new();
    for &kind in &cfg.bench.planners {
        for (gi, goal) in planning.goals.iter().enumerate() {
            for trial in 0..cfg.trials {
                jobs.push((kind, gi, goal, trial));
            }
        }
    }
    let mut records: Vec<BenchRecord> = jobs
        .into_par_iter()
        .map(|(kind, gi, goal, trial)| run_trial(cfg, planning, kind, gi, goal, trial, master_seed))
        .collect();
    records.sort_by(|a, b| (a.planner, a.goal_index, a.trial).cmp(&(b.planner, b.goal_index, b.trial)));
    records
}

fn run_trial(
    cfg: &WorkcellConfig,
    planning: &Planning,
    kind: PlannerKind,
    goal_index: usize,
    goal: &SolvedGoal,
    trial: usize,
    master_seed: u64,
) -> BenchRecord {
    let seed = trial_seed(master_seed, kind.name(), &goal.name, trial);
    let mut rec = BenchRecord {
        planner: kind,
        goal: goal.name.clone(),
        goal_index,
        trial,
        seed,
        success: false,
        wall_time: 0.0,
        stats: PlanStats::default(),
        path: None,
        costs: None,
        invalid_segment: None,
        failure: None,
    };
    match planning.run(cfg, kind, goal, seed) {
        Ok(out) => {
            rec.wall_time = out.stats.wall_time;
            rec.stats = out.stats;
            let wp = out.path.waypoints;
            rec.invalid_segment = planning.revalidate(cfg, &wp);
            rec.costs = evaluate_path(&planning.chain, &wp, &goal.spec, cfg.planner.ic_subdivisions).ok();
            rec.success = true;
            rec.path = Some(wp);
        }
        Err(e) => {
            if let Some(s) = e.stats() {
                rec.wall_time = s.wall_time;
                rec.stats = s.clone();
            }
            rec.failure = Some(failure_kind(&e).into());
        }
    }
    rec
}

pub fn failure_kind(e: &PlanError) -> &'static str {
    match e {
        PlanError::InvalidEndpoint(_) => "invalid_endpoint",
        PlanError::Timeout(_) => "timeout",
        PlanError::Disconnected(_) => "disconnected",
    }
}

/// Mean, sample standard deviation and coefficient of variation.
pub fn mean_std_cv(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let std = var.sqrt();
    Some((mean, std, if mean != 0.0 { std / mean } else { f64::NAN }))
}

