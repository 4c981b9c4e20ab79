//! Command-line surface and the commands' file outputs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use tkyweld::cost::CostReport;
use tkyweld::geometry::io::{read_ply_cloud, write_ply_cloud};
use tkyweld::kinematics::{JointConfig, DOF};
use tkyweld::perception::{SweepAxis, SweepEntry};
use tkyweld::planners::{PlanStats, PlannerKind};

use crate::config::WorkcellConfig;
use crate::csv::{cell, opt_cell, Table};
use crate::error::{file_err, CliError};
use crate::pipeline::{self, mean_std_cv, BenchRecord, Offset, Planning};
use crate::seeds::trial_seed;
use crate::svg::{Plot, Style};

pub const SWEEP_SCHEMA: &str = "tkyweld-sweep/1";
pub const SWEEP_HEADER: &[&str] = &["offset", "score", "converged", "iterations", "status"];
pub const TRACE_SCHEMA: &str = "tkyweld-trace/1";
pub const TRACE_HEADER: &[&str] = &["kind", "s", "c_pos", "c_orient"];
pub const BENCH_SCHEMA: &str = "tkyweld-bench/1";
pub const BENCH_HEADER: &[&str] = &[
    "planner", "goal", "trial", "seed", "success", "path_length", "ic_pos", "ic_orient", "waypoints", "nodes", "iterations",
    "revalidated", "failure",
];
pub const TIMING_SCHEMA: &str = "tkyweld-bench-timing/1";
pub const TIMING_HEADER: &[&str] = &["planner", "goal", "trial", "wall_time"];
pub const SUMMARY_SCHEMA: &str = "tkyweld-bench-summary/1";
pub const SUMMARY_HEADER: &[&str] = &[
    "planner", "goal", "successes", "trials", "mean_ic_pos", "cv_ic_pos", "mean_ic_orient", "cv_ic_orient", "mean_path_length",
];

#[derive(Debug, Parser)]
#[command(name = "tkyweld", version, about = "Registration and motion-planning experiments on a welding workcell")]
pub struct Cli {
    /// Workcell configuration (TOML).
    #[arg(long, global = true, default_value = "configs/tky_cell.toml")]
    pub config: PathBuf,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Raytrace the CAD cloud and a synthetic sensor cloud.
    Perceive {
        /// Injected workpiece offset along x, mm.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset_x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset_y: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset_z: f64,
        /// Injected yaw about the vertical axis through the workpiece centre, degrees.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset_yaw: f64,
    },
    /// Segment, filter and align a sensed cloud onto the CAD cloud.
    Register {
        /// Sensed cloud (PLY).
        source: PathBuf,
        /// CAD cloud (PLY).
        target: PathBuf,
    },
    /// ICP convergence score against offsets along one axis.
    Sweep {
        /// x, y, z or yaw.
        #[arg(long)]
        axis: SweepAxis,
        /// Largest offset: mm, or degrees for yaw.
        #[arg(long)]
        max: f64,
        #[arg(long, default_value_t = 7)]
        steps: usize,
    },
    /// Plan one query to a named goal.
    Plan {
        /// bitrrt, rrtconnect, rrtstar, prmstar or lbtrrt.
        #[arg(long)]
        planner: PlannerKind,
        #[arg(long)]
        goal: String,
    },
    /// Every planner × goal × trial, with cost plots.
    Bench,
}

/// What a command left behind, for the caller to report.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
}

impl Cli {
    pub fn run(&self) -> Result<Outcome, CliError> {
        let cfg = WorkcellConfig::load(&self.config)?;
        let seed = self.seed.unwrap_or(cfg.seed);
        fs::create_dir_all(&self.out).map_err(file_err(&self.out))?;
        let out = self.out.as_path();
        match &self.command {
            Command::Perceive { offset_x, offset_y, offset_z, offset_yaw } => {
                let offset = Offset { translation: [*offset_x, *offset_y, *offset_z], yaw_deg: *offset_yaw };
                perceive(&cfg, &offset, seed, out)
            }
            Command::Register { source, target } => register(&cfg, source, target, out),
            Command::Sweep { axis, max, steps } => sweep(&cfg, *axis, *max, *steps, seed, out),
            Command::Plan { planner, goal } => plan(&cfg, *planner, goal, seed, out),
            Command::Bench => bench(&cfg, seed, out),
        }
    }
}

fn write_text(path: PathBuf, text: &str, outcome: &mut Outcome) -> Result<(), CliError> {
    fs::write(&path, text).map_err(file_err(&path))?;
    outcome.files.push(path);
    Ok(())
}

pub fn perceive(cfg: &WorkcellConfig, offset: &Offset, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let cad = pipeline::cad_cloud(cfg)?;
    let sensed = pipeline::synth_sensor(cfg, offset, seed)?;
    let mut outcome = Outcome::default();
    for (name, cloud) in [("cad_cloud.ply", &cad), ("sensor_cloud.ply", &sensed)] {
        let path = out.join(name);
        write_ply_cloud(&path, cloud)?;
        println!("{}: {} points", path.display(), cloud.len());
        outcome.files.push(path);
    }
    Ok(outcome)
}

pub fn register(cfg: &WorkcellConfig, source: &Path, target: &Path, out: &Path) -> Result<Outcome, CliError> {
    let sensed = read_ply_cloud(source)?;
    let cad = read_ply_cloud(target)?;
    let reg = pipeline::register(cfg, &sensed, &cad)?;
    let r = &reg.report;
    let s = &r.stages;
    println!(
        "points: {} sensed, {} segmented, {} after DoN ({} degenerate), {} downsampled; {} target",
        s.input, s.segmented, s.don_kept, s.don_degenerate, s.downsampled, r.target_points
    );
    for (label, p) in [("icp transform", &r.icp_transform), ("workpiece pose", &r.workpiece_pose)] {
        let [x, y, z] = p.translation_mm;
        let [qw, qx, qy, qz] = p.quaternion_wxyz;
        let [yaw, pitch, roll] = p.euler_zyx_deg;
        println!("{label}: translation [{x:.3}, {y:.3}, {z:.3}] mm");
        println!("  quaternion (w, x, y, z) [{qw:.6}, {qx:.6}, {qy:.6}, {qz:.6}]");
        println!("  euler zyx (yaw, pitch, roll) [{yaw:.4}, {pitch:.4}, {roll:.4}] deg");
    }
    println!(
        "convergence score {:.4} mm² (matched mse {:.4} mm², {:.1}% matched), {} iterations, converged {}",
        r.convergence_score,
        r.matched_mse,
        100.0 * r.matched_fraction,
        r.iterations,
        r.converged
    );
    let mut outcome = Outcome::default();
    let json = serde_json::to_string_pretty(r).expect("report serializes");
    write_text(out.join("register_report.json"), &(json + "\n"), &mut outcome)?;
    Ok(outcome)
}

fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::X => "x",
        SweepAxis::Y => "y",
        SweepAxis::Z => "z",
        SweepAxis::Yaw => "yaw",
    }
}

pub fn sweep_table(entries: &[SweepEntry]) -> Table {
    let mut t = Table::new(SWEEP_SCHEMA, SWEEP_HEADER);
    for e in entries {
        let status = e.failure.as_deref().map_or("ok", |f| if f.contains("correspondences") { "no_correspondences" } else { "failed" });
        t.push(vec![cell(e.offset), cell(e.score), cell(e.converged), cell(e.iterations), status.into()]);
    }
    t
}

pub fn sweep(cfg: &WorkcellConfig, axis: SweepAxis, max: f64, steps: usize, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let entries = pipeline::sweep(cfg, axis, max, steps, seed)?;
    let name = axis_name(axis);
    let unit = if axis == SweepAxis::Yaw { "deg" } else { "mm" };
    for e in &entries {
        let status = e.failure.as_deref().unwrap_or("ok");
        println!("{name} {:>8.2} {unit}: score {:>12.4} iterations {:>3} converged {} ({status})", e.offset, e.score, e.iterations, e.converged);
    }
    let mut outcome = Outcome::default();
    write_text(out.join(format!("sweep_{name}.csv")), &sweep_table(&entries).render(), &mut outcome)?;
    let plot = Plot::new(format!("ICP convergence score, {name} offset"), format!("offset ({unit})"), "score (mm²)")
        .with("score", entries.iter().map(|e| (e.offset, e.score)).collect(), Style::LineMarkers);
    write_text(out.join(format!("sweep_{name}.svg")), &plot.render(), &mut outcome)?;
    Ok(outcome)
}

/// One configuration per line, joint angles in degrees.
pub fn format_path(path: &[JointConfig]) -> String {
    let mut s = String::new();
    for q in path {
        let row: Vec<String> = q.iter().map(|a| a.to_degrees().to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn parse_path(text: &str) -> Result<Vec<JointConfig>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1)))
                .collect::<Result<_, _>>()?;
            if v.len() != DOF {
                return Err(format!("line {}: expected {DOF} values, found {}", i + 1, v.len()));
            }
            Ok(JointConfig::from_iterator(v.into_iter().map(f64::to_radians)))
        })
        .collect()
}

pub fn trace_table(report: &CostReport) -> Table {
    let mut t = Table::new(TRACE_SCHEMA, TRACE_HEADER);
    for s in &report.samples {
        t.push(vec!["sample".into(), cell(s.s), cell(s.c_pos), cell(s.c_orient)]);
    }
    // Summary: s holds the joint-space length, the cost columns the integrals.
    t.push(vec!["summary".into(), cell(report.length), cell(report.ic_pos), cell(report.ic_orient)]);
    t
}

pub fn plan(cfg: &WorkcellConfig, kind: PlannerKind, goal: &str, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let planning = Planning::new(cfg)?;
    let g = planning.goal(goal)?;
    let trial = trial_seed(seed, kind.name(), &g.name, 0);
    let mut outcome = Outcome::default();
    let stem = format!("{}_{}", kind.name(), g.name);
    let result = planning.run(cfg, kind, g, trial);
    let stats: Option<&PlanStats> = match &result {
        Ok(o) => Some(&o.stats),
        Err(e) => e.stats(),
    };
    if let Some(stats) = stats {
        let json = serde_json::to_string_pretty(stats).expect("stats serialize");
        write_text(out.join(format!("stats_{stem}.json")), &(json + "\n"), &mut outcome)?;
    }
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            if let Some(s) = e.stats() {
                eprintln!("{kind} {}: {} after {} iterations, {} nodes, {:.3} s", g.name, e, s.iterations, s.nodes, s.wall_time);
            }
            return Err(CliError::Plan(e));
        }
    };
    let text = format_path(&output.path.waypoints);
    // Validate what will be on disk, not the in-memory path.
    let reloaded = parse_path(&text).expect("formatted path parses");
    if let Some(seg) = planning.revalidate(cfg, &reloaded) {
        return Err(CliError::InvalidPath(seg));
    }
    write_text(out.join(format!("path_{stem}.txt")), &text, &mut outcome)?;
    let report = tkyweld::cost::evaluate_path(&planning.chain, &reloaded, &g.spec, cfg.planner.ic_subdivisions)
        .expect("non-empty path, n ≥ 1");
    write_text(out.join(format!("trace_{stem}.csv")), &trace_table(&report).render(), &mut outcome)?;
    let s = &output.stats;
    println!(
        "{kind} {} → {}: {} waypoints, length {:.4} rad, IC(c_pos) {:.3}, IC(c_orient) {:.5}, {} iterations, {:.3} s",
        g.from,
        g.name,
        s.waypoints,
        report.length,
        report.ic_pos,
        report.ic_orient,
        s.iterations,
        s.wall_time
    );
    Ok(outcome)
}

pub fn bench_table(records: &[BenchRecord]) -> Table {
    let mut t = Table::new(BENCH_SCHEMA, BENCH_HEADER);
    for r in records {
        t.push(vec![
            r.planner.name().into(),
            r.goal.clone(),
            cell(r.trial),
            cell(r.seed),
            cell(r.success),
            opt_cell(r.path_length()),
            opt_cell(r.ic_pos()),
            opt_cell(r.ic_orient()),
            opt_cell(r.path.as_ref().map(Vec::len)),
            cell(r.stats.nodes),
            cell(r.stats.iterations),
            opt_cell(r.success.then_some(r.invalid_segment.is_none())),
            r.failure.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn timing_table(records: &[BenchRecord]) -> Table {
    let mut t = Table::new(TIMING_SCHEMA, TIMING_HEADER);
    for r in records {
        t.push(vec![r.planner.name().into(), r.goal.clone(), cell(r.trial), cell(r.wall_time)]);
    }
    t
}

/// Per (planner, goal) statistics over successful trials.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub planner: PlannerKind,
    pub goal: String,
    pub successes: usize,
    pub trials: usize,
    /// (mean, std, cv)
    pub ic_pos: Option<(f64, f64, f64)>,
    pub ic_orient: Option<(f64, f64, f64)>,
    pub path_length: Option<(f64, f64, f64)>,
}

pub fn summarize(records: &[BenchRecord]) -> Vec<GroupSummary> {
    let mut groups: Vec<GroupSummary> = Vec::new();
    for chunk in records.chunk_by(|a, b| a.planner == b.planner && a.goal == b.goal) {
        let ok: Vec<&BenchRecord> = chunk.iter().filter(|r| r.success).collect();
        let col = |f: fn(&BenchRecord) -> Option<f64>| mean_std_cv(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
        groups.push(GroupSummary {
            planner: chunk[0].planner,
            goal: chunk[0].goal.clone(),
            successes: ok.len(),
            trials: chunk.len(),
            ic_pos: col(BenchRecord::ic_pos),
            ic_orient: col(BenchRecord::ic_orient),
            path_length: col(BenchRecord::path_length),
        });
    }
    groups
}

pub fn summary_table(groups: &[GroupSummary]) -> Table {
    let mut t = Table::new(SUMMARY_SCHEMA, SUMMARY_HEADER);
    for g in groups {
        t.push(vec![
            g.planner.name().into(),
            g.goal.clone(),
            cell(g.successes),
            cell(g.trials),
            opt_cell(g.ic_pos.map(|s| s.0)),
            opt_cell(g.ic_pos.map(|s| s.2)),
            opt_cell(g.ic_orient.map(|s| s.0)),
            opt_cell(g.ic_orient.map(|s| s.2)),
            opt_cell(g.path_length.map(|s| s.0)),
        ]);
    }
    t
}

/// IC per trial (scatter) and cost along the first successful path (curves), per goal.
fn bench_plots(cfg: &WorkcellConfig, goals: &[String], records: &[BenchRecord]) -> Vec<(String, Plot)> {
    let mut plots = Vec::new();
    for goal in goals {
        let of = |k: PlannerKind| records.iter().filter(move |r| r.planner == k && &r.goal == goal);
        let mut ic_pos = Plot::new(format!("IC(c_pos) per trial, {goal}"), "trial", "IC(c_pos) (mm·rad)");
        let mut ic_orient = Plot::new(format!("IC(c_orient) per trial, {goal}"), "trial", "IC(c_orient) (rad)");
        let mut c_pos = Plot::new(format!("c_pos along the path, {goal}"), "path parameter s", "c_pos (mm)");
        let mut c_orient = Plot::new(format!("c_orient along the path, {goal}"), "path parameter s", "c_orient");
        for &k in &cfg.bench.planners {
            let pts = |f: fn(&BenchRecord) -> Option<f64>| of(k).filter_map(|r| f(r).map(|v| (r.trial as f64, v))).collect();
            ic_pos = ic_pos.with(k.name(), pts(BenchRecord::ic_pos), Style::Markers);
            ic_orient = ic_orient.with(k.name(), pts(BenchRecord::ic_orient), Style::Markers);
            if let Some(rep) = of(k).find_map(|r| r.costs.as_ref()) {
                let start = rep.waypoints.first().copied().unwrap_or_default();
                let curve = |pick: fn(&(f64, f64)) -> f64, sample: fn(&tkyweld::cost::CostSample) -> f64| {
                    std::iter::once((0.0, pick(&start))).chain(rep.samples.iter().map(|s| (s.s, sample(s)))).collect()
                };
                c_pos = c_pos.with(k.name(), curve(|w| w.0, |s| s.c_pos), Style::Line);
                c_orient = c_orient.with(k.name(), curve(|w| w.1, |s| s.c_orient), Style::Line);
            }
        }
        plots.push((format!("bench_ic_pos_{goal}.svg"), ic_pos));
        plots.push((format!("bench_ic_orient_{goal}.svg"), ic_orient));
        plots.push((format!("bench_cpos_{goal}.svg"), c_pos));
        plots.push((format!("bench_corient_{goal}.svg"), c_orient));
    }
    plots
}

pub fn bench(cfg: &WorkcellConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let planning = Planning::new(cfg)?;
    let records = pipeline::bench(cfg, &planning, seed);
    let groups = summarize(&records);
    let mut outcome = Outcome::default();
    write_text(out.join("bench.csv"), &bench_table(&records).render(), &mut outcome)?;
    write_text(out.join("bench_timing.csv"), &timing_table(&records).render(), &mut outcome)?;
    write_text(out.join("bench_summary.csv"), &summary_table(&groups).render(), &mut outcome)?;
    let goals: Vec<String> = planning.goals.iter().map(|g| g.name.clone()).collect();
    for (name, plot) in bench_plots(cfg, &goals, &records) {
        write_text(out.join(name), &plot.render(), &mut outcome)?;
    }
    println!("{:<11} {:<8} {:>7} {:>12} {:>7} {:>12} {:>7}", "planner", "goal", "success", "IC(c_pos)", "cv", "IC(c_orient)", "cv");
    for g in &groups {
        let f = |s: Option<(f64, f64, f64)>, p: usize| s.map_or(("-".to_string(), "-".to_string()), |s| (format!("{:.p$}", s.0), format!("{:.3}", s.2)));
        let (ip, cp) = f(g.ic_pos, 2);
        let (io, co) = f(g.ic_orient, 4);
        println!("{:<11} {:<8} {:>3}/{:<3} {:>12} {:>7} {:>12} {:>7}", g.planner.name(), g.goal, g.successes, g.trials, ip, cp, io, co);
    }
    let invalid = records.iter().filter(|r| r.invalid_segment.is_some()).count();
    if invalid > 0 {
        eprintln!("warning: {invalid} returned paths failed re-validation");
    }
    Ok(outcome)
}
