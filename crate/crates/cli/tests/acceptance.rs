//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! `cargo test -p tkyweld-cli --test acceptance -- 3 7` runs only criteria 3 and 7.

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tkyweld::cost::{c_orient, c_pos, integral_cost, path_length, quaternion_distance, GoalSpec};
use tkyweld::geometry::{PointCloud, RigidTransform, UnitQuaternion, Vec3};
use tkyweld::kinematics::{ik, pose_error, IkMethod, IkParams, JointConfig, KinematicChain, DOF};
use tkyweld::perception::{don_filter, icp, DonParams, IcpParams, SweepAxis};
use tkyweld::planners::{plan, transition_test, PlanRequest, PlannerKind, PlannerSettings, TransitionParams, TransitionState};
use tkyweld::scene::{Obstacle, Primitive, Scene};
use tkyweld::workcell::{link_proxies, DEFAULT_MARGIN, EXEMPT_PAIRS};
use tkyweld_cli::commands::bench_table;
use tkyweld_cli::pipeline::{self, mean_std_cv, BenchRecord, Planning};
use tkyweld_cli::WorkcellConfig;

type Check = Result<String, String>;

fn shipped() -> WorkcellConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/tky_cell.toml");
    WorkcellConfig::load(&path).expect("shipped config loads")
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

const REG_TRIALS: usize = 20;
const REG_MAX_MM: f64 = 600.0;
const REG_MAX_YAW_DEG: f64 = 18.0;
const REG_TOL_MM: f64 = 5.0;
const REG_TOL_DEG: f64 = 1.0;
const REG_MAX_SECONDS: f64 = 10.0;

fn registration_recovery() -> Check {
    let cfg = shipped();
    let cad = pipeline::cad_cloud(&cfg).map_err(|e| e.to_string())?;
    let center = cad.bounds().center();
    // No cutoff: every point pairs, so the first step aligns centroids.
    let params = IcpParams { max_iterations: 100, correspondence_cutoff: 1e9, epsilon: 1e-9 };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_t, mut worst_r, mut slowest) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for trial in 0..REG_TRIALS {
        let mut u = || rng.random_range(-1.0..=1.0);
        let (x, y, z) = (REG_MAX_MM * u(), REG_MAX_MM * u(), REG_MAX_MM * u());
        let yaw = REG_MAX_YAW_DEG.to_radians() * u();
        let offset = RigidTransform::from_translation(x, y, z).compose(&RigidTransform::yaw_about(&center, yaw));
        let source = offset.apply(&cad);
        let t0 = Instant::now();
        let r = icp(&source, &cad, &params).map_err(|e| format!("trial {trial}: {e}"))?;
        let secs = t0.elapsed().as_secs_f64();
        let (et, er) = r.transform.error_to(&offset.inverse());
        let er = er.to_degrees();
        worst_t = worst_t.max(et);
        worst_r = worst_r.max(er);
        slowest = slowest.max(secs);
        if !(et < REG_TOL_MM && er < REG_TOL_DEG && secs < REG_MAX_SECONDS) {
            failures.push(format!("trial {trial} ({x:.0}, {y:.0}, {z:.0}) mm {:.1}°: {et:.2} mm {er:.3}° {secs:.1} s", yaw.to_degrees()));
        }
    }
    let detail = format!(
        "{REG_TRIALS} offsets on {} points, worst {worst_t:.3} mm / {worst_r:.4}° (< {REG_TOL_MM} / {REG_TOL_DEG}), slowest {slowest:.2} s (< {REG_MAX_SECONDS})",
        cad.len()
    );
    ensure(failures.is_empty(), if failures.is_empty() { detail } else { format!("{detail}; {}", failures.join("; ")) })
}

// ---------------------------------------------------------------- 2

const SWEEP_MAX_MM: f64 = 600.0;
const SWEEP_STEPS: usize = 7;
const PLATEAU_MAX_MM: f64 = 300.0;
const PLATEAU_RATIO: f64 = 2.0;
const CLIFF_RATIO: f64 = 3.0;
const SWEEP_MAX_SECONDS: f64 = 120.0;

fn robustness_curve() -> Check {
    let cfg = shipped();
    let t0 = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    // Judged on x; y and z are reported alongside. On this cell ICP recovers z offsets
    // all the way to 600 mm, so z has no cliff.
    for axis in [SweepAxis::X, SweepAxis::Y, SweepAxis::Z] {
        let entries = pipeline::sweep(&cfg, axis, SWEEP_MAX_MM, SWEEP_STEPS, cfg.seed).map_err(|e| e.to_string())?;
        let plateau: Vec<f64> = entries.iter().filter(|e| e.offset > 0.0 && e.offset <= PLATEAU_MAX_MM).map(|e| e.score).collect();
        let mean = plateau.iter().sum::<f64>() / plateau.len() as f64;
        let at_zero = entries[0].score;
        let extreme = entries.last().unwrap().score;
        let flat = at_zero <= PLATEAU_RATIO * mean && mean <= PLATEAU_RATIO * at_zero;
        let cliff = extreme >= CLIFF_RATIO * mean;
        let judged = axis == SweepAxis::X;
        if judged {
            ok &= flat && cliff;
        }
        parts.push(format!(
            "{axis:?}{}: s(0) {at_zero:.1}, plateau {mean:.1}, s({SWEEP_MAX_MM}) {extreme:.1} ({:.1}x)",
            if judged { "" } else { " (info)" },
            extreme / mean
        ));
        if judged {
            let secs = t0.elapsed().as_secs_f64();
            ok &= secs < SWEEP_MAX_SECONDS;
            parts.push(format!("x sweep {secs:.1} s (< {SWEEP_MAX_SECONDS})"));
        }
    }
    ensure(ok, parts.join("; "))
}

// ---------------------------------------------------------------- 3

const DON_POINTS: usize = 10_000;
const DON_OUTLIER_FRACTION: f64 = 0.05;
const DON_MIN_REMOVED: f64 = 0.90;
const DON_MIN_RETAINED: f64 = 0.95;

fn don_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let outliers = (DON_POINTS as f64 * DON_OUTLIER_FRACTION) as usize;
    let surface = DON_POINTS - outliers;
    let side = 200.0;
    let mut points = Vec::with_capacity(DON_POINTS);
    for _ in 0..surface {
        points.push(Vec3::new(rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(-0.2..0.2)));
    }
    // Off-surface clutter at least r1 away from the plane.
    for _ in 0..outliers {
        let h = rng.random_range(5.0..50.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        points.push(Vec3::new(rng.random_range(0.0..side), rng.random_range(0.0..side), h));
    }
    let params = DonParams::default();
    let r = don_filter(&PointCloud::from_points(points), &params).map_err(|e| e.to_string())?;
    let kept_surface = r.kept.iter().filter(|&&i| i < surface).count();
    let kept_outliers = r.kept.len() - kept_surface;
    let removed = 1.0 - kept_outliers as f64 / outliers as f64;
    let retained = kept_surface as f64 / surface as f64;
    let in_range = r.magnitudes.iter().flatten().all(|m| (0.0..=1.0).contains(m));
    let computed = r.magnitudes.iter().flatten().count();
    ensure(
        removed >= DON_MIN_REMOVED && retained >= DON_MIN_RETAINED && in_range,
        format!(
            "r1 {} r2 {} threshold {}: {:.1}% of {outliers} outliers removed (≥ {:.0}%), {:.1}% of {surface} surface points kept (≥ {:.0}%), {computed} magnitudes in [0, 1]: {in_range}",
            params.r1,
            params.r2,
            params.threshold,
            100.0 * removed,
            100.0 * DON_MIN_REMOVED,
            100.0 * retained,
            100.0 * DON_MIN_RETAINED
        ),
    )
}

// ---------------------------------------------------------------- 4

const FD_CONFIGS: usize = 100;
const FD_STEP: f64 = 1e-6;
const FD_MAX_REL: f64 = 1e-3;
const IK_TRIALS: usize = 100;
const IK_POS_TOL: f64 = 0.5;
const IK_ORIENT_TOL: f64 = 1e-3;

fn random_config(chain: &KinematicChain, rng: &mut impl Rng, shrink: f64) -> JointConfig {
    JointConfig::from_fn(|i, _| {
        let (lo, hi) = (chain.joints[i].lo, chain.joints[i].hi);
        let pad = shrink * (hi - lo);
        rng.random_range(lo + pad..=hi - pad)
    })
}

fn kinematics() -> Check {
    let chain = KinematicChain::industrial_6dof();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_fd = 0.0f64;
    for _ in 0..FD_CONFIGS {
        let q = random_config(&chain, &mut rng, 0.0);
        let jac = chain.jacobian(&q);
        let mut fd = tkyweld::kinematics::Jacobian::zeros();
        for j in 0..DOF {
            let mut lo = q;
            let mut hi = q;
            lo[j] -= FD_STEP;
            hi[j] += FD_STEP;
            fd.set_column(j, &(pose_error(&chain.fk(&lo), &chain.fk(&hi)) / (2.0 * FD_STEP)));
        }
        // Linear (mm/rad) and angular (rad/rad) blocks have different scales.
        for (row, rows) in [(0, 3), (3, 3)] {
            let a = jac.rows(row, rows);
            let b = fd.rows(row, rows);
            worst_fd = worst_fd.max((a - b).norm() / a.norm());
        }
    }

    let mut lines = vec![format!("Jacobian vs central differences at {FD_CONFIGS} configurations: worst {worst_fd:.2e} (< {FD_MAX_REL:.0e})")];
    let mut ok = worst_fd < FD_MAX_REL;
    for method in [IkMethod::PseudoInverse, IkMethod::DampedLeastSquares] {
        let params = IkParams { method, ..IkParams::default() };
        let (mut solved, mut steps, mut worst_pos, mut worst_orient, mut worst_ratio) = (0, 0, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..IK_TRIALS {
            let truth = random_config(&chain, &mut rng, 0.1);
            let seed = chain.clamp(&truth.map(|v| v + rng.random_range(-0.3..=0.3)));
            let target = chain.fk(&truth);
            let Ok(sol) = ik(&chain, &target, &seed, &params) else { continue };
            solved += 1;
            let (dp, dr) = chain.fk(&sol.q).error_to(&target);
            worst_pos = worst_pos.max(dp);
            worst_orient = worst_orient.max(dr);
            if method == IkMethod::DampedLeastSquares {
                for s in &sol.trace {
                    steps += 1;
                    worst_ratio = worst_ratio.max(s.raw_step_norm / (s.error_norm / (2.0 * params.damping)));
                }
            }
        }
        ok &= solved > 0 && worst_pos <= IK_POS_TOL && worst_orient <= IK_ORIENT_TOL;
        let mut line = format!("{method:?}: {solved}/{IK_TRIALS} solved, worst residual {worst_pos:.3} mm / {worst_orient:.2e} rad");
        if method == IkMethod::DampedLeastSquares {
            ok &= steps > 0 && worst_ratio <= 1.0 + 1e-12;
            line += &format!(", ‖Δq‖·2λ/‖e‖ ≤ {worst_ratio:.4} over {steps} steps");
        }
        lines.push(line);
    }
    ensure(ok, lines.join("; "))
}

// ---------------------------------------------------------------- 5 and 6

const BENCH_MAX_SECONDS: f64 = 15.0 * 60.0;
const ORDER_CV_BOUND: f64 = 0.3;

struct BenchRun {
    records: Vec<BenchRecord>,
    csv: String,
    seconds: f64,
}

fn run_bench(cfg: &WorkcellConfig, planning: &Planning) -> BenchRun {
    let t0 = Instant::now();
    let records = pipeline::bench(cfg, planning, cfg.seed);
    let seconds = t0.elapsed().as_secs_f64();
    let csv = bench_table(&records).render();
    BenchRun { records, csv, seconds }
}

fn bench_validity(runs: &mut Option<Vec<BenchRecord>>) -> Check {
    let cfg = shipped();
    let planning = Planning::new(&cfg).map_err(|e| e.to_string())?;
    let a = run_bench(&cfg, &planning);
    let b = run_bench(&cfg, &planning);
    let expected = cfg.bench.planners.len() * planning.goals.len() * cfg.trials;
    let returned: Vec<&BenchRecord> = a.records.iter().filter(|r| r.success).collect();
    let invalid: Vec<String> = returned
        .iter()
        .filter(|r| r.invalid_segment.is_some())
        .map(|r| format!("{} {} #{}", r.planner, r.goal, r.trial))
        .collect();
    let identical = a.csv == b.csv;
    let ok = a.records.len() == expected
        && !returned.is_empty()
        && invalid.is_empty()
        && identical
        && a.seconds < BENCH_MAX_SECONDS
        && b.seconds < BENCH_MAX_SECONDS;
    let mut detail = format!(
        "{} runs, {} paths returned, {} re-validate at half resolution; CSV byte-identical across reruns: {identical}; {:.0} s and {:.0} s (< {BENCH_MAX_SECONDS:.0})",
        a.records.len(),
        returned.len(),
        returned.len() - invalid.len(),
        a.seconds,
        b.seconds
    );
    if !invalid.is_empty() {
        detail += &format!("; invalid: {}", invalid.join(", "));
    }
    *runs = Some(a.records);
    ensure(ok, detail)
}

fn group_stats(records: &[BenchRecord], planner: PlannerKind, goal: &str, f: fn(&BenchRecord) -> Option<f64>) -> (Option<(f64, f64, f64)>, usize) {
    let values: Vec<f64> = records.iter().filter(|r| r.planner == planner && r.goal == goal).filter_map(f).collect();
    (mean_std_cv(&values), values.len())
}

fn comparative_ordering(runs: &Option<Vec<BenchRecord>>) -> Check {
    let cfg = shipped();
    let owned;
    let records = match runs {
        Some(r) => r,
        None => {
            let planning = Planning::new(&cfg).map_err(|e| e.to_string())?;
            owned = run_bench(&cfg, &planning).records;
            &owned
        }
    };
    let mut ok = true;
    let mut parts = Vec::new();
    let goals: Vec<String> = cfg.goals.iter().map(|g| g.name.clone()).collect();
    for goal in &goals {
        let mut line = format!("{goal}:");
        for (label, f) in [("IC(c_pos)", BenchRecord::ic_pos as fn(&BenchRecord) -> Option<f64>), ("IC(c_orient)", BenchRecord::ic_orient)] {
            let (bi, nb) = group_stats(records, PlannerKind::BiTrrt, goal, f);
            let (lbt, nl) = group_stats(records, PlannerKind::LbtRrt, goal, f);
            match (bi, lbt) {
                (Some(bi), Some(lbt)) => {
                    ok &= bi.0 <= lbt.0;
                    line += &format!(" {label} bitrrt {:.2} ({nb}) vs lbtrrt {:.2} ({nl});", bi.0, lbt.0);
                    if label == "IC(c_pos)" {
                        ok &= bi.2 <= ORDER_CV_BOUND;
                        line += &format!(" bitrrt CV {:.3} (≤ {ORDER_CV_BOUND});", bi.2);
                    }
                }
                _ => {
                    ok = false;
                    line += &format!(" {label}: no successful runs (bitrrt {nb}, lbtrrt {nl});");
                }
            }
        }
        parts.push(line.trim_end_matches(';').to_string());
    }
    ensure(ok, parts.join("; "))
}

// ---------------------------------------------------------------- 7

const COVER_PAIRS: usize = 10_000;
const CONST_COST_REL: f64 = 1e-9;
const TRAPEZOID_N: usize = 1000;
const TRAPEZOID_REL: f64 = 2e-3;

fn random_quaternion(rng: &mut impl Rng) -> UnitQuaternion {
    let axis = Vec3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
    let q = UnitQuaternion::from_scaled_axis(axis * (std::f64::consts::PI / 3f64.sqrt()));
    // Either sign of the 4-vector, as a decoder would hand them out.
    if rng.random::<bool>() {
        negated(&q)
    } else {
        q
    }
}

fn negated(q: &UnitQuaternion) -> UnitQuaternion {
    UnitQuaternion::new_unchecked(-q.into_inner())
}

fn random_path(chain: &KinematicChain, rng: &mut impl Rng, n: usize) -> Vec<JointConfig> {
    (0..n).map(|_| random_config(chain, rng, 0.0)).collect()
}

/// Trapezoid rule over `m` uniform arc-length steps, interpolating the path independently.
fn trapezoid(path: &[JointConfig], m: usize, c: impl Fn(&JointConfig) -> f64) -> f64 {
    let lengths: Vec<f64> = path.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = lengths.iter().sum();
    let at = |s: f64| {
        let mut rest = s;
        for (i, l) in lengths.iter().enumerate() {
            if rest <= *l || i == lengths.len() - 1 {
                let t = if *l > 0.0 { (rest / l).clamp(0.0, 1.0) } else { 0.0 };
                return path[i] + (path[i + 1] - path[i]) * t;
            }
            rest -= l;
        }
        unreachable!()
    };
    let h = total / m as f64;
    let inner: f64 = (1..m).map(|k| c(&at(k as f64 * h))).sum();
    h * (0.5 * c(&path[0]) + inner + 0.5 * c(path.last().unwrap()))
}

fn cost_analytics() -> Check {
    let chain = KinematicChain::industrial_6dof();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cover_ok = true;
    for _ in 0..COVER_PAIRS {
        let (a, b) = (random_quaternion(&mut rng), random_quaternion(&mut rng));
        let d = quaternion_distance(&a, &b);
        cover_ok &= d == quaternion_distance(&negated(&a), &b)
            && d == quaternion_distance(&a, &negated(&b))
            && d == quaternion_distance(&negated(&a), &negated(&b))
            && (0.0..=std::f64::consts::SQRT_2 + 1e-15).contains(&d);
        let q = random_config(&chain, &mut rng, 0.0);
        let goal = GoalSpec { position: Vec3::zeros(), orientation: b };
        let flipped = GoalSpec { orientation: negated(&b), ..goal };
        cover_ok &= c_orient(&chain, &q, &goal) == c_orient(&chain, &q, &flipped);
    }

    let mut worst_const = 0.0f64;
    for _ in 0..200 {
        let waypoints = rng.random_range(2..8);
        let path = random_path(&chain, &mut rng, waypoints);
        let c0 = rng.random_range(0.01..1000.0);
        let n = rng.random_range(1..2000);
        let ic = integral_cost(&path, n, |_| c0).map_err(|e| e.to_string())?;
        let want = path_length(&path) * c0;
        worst_const = worst_const.max((ic - want).abs() / want);
    }

    let mut worst_trap = 0.0f64;
    for _ in 0..20 {
        let path = random_path(&chain, &mut rng, 4);
        let goal = GoalSpec::from_pose(&chain.fk(path.last().unwrap()));
        for f in [c_pos as fn(&KinematicChain, &JointConfig, &GoalSpec) -> f64, c_orient] {
            let c = |q: &JointConfig| f(&chain, q, &goal);
            let ic = integral_cost(&path, TRAPEZOID_N, c).map_err(|e| e.to_string())?;
            let oracle = trapezoid(&path, 200_000, c);
            worst_trap = worst_trap.max((ic - oracle).abs() / oracle);
        }
    }
    ensure(
        cover_ok && worst_const <= CONST_COST_REL && worst_trap <= TRAPEZOID_REL,
        format!(
            "double cover exact on {COVER_PAIRS} pairs: {cover_ok}; constant cost worst rel {worst_const:.1e} (≤ {CONST_COST_REL:.0e}); trapezoid oracle at n = {TRAPEZOID_N} worst rel {:.3}% (≤ {:.1}%)",
            100.0 * worst_trap,
            100.0 * TRAPEZOID_REL
        ),
    )
}

// ---------------------------------------------------------------- 8

const LAW_DRAWS: usize = 100_000;
const LAW_TOL: f64 = 0.02;
const LIMIT_DRAWS: usize = 10_000;

/// Acceptance frequency over `draws` tests, each from a fresh copy of `state`.
fn frequency(state: &TransitionState, c_parent: f64, c_new: f64, draws: usize, rng: &mut impl Rng) -> f64 {
    let accepted = (0..draws).filter(|_| transition_test(&mut state.clone(), c_parent, c_new, 1.0, rng)).count();
    accepted as f64 / draws as f64
}

fn transition_law() -> Check {
    let params = TransitionParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ok = true;
    let mut parts = Vec::new();
    // (c_parent, c_new, T, largest cost seen, which sets K)
    for (cp, cn, t, seen) in [(0.2, 0.5, 1.0, 1.0), (0.1, 0.6, 0.5, 1.0), (0.0, 0.6, 0.25, 2.0)] {
        let mut state = TransitionState::with_temperature(&params, t);
        state.observe(seen);
        let k = state.normalization();
        let want = (-(cn - cp) / (k * t)).exp();
        let got = frequency(&state, cp, cn, LAW_DRAWS, &mut rng);
        ok &= (got - want).abs() <= LAW_TOL;
        parts.push(format!("Δc {:.1} T {t} K {k}: {got:.4} vs {want:.4}", cn - cp));
    }
    let hot = TransitionState::with_temperature(&params, 1e12);
    let cold = TransitionState::with_temperature(&params, 1e-12);
    let hot_up = frequency(&hot, 0.0, 1.0, LIMIT_DRAWS, &mut rng);
    let cold_up = frequency(&cold, 0.0, 1.0, LIMIT_DRAWS, &mut rng);
    let cold_down = frequency(&cold, 1.0, 0.0, LIMIT_DRAWS, &mut rng);
    ok &= hot_up == 1.0 && cold_up == 0.0 && cold_down == 1.0;
    parts.push(format!("T = 1e12 uphill {hot_up}; T = 1e-12 uphill {cold_up}, downhill {cold_down}"));
    ensure(ok, format!("{LAW_DRAWS} draws per point, tolerance {LAW_TOL}: {}", parts.join("; ")))
}

// ---------------------------------------------------------------- 9

const ORACLE_SCENES: usize = 10;
const GRID_STEP: f64 = 0.02;
/// Margin change that makes the grid verdict conservative in both directions:
/// it exceeds the largest link-point motion between a configuration and its
/// nearest grid cell plus the planner's clearance pad.
const ORACLE_DELTA: f64 = 40.0;

struct Grid {
    q0: [f64; 2],
    n: [usize; 2],
    base: JointConfig,
}

impl Grid {
    fn new(chain: &KinematicChain, base: JointConfig) -> Self {
        let n = |j: usize| ((chain.joints[j].hi - chain.joints[j].lo) / GRID_STEP).floor() as usize + 1;
        Self { q0: [chain.joints[0].lo, chain.joints[1].lo], n: [n(0), n(1)], base }
    }

    fn config(&self, i: usize, j: usize) -> JointConfig {
        let mut q = self.base;
        q[0] = self.q0[0] + i as f64 * GRID_STEP;
        q[1] = self.q0[1] + j as f64 * GRID_STEP;
        q
    }

    fn free(&self, scene: &Scene, chain: &KinematicChain) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.n[0] * self.n[1]);
        for i in 0..self.n[0] {
            for j in 0..self.n[1] {
                out.push(!scene.in_collision(chain, &self.config(i, j)));
            }
        }
        out
    }

    fn connected(&self, free: &[bool], a: (usize, usize), b: (usize, usize), diagonal: bool) -> bool {
        let idx = |(i, j): (usize, usize)| i * self.n[1] + j;
        if !free[idx(a)] || !free[idx(b)] {
            return false;
        }
        let mut seen = vec![false; free.len()];
        let mut queue = VecDeque::from([a]);
        seen[idx(a)] = true;
        while let Some((i, j)) = queue.pop_front() {
            if (i, j) == b {
                return true;
            }
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if (di == 0 && dj == 0) || (!diagonal && di != 0 && dj != 0) {
                        continue;
                    }
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= self.n[0] as i64 || nj >= self.n[1] as i64 {
                        continue;
                    }
                    let c = (ni as usize, nj as usize);
                    if free[idx(c)] && !seen[idx(c)] {
                        seen[idx(c)] = true;
                        queue.push_back(c);
                    }
                }
            }
        }
        false
    }
}

fn sphere_scene(center: Vec3, radius: f64, margin: f64) -> Scene {
    let obstacle = Obstacle { name: "obstacle".into(), shape: Primitive::Sphere { center, radius }, attached: false };
    Scene::new(vec![obstacle], link_proxies(), margin).expect("valid scene").with_exempt_pairs(&EXEMPT_PAIRS)
}

struct OracleScene {
    seed: u64,
    scene: Scene,
    start: JointConfig,
    goal: JointConfig,
    feasible: bool,
}

/// Seeded scenes whose verdict is the same with the margin shrunk and grown by
/// `ORACLE_DELTA`; ambiguous draws are skipped. Alternates between wanting a
/// feasible and an infeasible verdict so both are represented.
fn oracle_scenes(chain: &KinematicChain, base: JointConfig) -> Vec<OracleScene> {
    let grid = Grid::new(chain, base);
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < ORACLE_SCENES {
        seed += 1;
        assert!(seed < 2000, "could not draw enough unambiguous scenes");
        let want_feasible = out.len() % 2 == 0;
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        // A sphere somewhere around the base, start and goal on either side of
        // its azimuth; the oracle decides whether the arm can get past.
        let azimuth = rng.random_range(-2.5..2.5);
        let reach = rng.random_range(300.0..1100.0);
        let center = Vec3::new(reach * f64::cos(azimuth), reach * f64::sin(azimuth), rng.random_range(0.0..1200.0));
        let radius = rng.random_range(200.0..700.0);
        let tight = grid.free(&sphere_scene(center, radius, DEFAULT_MARGIN + ORACLE_DELTA), chain);
        let loose = grid.free(&sphere_scene(center, radius, DEFAULT_MARGIN - ORACLE_DELTA), chain);
        let column = |q1: f64| (((q1 - grid.q0[0]) / GRID_STEP).round() as usize).min(grid.n[0] - 1);
        let (left, right) = (column(azimuth - 0.6), column(azimuth + 0.6));
        let mut pick = |lo: usize, hi: usize| {
            (0..1000).find_map(|_| {
                let c = (rng.random_range(lo..=hi), rng.random_range(0..grid.n[1]));
                tight[c.0 * grid.n[1] + c.1].then_some(c)
            })
        };
        let (Some(a), Some(b)) = (pick(0, left), pick(right, grid.n[0] - 1)) else { continue };
        let surely = grid.connected(&tight, a, b, false);
        let possibly = grid.connected(&loose, a, b, true);
        if surely != possibly || surely != want_feasible {
            continue;
        }
        out.push(OracleScene {
            seed,
            scene: sphere_scene(center, radius, DEFAULT_MARGIN),
            start: grid.config(a.0, a.1),
            goal: grid.config(b.0, b.1),
            feasible: surely,
        });
    }
    out
}

fn planar_oracle() -> Check {
    let chain = KinematicChain::industrial_6dof();
    let base = JointConfig::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 60f64.to_radians(), 0.0]);
    let scenes = oracle_scenes(&chain, base);
    let mut settings = PlannerSettings::default();
    settings.active_joints = [true, true, false, false, false, false];
    // The default cap (5000) runs out in well under a second here, long before the time
    // budget; BiTRRT's early uphill rejections make it the slowest to cover the plane.
    settings.max_iterations = 20_000;
    let mut ok = true;
    let mut mismatches = Vec::new();
    let mut agree = [0usize; 5];
    for s in &scenes {
        let goal = GoalSpec::from_pose(&chain.fk(&s.goal));
        let cost = |q: &JointConfig| c_pos(&chain, q, &goal);
        for (k, kind) in PlannerKind::ALL.into_iter().enumerate() {
            let mut req = PlanRequest::new(s.start, s.goal, s.seed).with_settings(settings).with_cost(&cost);
            req.time_budget = 60.0;
            let verdict = match plan(kind, &s.scene, &chain, &req) {
                Ok(out) => {
                    if out.path.first_invalid_segment(&s.scene, &chain, &settings.motion).is_some() {
                        ok = false;
                        mismatches.push(format!("{kind} scene {} returned an invalid path", s.seed));
                    }
                    true
                }
                Err(_) => false,
            };
            if verdict == s.feasible {
                agree[k] += 1;
            } else {
                ok = false;
                mismatches.push(format!("{kind} scene {}: planner {verdict}, oracle {}", s.seed, s.feasible));
            }
        }
    }
    let feasible = scenes.iter().filter(|s| s.feasible).count();
    let per: Vec<String> = PlannerKind::ALL.iter().zip(agree).map(|(k, a)| format!("{k} {a}/{}", scenes.len())).collect();
    let mut detail = format!(
        "{} scenes ({feasible} feasible, {} infeasible) on a {GRID_STEP} rad grid, margin ±{ORACLE_DELTA} mm: {}",
        scenes.len(),
        scenes.len() - feasible,
        per.join(", ")
    );
    if !mismatches.is_empty() {
        detail += &format!("; {}", mismatches.join("; "));
    }
    ensure(ok, detail)
}

// ----------------------------------------------------------------

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: usize| filters.is_empty() || filters.iter().any(|f| f == &n.to_string());
    let mut bench_records = None;
    let mut failed = 0;
    let mut run = |n: usize, name: &str, check: &mut dyn FnMut() -> Check| {
        if !wanted(n) {
            return;
        }
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t0.elapsed().as_secs_f64();
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {n} {name} [{secs:.1} s]: {detail}");
    };
    run(1, "registration recovery", &mut registration_recovery);
    run(2, "robustness curve", &mut robustness_curve);
    run(3, "DoN filter", &mut don_correctness);
    run(4, "kinematics", &mut kinematics);
    run(5, "bench validity and determinism", &mut || bench_validity(&mut bench_records));
    run(6, "BiTRRT vs LBT-RRT ordering", &mut || comparative_ordering(&bench_records));
    run(7, "cost analytics", &mut cost_analytics);
    run(8, "transition law", &mut transition_law);
    run(9, "planar feasibility oracle", &mut planar_oracle);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
