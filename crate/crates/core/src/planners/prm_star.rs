//! PRM* with lazily validated edges.
//!
//! A batch of samples plus start and goal is joined by a k-nearest graph with
//! `k = ⌈e (1 + 1/d) ln n⌉`. Shortest paths are searched over edges not yet
//! known to be invalid; the edges of each candidate path are then checked and
//! failing ones removed until a fully valid path remains or none exists.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::{Ctx, PlanError, PlanOutput, PlanRequest, PlannerKind};
use crate::kinematics::{JointConfig, KinematicChain, DOF};
use crate::scene::Scene;

#[derive(PartialEq)]
struct Entry {
    f: f64,
    v: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, then on vertex index.
        other.f.total_cmp(&self.f).then(other.v.cmp(&self.v))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn plan_prm_star(scene: &Scene, chain: &KinematicChain, req: &PlanRequest) -> Result<PlanOutput, PlanError> {
    let mut ctx = Ctx::new(PlannerKind::PrmStar, scene, chain, req)?;
    if ctx.trivial() {
        return Ok(ctx.finish(vec![req.start], 1));
    }
    let mut vertices = vec![req.start, req.goal];
    for it in 0..ctx.settings().prm_samples {
        if ctx.expired() {
            return Err(PlanError::Timeout(ctx.into_stats(vertices.len())));
        }
        ctx.stats.iterations = it + 1;
        let q = ctx.sample();
        if ctx.valid(&q) {
            vertices.push(q);
        }
    }
    let n = vertices.len();
    let d = ctx.settings().active_joints.iter().filter(|a| **a).count().clamp(1, DOF) as f64;
    let k = ((std::f64::consts::E * (1.0 + 1.0 / d) * (n as f64).ln()).ceil() as usize).min(n - 1);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut by_dist: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| (ctx.dist(&vertices[i], &vertices[j]), j)).collect();
        by_dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &by_dist[..k] {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }
    // Edge validity, keyed by (lower, higher) vertex index; absent = unchecked.
    let mut known: HashMap<(usize, usize), bool> = HashMap::new();
    loop {
        if ctx.expired() {
            return Err(PlanError::Timeout(ctx.into_stats(n)));
        }
        let Some(route) = shortest_path(&ctx, &vertices, &adjacency, &known) else {
            return Err(PlanError::Disconnected(ctx.into_stats(n)));
        };
        let mut all_valid = true;
        for w in route.windows(2) {
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            let ok = match known.get(&key) {
                Some(&ok) => ok,
                None => {
                    let ok = ctx.edge(&vertices[key.0], &vertices[key.1]);
                    known.insert(key, ok);
                    ok
                }
            };
            if !ok {
                all_valid = false;
                break;
            }
        }
        if all_valid {
            let path = route.iter().map(|&i| vertices[i]).collect();
            return Ok(ctx.finish(path, n));
        }
    }
}

/// A* from vertex 0 to vertex 1 over edges not known to be invalid.
fn shortest_path(
    ctx: &Ctx,
    vertices: &[JointConfig],
    adjacency: &[Vec<usize>],
    known: &HashMap<(usize, usize), bool>,
) -> Option<Vec<usize>> {
    let n = vertices.len();
    let goal = vertices[1];
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    g[0] = 0.0;
    heap.push(Entry { f: ctx.dist(&vertices[0], &goal), v: 0 });
    while let Some(Entry { v, .. }) = heap.pop() {
        if closed[v] {
            continue;
        }
        if v == 1 {
            let mut route = vec![1];
            let mut c = 1;
            while c != 0 {
                c = parent[c];
                route.push(c);
            }
            route.reverse();
            return Some(route);
        }
        closed[v] = true;
        for &u in &adjacency[v] {
            if closed[u] || known.get(&(v.min(u), v.max(u))) == Some(&false) {
                continue;
            }
            let cand = g[v] + ctx.dist(&vertices[v], &vertices[u]);
            if cand < g[u] {
                g[u] = cand;
                parent[u] = v;
                heap.push(Entry { f: cand + ctx.dist(&vertices[u], &goal), v: u });
            }
        }
    }
    None
}
