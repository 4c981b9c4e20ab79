//! Lower-Bound Tree RRT.
//!
//! Every vertex sits in two structures: an approximation tree whose edges are
//! all collision-checked, and a lower-bound graph that also holds unchecked
//! neighbourhood edges. Lower-bound costs are shortest-path distances in that
//! graph. The planner keeps `cost_apx(v) ≤ (1 + ε) · cost_lb(v)` for every
//! vertex, checking a lower-bound edge only when the bound would otherwise be
//! violated and deleting edges that turn out to be invalid.

use std::collections::{BinaryHeap, HashMap};

use rand::Rng;

use super::rrt_star::propagate;
use super::{branch, Ctx, Node, PlanError, PlanOutput, PlanRequest, PlannerKind};
use crate::kinematics::{JointConfig, KinematicChain};
use crate::scene::Scene;

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct Lbt<'a> {
    ctx: Ctx<'a>,
    eps: f64,
    apx: Vec<Node>,
    apx_children: Vec<Vec<usize>>,
    lb: Vec<f64>,
    lb_parent: Vec<Option<usize>>,
    adjacency: Vec<Vec<usize>>,
    /// Lower-bound edges already known to be collision-free, keyed (lower, higher).
    checked: HashMap<(usize, usize), ()>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl<'a> Lbt<'a> {
    fn insert(&mut self, q: JointConfig, parent: usize) -> usize {
        let v = self.apx.len();
        let d = self.ctx.dist(&self.apx[parent].q, &q);
        self.apx.push(Node { q, parent: Some(parent), cost: self.apx[parent].cost + d });
        self.apx_children.push(Vec::new());
        self.apx_children[parent].push(v);
        let radius = self.ctx.rewire_radius(v);
        let mut near = self.ctx.near(&self.apx[..v], &q, radius);
        if !near.contains(&parent) {
            near.push(parent);
        }
        self.adjacency.push(near.clone());
        for &u in &near {
            self.adjacency[u].push(v);
        }
        self.checked.insert(key(parent, v), ());
        let (mut best, mut best_parent) = (f64::INFINITY, None);
        for &u in &near {
            let c = self.lb[u] + self.ctx.dist(&self.apx[u].q, &q);
            if c < best {
                (best, best_parent) = (c, Some(u));
            }
        }
        self.lb.push(best);
        self.lb_parent.push(best_parent);
        self.relax_from(v);
        v
    }

    /// Propagates lower-bound decreases outward from `v`.
    fn relax_from(&mut self, v: usize) {
        let mut heap = BinaryHeap::from([Entry(self.lb[v], v)]);
        while let Some(Entry(c, x)) = heap.pop() {
            if c > self.lb[x] {
                continue;
            }
            for i in 0..self.adjacency[x].len() {
                let y = self.adjacency[x][i];
                let via = self.lb[x] + self.ctx.dist(&self.apx[x].q, &self.apx[y].q);
                if via < self.lb[y] {
                    self.lb[y] = via;
                    self.lb_parent[y] = Some(x);
                    heap.push(Entry(via, y));
                }
            }
        }
    }

    /// Recomputes all lower bounds from the root after an edge removal.
    fn recompute_lb(&mut self) {
        self.lb.iter_mut().for_each(|c| *c = f64::INFINITY);
        self.lb_parent.iter_mut().for_each(|p| *p = None);
        self.lb[0] = 0.0;
        self.relax_from(0);
    }

    fn violates(&self, v: usize) -> bool {
        self.apx[v].cost > (1.0 + self.eps) * self.lb[v] + 1e-12
    }

    /// Restores the approximation bound at every vertex.
    fn repair(&mut self) {
        loop {
            let worst = (1..self.apx.len())
                .filter(|&v| self.violates(v))
                .min_by(|&a, &b| self.lb[a].total_cmp(&self.lb[b]).then(a.cmp(&b)));
            let Some(v) = worst else { return };
            let u = self.lb_parent[v].expect("non-root vertices have a lower-bound parent");
            let k = key(u, v);
            if !self.checked.contains_key(&k) {
                if self.ctx.edge(&self.apx[u].q, &self.apx[v].q) {
                    self.checked.insert(k, ());
                } else {
                    self.adjacency[u].retain(|&x| x != v);
                    self.adjacency[v].retain(|&x| x != u);
                    self.recompute_lb();
                    continue;
                }
            }
            // u has a smaller lower bound than the smallest violator, so it satisfies the bound
            // and routing v through it satisfies the bound at v.
            let via = self.apx[u].cost + self.ctx.dist(&self.apx[u].q, &self.apx[v].q);
            let old = self.apx[v].parent.expect("root never violates");
            self.apx_children[old].retain(|&c| c != v);
            self.apx_children[u].push(v);
            self.apx[v].parent = Some(u);
            let delta = via - self.apx[v].cost;
            propagate(&mut self.apx, &self.apx_children, v, delta);
        }
    }
}

pub fn plan_lbt_rrt(scene: &Scene, chain: &KinematicChain, req: &PlanRequest) -> Result<PlanOutput, PlanError> {
    let ctx = Ctx::new(PlannerKind::LbtRrt, scene, chain, req)?;
    if ctx.trivial() {
        return Ok(ctx.finish(vec![req.start], 1));
    }
    let mut t = Lbt {
        eps: ctx.settings().lbt_epsilon,
        ctx,
        apx: vec![Node { q: req.start, parent: None, cost: 0.0 }],
        apx_children: vec![Vec::new()],
        lb: vec![0.0],
        lb_parent: vec![None],
        adjacency: vec![Vec::new()],
        checked: HashMap::new(),
    };
    let step = t.ctx.settings().extension_step;
    let mut goal: Option<usize> = None;
    let mut trace = Vec::new();
    for it in 0..t.ctx.settings().max_iterations {
        if t.ctx.expired() {
            break;
        }
        t.ctx.stats.iterations = it + 1;
        let target = if t.ctx.rng.random::<f64>() < t.ctx.settings().goal_bias { req.goal } else { t.ctx.sample() };
        let nearest = t.ctx.nearest(&t.apx, &target);
        let q_near = t.apx[nearest].q;
        let q_new = t.ctx.steer(&q_near, &target, step);
        let duplicate_goal = goal.is_some() && q_new == req.goal;
        if q_new != q_near && !duplicate_goal && t.ctx.edge(&q_near, &q_new) {
            let v = t.insert(q_new, nearest);
            if q_new == req.goal {
                goal = Some(v);
            } else if goal.is_none()
                && t.ctx.dist(&q_new, &req.goal) <= t.ctx.rewire_radius(v).max(step)
                && t.ctx.edge(&q_new, &req.goal)
            {
                goal = Some(t.insert(req.goal, v));
            }
            t.repair();
        }
        if let Some(g) = goal {
            trace.push(t.apx[g].cost);
        }
    }
    t.ctx.stats.best_cost_trace = trace;
    let n = t.apx.len();
    match goal {
        Some(g) => {
            let path = branch(&t.apx, g);
            Ok(t.ctx.finish(path, n))
        }
        None => Err(PlanError::Timeout(t.ctx.into_stats(n))),
    }
}
