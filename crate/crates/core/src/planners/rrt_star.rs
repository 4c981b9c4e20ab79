//! RRT* minimising joint-space path length, run for the full iteration budget.

use rand::Rng;

use super::{branch, Ctx, Node, PlanError, PlanOutput, PlanRequest, PlannerKind};
use crate::kinematics::KinematicChain;
use crate::scene::Scene;

pub fn plan_rrt_star(scene: &Scene, chain: &KinematicChain, req: &PlanRequest) -> Result<PlanOutput, PlanError> {
    let mut ctx = Ctx::new(PlannerKind::RrtStar, scene, chain, req)?;
    if ctx.trivial() {
        return Ok(ctx.finish(vec![req.start], 1));
    }
    let step = ctx.settings().extension_step;
    let mut nodes = vec![Node { q: req.start, parent: None, cost: 0.0 }];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    // Nodes joined to the goal by a checked edge, with that edge's length. The goal
    // counts as a neighbour of every node inserted within the rewiring radius.
    let mut goal_links: Vec<(usize, f64)> = Vec::new();
    let mut trace = Vec::new();
    for it in 0..ctx.settings().max_iterations {
        if ctx.expired() {
            break;
        }
        ctx.stats.iterations = it + 1;
        let target = if ctx.rng.random::<f64>() < ctx.settings().goal_bias { req.goal } else { ctx.sample() };
        let nearest = ctx.nearest(&nodes, &target);
        let q_new = ctx.steer(&nodes[nearest].q, &target, step);
        if q_new != nodes[nearest].q && ctx.valid(&q_new) {
            let radius = ctx.rewire_radius(nodes.len());
            let mut near = ctx.near(&nodes, &q_new, radius);
            if !near.contains(&nearest) {
                near.push(nearest);
            }
            let mut candidates: Vec<(f64, usize)> =
                near.iter().map(|&i| (nodes[i].cost + ctx.dist(&nodes[i].q, &q_new), i)).collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let parent = candidates.iter().find(|&&(_, i)| ctx.edge(&nodes[i].q, &q_new)).copied();
            if let Some((cost, p)) = parent {
                let new = nodes.len();
                nodes.push(Node { q: q_new, parent: Some(p), cost });
                children.push(Vec::new());
                children[p].push(new);
                for &x in &near {
                    if x == p {
                        continue;
                    }
                    let via = cost + ctx.dist(&q_new, &nodes[x].q);
                    if via < nodes[x].cost && ctx.edge(&q_new, &nodes[x].q) {
                        let old = nodes[x].parent.expect("root is never rewired");
                        children[old].retain(|&c| c != x);
                        children[new].push(x);
                        nodes[x].parent = Some(new);
                        let delta = via - nodes[x].cost;
                        propagate(&mut nodes, &children, x, delta);
                    }
                }
                let dg = ctx.dist(&q_new, &req.goal);
                if dg == 0.0 {
                    goal_links.push((new, 0.0));
                } else if dg <= radius.max(step) && ctx.edge(&q_new, &req.goal) {
                    goal_links.push((new, dg));
                }
            }
        }
        if let Some(best) = best_link(&nodes, &goal_links) {
            trace.push(nodes[best.0].cost + best.1);
        }
    }
    ctx.stats.best_cost_trace = trace;
    match best_link(&nodes, &goal_links) {
        Some((i, d)) => {
            let mut path = branch(&nodes, i);
            if d > 0.0 {
                path.push(req.goal);
            }
            Ok(ctx.finish(path, nodes.len()))
        }
        None => Err(PlanError::Timeout(ctx.into_stats(nodes.len()))),
    }
}

/// Adds `delta` to the cost-to-come of `root` and its whole subtree.
pub(crate) fn propagate(nodes: &mut [Node], children: &[Vec<usize>], root: usize, delta: f64) {
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        nodes[i].cost += delta;
        stack.extend(&children[i]);
    }
}

fn best_link(nodes: &[Node], links: &[(usize, f64)]) -> Option<(usize, f64)> {
    links
        .iter()
        .copied()
        .min_by(|a, b| (nodes[a.0].cost + a.1).total_cmp(&(nodes[b.0].cost + b.1)).then(a.0.cmp(&b.0)))
}
