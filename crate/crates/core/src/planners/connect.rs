//! RRT-Connect and its transition-based variant BiTRRT.
//!
//! Both grow a tree from the start and one from the goal, alternating; after
//! each successful extension the other tree greedily extends toward the new
//! node. BiTRRT additionally submits every new node to the transition test,
//! evaluated in the direction the final path traverses the edge: parent to
//! child in the start tree, child to parent in the goal tree.

use rand::Rng;

use super::{branch, transition_test, Ctx, Node, PlanError, PlanOutput, PlanRequest, PlannerKind, TransitionState};
use crate::kinematics::{JointConfig, KinematicChain};
use crate::scene::Scene;

pub fn plan_rrt_connect(scene: &Scene, chain: &KinematicChain, request: &PlanRequest) -> Result<PlanOutput, PlanError> {
    Bidirectional::run(PlannerKind::RrtConnect, scene, chain, request)
}

pub fn plan_bitrrt(scene: &Scene, chain: &KinematicChain, request: &PlanRequest) -> Result<PlanOutput, PlanError> {
    Bidirectional::run(PlannerKind::BiTrrt, scene, chain, request)
}

enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

struct Bidirectional<'a> {
    ctx: Ctx<'a>,
    trees: [Vec<Node>; 2],
    transition: Option<TransitionState>,
}

impl<'a> Bidirectional<'a> {
    fn run(kind: PlannerKind, scene: &'a Scene, chain: &'a KinematicChain, req: &'a PlanRequest<'a>) -> Result<PlanOutput, PlanError> {
        let ctx = Ctx::new(kind, scene, chain, req)?;
        if ctx.trivial() {
            return Ok(ctx.finish(vec![req.start], 1));
        }
        let (cs, cg) = (ctx.cost(&req.start), ctx.cost(&req.goal));
        let transition = (kind == PlannerKind::BiTrrt).then(|| TransitionState::new(&req.settings.transition, &[cs, cg]));
        let mut me = Self {
            trees: [vec![Node { q: req.start, parent: None, cost: cs }], vec![Node { q: req.goal, parent: None, cost: cg }]],
            ctx,
            transition,
        };
        let out = me.search();
        let nodes = me.trees[0].len() + me.trees[1].len();
        me.ctx.stats.final_temperature = me.transition.as_ref().map(|t| t.temperature);
        match out {
            Some(path) => Ok(me.ctx.finish(path, nodes)),
            None => Err(PlanError::Timeout(me.ctx.into_stats(nodes))),
        }
    }

    fn search(&mut self) -> Option<Vec<JointConfig>> {
        let (start, goal) = (self.ctx.req.start, self.ctx.req.goal);
        let step = self.ctx.settings().extension_step;
        // Endpoints already close: try the direct edge first.
        if self.ctx.dist(&start, &goal) <= step && self.accept(0, &start, &goal) {
            return Some(vec![start, goal]);
        }
        let mut a = 0;
        for it in 0..self.ctx.settings().max_iterations {
            self.ctx.stats.iterations = it + 1;
            if self.ctx.expired() {
                return None;
            }
            let target = if self.ctx.rng.random::<f64>() < self.ctx.settings().goal_bias {
                self.trees[1 - a][0].q
            } else {
                self.ctx.sample()
            };
            let new = match self.extend(a, &target) {
                Extend::Trapped => None,
                Extend::Advanced(i) | Extend::Reached(i) => Some(i),
            };
            if let Some(i) = new {
                let q_new = self.trees[a][i].q;
                if let Some(j) = self.connect(1 - a, &q_new) {
                    return Some(self.join(a, i, j));
                }
            }
            a = 1 - a;
        }
        None
    }

    /// Collision and transition checks for a new edge of tree `t` from `parent` to `child`.
    fn accept(&mut self, t: usize, parent: &JointConfig, child: &JointConfig) -> bool {
        if !self.ctx.edge(parent, child) {
            return false;
        }
        let Some(state) = self.transition.as_mut() else { return true };
        let (cp, cc) = (self.ctx.cost(parent), self.ctx.cost(child));
        let d = self.ctx.dist(parent, child);
        // Path direction: the goal tree's edges are traversed child → parent.
        let (from, to) = if t == 0 { (cp, cc) } else { (cc, cp) };
        transition_test(state, from, to, d, &mut self.ctx.rng)
    }

    fn extend(&mut self, t: usize, target: &JointConfig) -> Extend {
        let near = self.ctx.nearest(&self.trees[t], target);
        let q_near = self.trees[t][near].q;
        let q_new = self.ctx.steer(&q_near, target, self.ctx.settings().extension_step);
        if q_new == q_near || !self.accept(t, &q_near, &q_new) {
            return Extend::Trapped;
        }
        let cost = self.ctx.cost(&q_new);
        self.trees[t].push(Node { q: q_new, parent: Some(near), cost });
        let i = self.trees[t].len() - 1;
        if q_new == *target {
            Extend::Reached(i)
        } else {
            Extend::Advanced(i)
        }
    }

    fn connect(&mut self, t: usize, target: &JointConfig) -> Option<usize> {
        loop {
            if self.ctx.expired() {
                return None;
            }
            match self.extend(t, target) {
                Extend::Trapped => return None,
                Extend::Reached(i) => return Some(i),
                Extend::Advanced(_) => {}
            }
        }
    }

    /// Path through node `i` of tree `a` and the coincident node `j` of the other tree.
    fn join(&self, a: usize, i: usize, j: usize) -> Vec<JointConfig> {
        let (s, g) = if a == 0 { (i, j) } else { (j, i) };
        let mut path = branch(&self.trees[0], s);
        let mut tail = branch(&self.trees[1], g);
        tail.reverse();
        path.extend(tail.into_iter().skip(1));
        path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planners::PlannerSettings;
    use crate::scene::{LinkProxy, Obstacle, Primitive};
    use crate::geometry::Vec3;

    fn q(v: [f64; 6]) -> JointConfig {
        JointConfig::from_column_slice(&v)
    }

    #[test]
    fn start_equals_goal() {
        let chain = KinematicChain::industrial_6dof();
        let req = PlanRequest::new(q([0.1; 6]), q([0.1; 6]), 1);
        for p in [plan_rrt_connect, plan_bitrrt] {
            assert_eq!(p(&Scene::empty(), &chain, &req).unwrap().path.waypoints, vec![q([0.1; 6])]);
        }
    }

    #[test]
    fn near_goal_connects_directly() {
        let chain = KinematicChain::industrial_6dof();
        let req = PlanRequest::new(q([0.0; 6]), q([0.03; 6]), 1);
        let out = plan_bitrrt(&Scene::empty(), &chain, &req).unwrap();
        assert_eq!(out.path.waypoints, vec![req.start, req.goal]);
    }

    fn blocked_scene() -> Scene {
        let chain = KinematicChain::industrial_6dof();
        let tip = chain.fk(&JointConfig::zeros()).translation;
        Scene::new(
            vec![Obstacle { name: "ball".into(), shape: Primitive::Sphere { center: tip, radius: 120.0 }, attached: false }],
            vec![LinkProxy { link: 6, shape: Primitive::Capsule { a: Vec3::zeros(), b: Vec3::new(0.0, 0.0, 250.0), radius: 20.0 } }],
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn plans_around_obstacle_deterministically() {
        let chain = KinematicChain::industrial_6dof();
        let scene = blocked_scene();
        let req = PlanRequest::new(q([-0.5, 0.0, 0.0, 0.0, 0.0, 0.0]), q([0.5, 0.0, 0.0, 0.0, 0.0, 0.0]), 7);
        for p in [plan_rrt_connect, plan_bitrrt] {
            let a = p(&scene, &chain, &req).unwrap();
            let b = p(&scene, &chain, &req).unwrap();
            assert_eq!(a.path, b.path);
            assert_eq!(a.path.waypoints.first(), Some(&req.start));
            assert_eq!(a.path.waypoints.last(), Some(&req.goal));
            assert_eq!(a.path.first_invalid_segment(&scene, &chain, &req.settings.motion), None);
        }
    }

    #[test]
    fn constant_cost_bitrrt_is_rrt_connect() {
        let chain = KinematicChain::industrial_6dof();
        let scene = blocked_scene();
        let flat = |_: &JointConfig| 3.0;
        let req = PlanRequest::new(q([-0.5, 0.0, 0.0, 0.0, 0.0, 0.0]), q([0.5, 0.0, 0.0, 0.0, 0.0, 0.0]), 11).with_cost(&flat);
        assert_eq!(plan_bitrrt(&scene, &chain, &req).unwrap().path, plan_rrt_connect(&scene, &chain, &req).unwrap().path);
    }

    #[test]
    fn colliding_goal_is_rejected() {
        let chain = KinematicChain::industrial_6dof();
        let req = PlanRequest::new(q([-0.5, 0.0, 0.0, 0.0, 0.0, 0.0]), JointConfig::zeros(), 1)
            .with_settings(PlannerSettings::default());
        assert!(matches!(plan_rrt_connect(&blocked_scene(), &chain, &req), Err(PlanError::InvalidEndpoint(_))));
    }
}
