use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionParams {
    /// Factor by which the temperature is raised after `max_fails` consecutive rejections
    /// and lowered after an accepted uphill move.
    pub rate: f64,
    pub max_fails: usize,
    /// Initial temperature as a fraction of the initial cost range.
    pub initial_temperature_factor: f64,
    /// Use the cost slope `Δc / distance` instead of the raw cost difference.
    pub per_distance: bool,
}

impl Default for TransitionParams {
    fn default() -> Self {
        Self { rate: 2.0, max_fails: 10, initial_temperature_factor: 1e-4, per_distance: false }
    }
}

/// Adaptive temperature of the Metropolis transition test.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionState {
    /// Cost units.
    pub temperature: f64,
    pub rate: f64,
    pub fails: usize,
    pub max_fails: usize,
    pub per_distance: bool,
    initial_range: f64,
    c_min: f64,
    c_max: f64,
    pub accepted_uphill: usize,
    pub rejected: usize,
}

impl TransitionState {
    /// Starts at `factor × (max − min)` of `costs` (a unit range if they are all equal).
    pub fn new(params: &TransitionParams, costs: &[f64]) -> Self {
        let c_min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let c_max = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = if c_max > c_min { c_max - c_min } else { 1.0 };
        let (c_min, c_max) = if c_max > c_min { (c_min, c_max) } else { (0.0, 1.0) };
        Self {
            temperature: params.initial_temperature_factor * range,
            rate: params.rate,
            fails: 0,
            max_fails: params.max_fails,
            per_distance: params.per_distance,
            initial_range: range,
            c_min,
            c_max,
            accepted_uphill: 0,
            rejected: 0,
        }
    }

    /// A state with temperature `t` and normalisation `K = 1`.
    pub fn with_temperature(params: &TransitionParams, t: f64) -> Self {
        Self { temperature: t, ..Self::new(params, &[0.0, 1.0]) }
    }

    /// `K`: the cost range seen so far relative to the initial range (at least 1).
    pub fn normalization(&self) -> f64 {
        (self.c_max - self.c_min) / self.initial_range
    }

    pub fn observe(&mut self, c: f64) {
        self.c_min = self.c_min.min(c);
        self.c_max = self.c_max.max(c);
    }

    fn rise(&self, c_parent: f64, c_new: f64, distance: f64) -> f64 {
        let dc = c_new - c_parent;
        if self.per_distance && distance > 0.0 {
            dc / distance
        } else {
            dc
        }
    }

    /// Probability that a move from `c_parent` to `c_new` is accepted in the current state.
    pub fn acceptance_probability(&self, c_parent: f64, c_new: f64, distance: f64) -> f64 {
        if c_new <= c_parent {
            return 1.0;
        }
        (-self.rise(c_parent, c_new, distance) / (self.normalization() * self.temperature)).exp()
    }
}

/// Metropolis test: always accepts non-increasing cost; otherwise accepts with
/// probability `exp(−Δc / (K·T))`. Draws from `rng` only for uphill moves.
pub fn transition_test(state: &mut TransitionState, c_parent: f64, c_new: f64, distance: f64, rng: &mut impl Rng) -> bool {
    state.observe(c_new);
    if c_new <= c_parent {
        state.fails = 0;
        return true;
    }
    let p = state.acceptance_probability(c_parent, c_new, distance);
    if rng.random::<f64>() < p {
        state.temperature /= state.rate;
        state.fails = 0;
        state.accepted_uphill += 1;
        true
    } else {
        state.rejected += 1;
        state.fails += 1;
        if state.fails >= state.max_fails {
            state.temperature *= state.rate;
            state.fails = 0;
        }
        false
    }
}
