//! Formation-centroid path planning with angle-encoded PSO and a
//! conventional PSO baseline.

mod baseline;
mod cost;
mod theta;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scenario::Path;

pub use baseline::plan_path_baseline_pso;
pub use cost::{evaluate_cost, CostBreakdown, CostModel, CostWeights, DEFAULT_VIOLATION_OFFSET};
pub use theta::{plan_path, SwarmState};

/// Which optimizer drives the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerKind {
    ThetaPso,
    Pso,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::ThetaPso => "theta-pso",
            PlannerKind::Pso => "pso",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta-pso" => Ok(PlannerKind::ThetaPso),
            "pso" => Ok(PlannerKind::Pso),
            other => Err(Error::Validation(format!(
                "unknown planner `{other}` (expected theta-pso or pso)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    /// Free waypoints between start and target; the search has three
    /// dimensions per waypoint.
    pub waypoints: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive_gain: f64,
    pub social_gain: f64,
    pub seed: u64,
    /// Half-width of the uniform perturbation applied to the straight-line
    /// initial paths, as a fraction of the workspace extent per axis.
    pub init_spread: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 150,
            waypoints: 10,
            iterations: 300,
            inertia: 0.729,
            cognitive_gain: 1.49,
            social_gain: 1.49,
            seed: 0,
            init_spread: 0.15,
        }
    }
}

impl PsoConfig {
    pub fn dimensions(&self) -> usize {
        3 * self.waypoints
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 1 {
            return Err(Error::Validation("swarm_size must be >= 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Validation("iterations must be >= 1".into()));
        }
        if self.waypoints < 1 {
            return Err(Error::Validation("at least one free waypoint is required".into()));
        }
        if !(self.inertia >= 0.0 && self.cognitive_gain >= 0.0 && self.social_gain >= 0.0) {
            return Err(Error::Validation("inertia and gains must be >= 0".into()));
        }
        if !(self.init_spread >= 0.0) {
            return Err(Error::Validation("init_spread must be >= 0".into()));
        }
        Ok(())
    }
}

/// Result of one planner run.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub path: Path,
    pub cost: CostBreakdown,
    /// `(iteration, global best cost)`, starting with the initial swarm at 0.
    pub convergence_trace: Vec<(usize, f64)>,
    pub iterations_to_within_1pct: usize,
}

impl PlannedPath {
    pub fn initial_cost(&self) -> f64 {
        self.convergence_trace[0].1
    }

    pub fn convergence_csv(&self) -> String {
        let mut out = String::from("iteration,best_cost\n");
        for (k, c) in &self.convergence_trace {
            out.push_str(&format!("{k},{c:.9}\n"));
        }
        out
    }
}

/// First iteration whose best cost is within 1 % of the final best cost.
pub fn iterations_to_within_1pct(trace: &[(usize, f64)]) -> usize {
    let Some(&(_, last)) = trace.last() else {
        return 0;
    };
    let bound = last + 0.01 * last.abs();
    trace.iter().find(|(_, c)| *c <= bound).map_or(0, |(k, _)| *k)
}

/// Decodes a phase angle in `[-pi/2, pi/2]` to a coordinate in `[lower, upper]`.
pub fn angle_to_position(angle: f64, lower: f64, upper: f64) -> Result<f64> {
    if !(lower < upper) {
        return Err(Error::Domain(format!("bounds inverted: [{lower}, {upper}]")));
    }
    Ok(decode(angle, lower, upper))
}

#[inline]
pub(crate) fn decode(angle: f64, lower: f64, upper: f64) -> f64 {
    (0.5 * ((upper - lower) * angle.sin() + upper + lower)).clamp(lower, upper)
}

#[inline]
pub(crate) fn encode(x: f64, lower: f64, upper: f64) -> f64 {
    ((2.0 * x - upper - lower) / (upper - lower)).clamp(-1.0, 1.0).asin()
}

/// Random stream for one particle at one iteration; independent of how
/// particles are scheduled across threads.
pub(crate) fn particle_rng(seed: u64, iteration: u64, particle: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&iteration.to_le_bytes());
    key[16..24].copy_from_slice(&particle.to_le_bytes());
    key[24..].copy_from_slice(b"uavpsort");
    ChaCha8Rng::from_seed(key)
}

/// Iteration tag for the initialization draws.
pub(crate) const INIT_STREAM: u64 = u64::MAX;
