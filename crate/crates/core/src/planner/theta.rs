use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;

use super::cost::CostModel;
use super::{
    decode, encode, iterations_to_within_1pct, particle_rng, CostWeights, PlannedPath, PsoConfig, INIT_STREAM,
};
use crate::error::Result;
use crate::formation::FormationSpec;
use crate::scenario::{Path, Scenario};

/// Angle-encoded swarm: one row of phase angles per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub angles: Vec<Vec<f64>>,
    pub angle_increments: Vec<Vec<f64>>,
    pub personal_best_angles: Vec<Vec<f64>>,
    pub personal_best_costs: Vec<f64>,
    pub global_best_angles: Vec<f64>,
    pub global_best_cost: f64,
    pub iteration: usize,
}

/// Converts a flat coordinate vector into a path with fixed endpoints.
pub(crate) fn path_from_coords(scenario: &Scenario, coords: &[f64]) -> Path {
    let mut waypoints = Vec::with_capacity(coords.len() / 3 + 2);
    waypoints.push(scenario.start);
    waypoints.extend(coords.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])));
    waypoints.push(scenario.target);
    Path::new(waypoints)
}

pub(crate) fn bounds(scenario: &Scenario, dim: usize) -> (f64, f64) {
    let axis = dim % 3;
    (scenario.workspace_min[axis], scenario.workspace_max[axis])
}

pub(crate) fn decode_angles(scenario: &Scenario, angles: &[f64]) -> Vec<f64> {
    angles
        .iter()
        .enumerate()
        .map(|(d, a)| {
            let (lo, hi) = bounds(scenario, d);
            decode(*a, lo, hi)
        })
        .collect()
}

/// Random initial swarm: straight start-target paths with every waypoint
/// perturbed uniformly, encoded as phase angles.
pub(crate) fn initial_angles(scenario: &Scenario, config: &PsoConfig) -> Vec<Vec<f64>> {
    let extent = scenario.workspace_extent();
    let n_wp = config.waypoints;
    (0..config.swarm_size)
        .map(|i| {
            let mut rng = particle_rng(config.seed, INIT_STREAM, i as u64);
            let mut angles = Vec::with_capacity(config.dimensions());
            for j in 0..n_wp {
                let t = (j + 1) as f64 / (n_wp + 1) as f64;
                let base = scenario.start + (scenario.target - scenario.start) * t;
                for axis in 0..3 {
                    let (lo, hi) = (scenario.workspace_min[axis], scenario.workspace_max[axis]);
                    let jitter = config.init_spread * extent[axis] * rng.random_range(-1.0..=1.0);
                    let x = (base[axis] + jitter).clamp(lo, hi);
                    angles.push(encode(x, lo, hi));
                }
            }
            angles
        })
        .collect()
}

impl SwarmState {
    pub fn initialize(scenario: &Scenario, config: &PsoConfig, model: &CostModel<'_>) -> Self {
        let angles = initial_angles(scenario, config);
        let costs: Vec<f64> = angles
            .par_iter()
            .map(|a| {
                model
                    .evaluate(&path_from_coords(scenario, &decode_angles(scenario, a)))
                    .total
            })
            .collect();
        let mut best = 0;
        for (i, c) in costs.iter().enumerate() {
            if *c < costs[best] {
                best = i;
            }
        }
        Self {
            angle_increments: vec![vec![0.0; config.dimensions()]; config.swarm_size],
            personal_best_angles: angles.clone(),
            global_best_angles: angles[best].clone(),
            global_best_cost: costs[best],
            personal_best_costs: costs,
            angles,
            iteration: 0,
        }
    }

    pub fn best_path(&self, scenario: &Scenario) -> Path {
        path_from_coords(scenario, &decode_angles(scenario, &self.global_best_angles))
    }

    /// One synchronous swarm update followed by the best-position reduction.
    pub fn step(&self, config: &PsoConfig, model: &CostModel<'_>) -> SwarmState {
        let scenario = model.scenario;
        let k = self.iteration as u64 + 1;
        let clamp = |v: f64| v.clamp(-FRAC_PI_2, FRAC_PI_2);

        let moved: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..self.angles.len())
            .into_par_iter()
            .map(|i| {
                let mut rng = particle_rng(config.seed, k, i as u64);
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let theta = &self.angles[i];
                let personal = &self.personal_best_angles[i];
                let mut angles = Vec::with_capacity(theta.len());
                let mut incs = Vec::with_capacity(theta.len());
                for d in 0..theta.len() {
                    let inc = clamp(
                        config.inertia * self.angle_increments[i][d]
                            + config.cognitive_gain * r1 * (personal[d] - theta[d])
                            + config.social_gain * r2 * (self.global_best_angles[d] - theta[d]),
                    );
                    incs.push(inc);
                    angles.push(clamp(theta[d] + inc));
                }
                let cost = model
                    .evaluate(&path_from_coords(scenario, &decode_angles(scenario, &angles)))
                    .total;
                (angles, incs, cost)
            })
            .collect();

        let mut next = SwarmState {
            angles: Vec::with_capacity(moved.len()),
            angle_increments: Vec::with_capacity(moved.len()),
            personal_best_angles: self.personal_best_angles.clone(),
            personal_best_costs: self.personal_best_costs.clone(),
            global_best_angles: self.global_best_angles.clone(),
            global_best_cost: self.global_best_cost,
            iteration: self.iteration + 1,
        };
        for (i, (angles, incs, cost)) in moved.into_iter().enumerate() {
            if cost < next.personal_best_costs[i] {
                next.personal_best_costs[i] = cost;
                next.personal_best_angles[i] = angles.clone();
            }
            next.angles.push(angles);
            next.angle_increments.push(incs);
        }
        for i in 0..next.personal_best_costs.len() {
            if next.personal_best_costs[i] < next.global_best_cost {
                next.global_best_cost = next.personal_best_costs[i];
                next.global_best_angles = next.personal_best_angles[i].clone();
            }
        }
        next
    }
}

/// Runs angle-encoded PSO for `config.iterations` and returns the best path.
pub fn plan_path(
    scenario: &Scenario,
    formation: &FormationSpec,
    config: &PsoConfig,
    weights: &CostWeights,
) -> Result<PlannedPath> {
    config.validate()?;
    weights.validate()?;
    let model = CostModel::new(scenario, formation, *weights);
    let mut state = SwarmState::initialize(scenario, config, &model);
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push((0, state.global_best_cost));
    for _ in 0..config.iterations {
        state = state.step(config, &model);
        trace.push((state.iteration, state.global_best_cost));
    }
    let path = state.best_path(scenario);
    Ok(PlannedPath {
        cost: model.evaluate(&path),
        path,
        iterations_to_within_1pct: iterations_to_within_1pct(&trace),
        convergence_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{min_clearance, path_length, Obstacle, DEFAULT_SAMPLES_PER_SEGMENT};

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    fn empty() -> Scenario {
        Scenario::empty(
            v(0.0, 0.0, 0.0),
            v(100.0, 100.0, 40.0),
            v(10.0, 10.0, 20.0),
            v(90.0, 80.0, 20.0),
            20.0,
        )
        .unwrap()
    }

    fn small(seed: u64) -> PsoConfig {
        PsoConfig {
            swarm_size: 20,
            waypoints: 3,
            iterations: 30,
            seed,
            ..PsoConfig::default()
        }
    }

    #[test]
    fn zero_gains_freeze_angles_and_zero_increments() {
        let s = empty();
        let f = FormationSpec::single();
        let cfg = PsoConfig {
            inertia: 0.0,
            cognitive_gain: 0.0,
            social_gain: 0.0,
            ..small(3)
        };
        let model = CostModel::new(&s, &f, CostWeights::default());
        let mut state = SwarmState::initialize(&s, &cfg, &model);
        state.angle_increments.iter_mut().flatten().for_each(|x| *x = 0.3);
        let next = state.step(&cfg, &model);
        assert_eq!(next.angles, state.angles);
        assert!(next.angle_increments.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn lone_particle_at_its_best_is_a_fixed_point() {
        let s = empty();
        let f = FormationSpec::single();
        let cfg = PsoConfig {
            swarm_size: 1,
            ..small(5)
        };
        let model = CostModel::new(&s, &f, CostWeights::default());
        let state = SwarmState::initialize(&s, &cfg, &model);
        let next = state.step(&cfg, &model);
        assert_eq!(next.angles, state.angles);
        assert_eq!(next.global_best_cost, state.global_best_cost);
        assert_eq!(next.iteration, 1);
    }

    #[test]
    fn fixed_seed_is_bitwise_deterministic() {
        let s = Scenario::load(crate::scenario::BRIDGE_SCENARIO).unwrap();
        let f = FormationSpec::triangle();
        let model = CostModel::new(&s, &f, CostWeights::default());
        let cfg = small(11);
        let a = SwarmState::initialize(&s, &cfg, &model).step(&cfg, &model);
        let b = SwarmState::initialize(&s, &cfg, &model).step(&cfg, &model);
        assert_eq!(a, b);
        let pa = plan_path(&s, &f, &cfg, &CostWeights::default()).unwrap();
        let pb = plan_path(&s, &f, &cfg, &CostWeights::default()).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn invariants_hold_along_a_run() {
        let s = Scenario::load(crate::scenario::BRIDGE_SCENARIO).unwrap();
        let f = FormationSpec::triangle();
        let model = CostModel::new(&s, &f, CostWeights::default());
        let cfg = small(2);
        let mut state = SwarmState::initialize(&s, &cfg, &model);
        for _ in 0..15 {
            let next = state.step(&cfg, &model);
            assert!(next.global_best_cost <= state.global_best_cost);
            for row in next.angles.iter().chain(&next.angle_increments) {
                assert!(row.iter().all(|a| a.abs() <= FRAC_PI_2));
            }
            let min = next.personal_best_costs.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(min, next.global_best_cost);
            for row in &next.angles {
                let p = path_from_coords(&s, &decode_angles(&s, row));
                assert!(p.waypoints.iter().all(|w| s.contains(w)));
            }
            state = next;
        }
    }

    #[test]
    fn converges_to_the_straight_line_in_empty_space() {
        let s = empty();
        let straight = (s.target - s.start).norm();
        let cfg = PsoConfig {
            swarm_size: 50,
            waypoints: 10,
            iterations: 200,
            seed: 1,
            ..PsoConfig::default()
        };
        let out = plan_path(&s, &FormationSpec::triangle(), &cfg, &CostWeights::default()).unwrap();
        assert!(
            out.cost.length_cost <= 1.01 * straight,
            "{} vs {straight}",
            out.cost.length_cost
        );
        assert_eq!(out.path.waypoints[0], s.start);
        assert_eq!(*out.path.waypoints.last().unwrap(), s.target);
        assert!(out.convergence_trace.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn detours_around_a_blocking_obstacle() {
        let mut s = empty();
        let mid = (s.start + s.target) / 2.0;
        let (radius, margin) = (8.0, 1.0);
        s.obstacles.push(Obstacle::new(mid, radius, margin).unwrap());
        let cfg = PsoConfig {
            swarm_size: 60,
            waypoints: 4,
            iterations: 150,
            seed: 4,
            ..PsoConfig::default()
        };
        let weights = CostWeights::new(1.0, 1000.0, 0.0).unwrap();
        let out = plan_path(&s, &FormationSpec::single(), &cfg, &weights).unwrap();
        assert_eq!(out.cost.violation_cost, 0.0, "{:?}", out.cost);
        // Shortest curve around the inflated sphere: two tangents plus an arc.
        // Penalties are only checked at samples, so allow 1 % of slack.
        let r = radius + margin;
        let (a, b) = ((mid - s.start).norm(), (s.target - mid).norm());
        let detour = (a * a - r * r).sqrt()
            + (b * b - r * r).sqrt()
            + r * (std::f64::consts::PI - (r / a).acos() - (r / b).acos());
        assert!(out.cost.length_cost > (s.target - s.start).norm());
        assert!(
            out.cost.length_cost >= 0.99 * detour,
            "{} vs {detour}",
            out.cost.length_cost
        );
        assert!(min_clearance(&out.path, &s.obstacles, DEFAULT_SAMPLES_PER_SEGMENT) >= 0.0);
        assert_eq!(path_length(&out.path), out.cost.length_cost);
    }
}
