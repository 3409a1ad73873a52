//! Conventional velocity/position PSO over raw waypoint coordinates.

use rand::Rng;
use rayon::prelude::*;

use super::cost::CostModel;
use super::theta::{bounds, decode_angles, initial_angles, path_from_coords};
use super::{iterations_to_within_1pct, particle_rng, CostWeights, PlannedPath, PsoConfig};
use crate::error::Result;
use crate::formation::FormationSpec;
use crate::scenario::Scenario;

struct Particle {
    position: Vec<f64>,
    velocity: Vec<f64>,
    best_position: Vec<f64>,
    best_cost: f64,
}

/// Same initial population and random stream layout as [`super::plan_path`];
/// velocities are clamped to the workspace span and positions to the box.
pub fn plan_path_baseline_pso(
    scenario: &Scenario,
    formation: &FormationSpec,
    config: &PsoConfig,
    weights: &CostWeights,
) -> Result<PlannedPath> {
    config.validate()?;
    weights.validate()?;
    let model = CostModel::new(scenario, formation, *weights);
    let dims = config.dimensions();
    let span: Vec<(f64, f64)> = (0..dims).map(|d| bounds(scenario, d)).collect();

    let mut swarm: Vec<Particle> = initial_angles(scenario, config)
        .par_iter()
        .map(|a| {
            let position = decode_angles(scenario, a);
            let cost = model.evaluate(&path_from_coords(scenario, &position)).total;
            Particle {
                velocity: vec![0.0; dims],
                best_position: position.clone(),
                position,
                best_cost: cost,
            }
        })
        .collect();

    let mut best = 0;
    for (i, p) in swarm.iter().enumerate() {
        if p.best_cost < swarm[best].best_cost {
            best = i;
        }
    }
    let mut global_position = swarm[best].best_position.clone();
    let mut global_cost = swarm[best].best_cost;
    let mut trace = vec![(0, global_cost)];

    for k in 1..=config.iterations {
        let gp = &global_position;
        swarm.par_iter_mut().enumerate().for_each(|(i, p)| {
            let mut rng = particle_rng(config.seed, k as u64, i as u64);
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            for d in 0..dims {
                let (lo, hi) = span[d];
                let vmax = hi - lo;
                let v = config.inertia * p.velocity[d]
                    + config.cognitive_gain * r1 * (p.best_position[d] - p.position[d])
                    + config.social_gain * r2 * (gp[d] - p.position[d]);
                p.velocity[d] = v.clamp(-vmax, vmax);
                p.position[d] = (p.position[d] + p.velocity[d]).clamp(lo, hi);
            }
            let cost = model.evaluate(&path_from_coords(scenario, &p.position)).total;
            if cost < p.best_cost {
                p.best_cost = cost;
                p.best_position.clone_from(&p.position);
            }
        });
        for p in &swarm {
            if p.best_cost < global_cost {
                global_cost = p.best_cost;
                global_position.clone_from(&p.best_position);
            }
        }
        trace.push((k, global_cost));
    }

    let path = path_from_coords(scenario, &global_position);
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
    use crate::planner::plan_path;
    use nalgebra::Vector3;

    fn empty() -> Scenario {
        Scenario::empty(
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(100.0, 100.0, 40.0),
            Vector3::new(10.0, 10.0, 20.0),
            Vector3::new(90.0, 80.0, 20.0),
            20.0,
        )
        .unwrap()
    }

    #[test]
    fn converges_near_the_straight_line() {
        let s = empty();
        let cfg = PsoConfig {
            swarm_size: 50,
            waypoints: 10,
            iterations: 200,
            seed: 9,
            ..PsoConfig::default()
        };
        let out = plan_path_baseline_pso(&s, &FormationSpec::triangle(), &cfg, &CostWeights::default()).unwrap();
        let straight = (s.target - s.start).norm();
        assert!(
            out.cost.length_cost <= 1.02 * straight,
            "{} vs {straight}",
            out.cost.length_cost
        );
        assert!(out.convergence_trace.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn deterministic_and_shares_the_initial_population() {
        let s = Scenario::load(crate::scenario::BRIDGE_SCENARIO).unwrap();
        let f = FormationSpec::triangle();
        let cfg = PsoConfig {
            swarm_size: 30,
            waypoints: 5,
            iterations: 10,
            seed: 21,
            ..PsoConfig::default()
        };
        let w = CostWeights::default();
        let a = plan_path_baseline_pso(&s, &f, &cfg, &w).unwrap();
        let b = plan_path_baseline_pso(&s, &f, &cfg, &w).unwrap();
        assert_eq!(a, b);
        let theta = plan_path(&s, &f, &cfg, &w).unwrap();
        assert_eq!(a.initial_cost(), theta.initial_cost());
    }
}
