use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::formation::FormationSpec;
use crate::scenario::{path_length, Path, Scenario, DEFAULT_SAMPLES_PER_SEGMENT};

/// Weights of the length, violation and altitude terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub length_weight: f64,
    pub violation_weight: f64,
    pub altitude_weight: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            length_weight: 1.0,
            violation_weight: 100.0,
            altitude_weight: 1.0,
        }
    }
}

impl CostWeights {
    pub fn new(length_weight: f64, violation_weight: f64, altitude_weight: f64) -> Result<Self> {
        let w = Self {
            length_weight,
            violation_weight,
            altitude_weight,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.length_weight, self.violation_weight, self.altitude_weight];
        if all.iter().any(|w| !(*w >= 0.0)) || all.iter().all(|w| *w == 0.0) {
            return Err(Error::Validation(
                "cost weights must be >= 0 with at least one positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub total: f64,
    pub length_cost: f64,
    pub violation_cost: f64,
    pub altitude_cost: f64,
}

/// Everything the cost needs that does not change between evaluations.
#[derive(Debug, Clone)]
pub struct CostModel<'a> {
    pub scenario: &'a Scenario,
    pub weights: CostWeights,
    offsets: Vec<Vector3<f64>>,
    safe_distance: f64,
    samples_per_segment: usize,
    violation_offset: f64,
}

/// Constant added to every positive penetration or spacing shortfall before
/// squaring. A pure square vanishes smoothly at the constraint boundary, so
/// the optimizer would settle a hair inside it; the offset makes any
/// violation cost at least `offset^2` and keeps returned paths feasible.
pub const DEFAULT_VIOLATION_OFFSET: f64 = 0.1;

impl<'a> CostModel<'a> {
    pub fn new(scenario: &'a Scenario, formation: &FormationSpec, weights: CostWeights) -> Self {
        Self {
            scenario,
            weights,
            offsets: formation.inertial_offsets(),
            safe_distance: formation.safe_distance,
            samples_per_segment: DEFAULT_SAMPLES_PER_SEGMENT,
            violation_offset: DEFAULT_VIOLATION_OFFSET,
        }
    }

    pub fn with_violation_offset(mut self, offset: f64) -> Self {
        self.violation_offset = offset.max(0.0);
        self
    }

    pub fn with_samples_per_segment(mut self, n: usize) -> Self {
        self.samples_per_segment = n.max(2);
        self
    }

    /// Length of the centroid path; `(violation + offset)^2` summed over every
    /// sampled point of every UAV path that penetrates an inflated obstacle
    /// and over every sampled UAV pair closer than the safe distance; mean
    /// squared altitude deviation of the sampled centroid path.
    pub fn evaluate(&self, path: &Path) -> CostBreakdown {
        let samples = path.sample(self.samples_per_segment);
        let length_cost = path_length(path);

        let mut obstacle_penalty = 0.0;
        for offset in &self.offsets {
            for p in &samples {
                let q = p + offset;
                for o in &self.scenario.obstacles {
                    let pen = -o.clearance(&q);
                    if pen > 0.0 {
                        obstacle_penalty += (pen + self.violation_offset).powi(2);
                    }
                }
            }
        }

        let mut spacing_penalty = 0.0;
        for i in 0..self.offsets.len() {
            for j in i + 1..self.offsets.len() {
                for p in &samples {
                    let d = ((p + self.offsets[i]) - (p + self.offsets[j])).norm();
                    let short = self.safe_distance - d;
                    if short > 0.0 {
                        spacing_penalty += (short + self.violation_offset).powi(2);
                    }
                }
            }
        }
        let violation_cost = obstacle_penalty + spacing_penalty;

        let altitude_cost = if samples.is_empty() {
            0.0
        } else {
            samples
                .iter()
                .map(|p| (p.z - self.scenario.altitude_ref).powi(2))
                .sum::<f64>()
                / samples.len() as f64
        };

        let w = &self.weights;
        CostBreakdown {
            total: w.length_weight * length_cost
                + w.violation_weight * violation_cost
                + w.altitude_weight * altitude_cost,
            length_cost,
            violation_cost,
            altitude_cost,
        }
    }
}

pub fn evaluate_cost(
    path: &Path,
    scenario: &Scenario,
    formation: &FormationSpec,
    weights: &CostWeights,
) -> CostBreakdown {
    CostModel::new(scenario, formation, *weights).evaluate(path)
}
