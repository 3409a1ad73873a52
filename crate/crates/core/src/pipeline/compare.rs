use crate::error::{Error, Result};
use crate::formation::FormationSpec;
use crate::planner::{plan_path, plan_path_baseline_pso, CostWeights, PlannedPath, PlannerKind, PsoConfig};
use crate::scenario::Scenario;

/// Runs the selected planner with `config` as given (including its seed).
pub fn run_planner(
    kind: PlannerKind,
    scenario: &Scenario,
    formation: &FormationSpec,
    config: &PsoConfig,
    weights: &CostWeights,
) -> Result<PlannedPath> {
    match kind {
        PlannerKind::ThetaPso => plan_path(scenario, formation, config, weights),
        PlannerKind::Pso => plan_path_baseline_pso(scenario, formation, config, weights),
    }
}

/// One side of a planner comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerSetup {
    pub kind: PlannerKind,
    pub config: PsoConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedRow {
    pub seed: u64,
    pub left_cost: f64,
    pub left_iterations: usize,
    pub right_cost: f64,
    pub right_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Left median cost is no worse and its median iteration count strictly lower.
    LeftWins,
    /// Both medians equal.
    Tie,
    RightWins,
    /// Neither side dominates.
    Mixed,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::LeftWins => "left_wins",
            Verdict::Tie => "tie",
            Verdict::RightWins => "right_wins",
            Verdict::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerComparison {
    pub left: PlannerSetup,
    pub right: PlannerSetup,
    pub rows: Vec<SeedRow>,
    pub median_left_cost: f64,
    pub median_left_iterations: f64,
    pub median_right_cost: f64,
    pub median_right_iterations: f64,
    pub verdict: Verdict,
}

/// Median with the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub const MIN_COMPARISON_SEEDS: usize = 5;

/// Runs both planners on every seed and compares the medians of the final
/// cost and of the iterations needed to get within 1 % of it.
pub fn compare_planners(
    scenario: &Scenario,
    formation: &FormationSpec,
    weights: &CostWeights,
    seeds: &[u64],
    left: &PlannerSetup,
    right: &PlannerSetup,
) -> Result<PlannerComparison> {
    if seeds.len() < MIN_COMPARISON_SEEDS {
        return Err(Error::Validation(format!(
            "need at least {MIN_COMPARISON_SEEDS} seeds, got {}",
            seeds.len()
        )));
    }
    let run = |setup: &PlannerSetup, seed: u64| {
        let config = PsoConfig {
            seed,
            ..setup.config.clone()
        };
        run_planner(setup.kind, scenario, formation, &config, weights)
    };
    let mut rows = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let l = run(left, seed)?;
        let r = run(right, seed)?;
        rows.push(SeedRow {
            seed,
            left_cost: l.cost.total,
            left_iterations: l.iterations_to_within_1pct,
            right_cost: r.cost.total,
            right_iterations: r.iterations_to_within_1pct,
        });
    }
    let col = |f: fn(&SeedRow) -> f64| median(&rows.iter().map(f).collect::<Vec<_>>());
    let (lc, li) = (col(|r| r.left_cost), col(|r| r.left_iterations as f64));
    let (rc, ri) = (col(|r| r.right_cost), col(|r| r.right_iterations as f64));
    let verdict = if lc == rc && li == ri {
        Verdict::Tie
    } else if lc <= rc && li < ri {
        Verdict::LeftWins
    } else if rc <= lc && ri < li {
        Verdict::RightWins
    } else {
        Verdict::Mixed
    };
    Ok(PlannerComparison {
        left: left.clone(),
        right: right.clone(),
        rows,
        median_left_cost: lc,
        median_left_iterations: li,
        median_right_cost: rc,
        median_right_iterations: ri,
        verdict,
    })
}

impl PlannerComparison {
    /// True when the left side is angle-encoded PSO and wins.
    pub fn theta_pso_wins(&self) -> bool {
        self.left.kind == PlannerKind::ThetaPso && self.verdict == Verdict::LeftWins
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "seed,{l}_cost,{l}_iterations,{r}_cost,{r}_iterations\n",
            l = self.left.kind.name(),
            r = self.right.kind.name()
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{},{:.6},{}\n",
                r.seed, r.left_cost, r.left_iterations, r.right_cost, r.right_iterations
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let (l, r) = (self.left.kind.name(), self.right.kind.name());
        let mut out = format!(
            "{:>6}  {:>14}  {:>10}  {:>14}  {:>10}\n",
            "seed",
            format!("{l} cost"),
            "iters",
            format!("{r} cost"),
            "iters"
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{:>6}  {:>14.4}  {:>10}  {:>14.4}  {:>10}\n",
                row.seed, row.left_cost, row.left_iterations, row.right_cost, row.right_iterations
            ));
        }
        out.push_str(&format!(
            "{:>6}  {:>14.4}  {:>10.1}  {:>14.4}  {:>10.1}\n",
            "median",
            self.median_left_cost,
            self.median_left_iterations,
            self.median_right_cost,
            self.median_right_iterations
        ));
        out.push_str(&format!("verdict: {}\n", self.verdict.name()));
        out.push_str(&format!("theta_pso_wins: {}\n", self.theta_pso_wins()));
        out
    }
}
