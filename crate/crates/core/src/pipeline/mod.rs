//! Stage orchestration with content-hash caching, run manifests, metrics
//! reports and the seeded planner comparison.

mod compare;
mod config;
mod report;
mod run;

pub use compare::{
    compare_planners, median, run_planner, PlannerComparison, PlannerSetup, SeedRow, Verdict, MIN_COMPARISON_SEEDS,
};
pub use config::{AssessConfig, DetectConfig, PipelineConfig, PlanConfig, SimulateConfig, Stage};
pub use report::{detection_table, evaluate_dirs, fixed, MetricsReport, ReportSection};
pub use run::{run_pipeline, sha256_hex, FileRecord, PipelineRun, RunManifest, StageRecord, TOOL_VERSION};
