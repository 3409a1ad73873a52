use std::path::{Path as FsPath, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::compare::run_planner;
use super::config::{PipelineConfig, Stage};
use super::report::{fixed, MetricsReport, ReportSection};
use crate::control::{
    settling_time, simulate_attitude_tracking, simulate_formation_flight, AtsmConfig, Disturbance, FlightOptions,
    QuadParams, ReferenceProfile, SimOptions, SimTrace,
};
use crate::coverage::generate_viewpoints;
use crate::detection::{detect, detect_otsu, f_measure, read_gray, synth_defect_image, GrayImage, Mask, SynthSpec};
use crate::error::{Error, Result};
use crate::formation::{formation_centroid, individual_trajectories};
use crate::planner::PsoConfig;
use crate::scenario::{min_clearance, path_length, Path, Scenario, DEFAULT_SAMPLES_PER_SEGMENT};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const STAGE_RECORD: &str = "stage.txt";
const SUMMARY: &str = "summary.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &FsPath) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &FsPath, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// A file and the hash of its content. Paths are relative to the run
/// directory unless they point outside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: Stage,
    /// Hash of everything the stage's outputs depend on.
    pub key: String,
    pub cache_hit: bool,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub duration: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "[run]\ntool_version = {}\nscenario_sha256 = {}\nseed = {}\n",
            self.tool_version, self.scenario_sha256, self.seed
        );
        for s in &self.stages {
            out.push_str(&format!(
                "\n[stage]\nname = {}\nkey = {}\ncache = {}\nduration_ms = {:.3}\n",
                s.stage.name(),
                s.key,
                if s.cache_hit { "hit" } else { "miss" },
                s.duration.as_secs_f64() * 1e3
            ));
            for f in &s.inputs {
                out.push_str(&format!("input = {} {}\n", f.path.display(), f.sha256));
            }
            for f in &s.outputs {
                out.push_str(&format!("output = {} {}\n", f.path.display(), f.sha256));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub manifest: RunManifest,
    pub report: MetricsReport,
}

/// Files produced by one stage, written under `<out>/<stage>/`.
struct StageOutput {
    files: Vec<(String, Vec<u8>)>,
    summary: ReportSection,
}

impl StageOutput {
    fn new(stage: Stage) -> Self {
        Self {
            files: Vec::new(),
            summary: ReportSection::new(stage.name()),
        }
    }

    fn file(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }
}

struct Context<'a> {
    cfg: &'a PipelineConfig,
    scenario: Scenario,
    out_dir: &'a FsPath,
}

impl Context<'_> {
    fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out_dir.join(stage.name())
    }

    /// Sorted `uav_<n>.csv` paths of the formation stage.
    fn uav_path_files(&self) -> Result<Vec<PathBuf>> {
        let dir = self.stage_dir(Stage::Formation);
        let mut files: Vec<(usize, PathBuf)> = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let p = entry.map_err(|e| Error::io(&dir, e))?.path();
            let n = p
                .file_name()
                .and_then(|f| f.to_str())
                .and_then(|f| f.strip_prefix("uav_"))
                .and_then(|f| f.strip_suffix(".csv"))
                .and_then(|n| n.parse().ok());
            if let Some(n) = n {
                files.push((n, p));
            }
        }
        files.sort();
        Ok(files.into_iter().map(|(_, p)| p).collect())
    }

    /// Files read by `stage` that are not produced inside the run directory
    /// by an upstream stage.
    fn inputs(&self, stage: Stage) -> Result<Vec<PathBuf>> {
        Ok(match stage {
            Stage::Assess | Stage::Plan => Vec::new(),
            Stage::Formation => vec![self.stage_dir(Stage::Plan).join("path.csv")],
            Stage::Simulate => self.uav_path_files()?,
            Stage::Detect => self
                .cfg
                .detect
                .images
                .iter()
                .chain(&self.cfg.detect.truths)
                .cloned()
                .collect(),
        })
    }

    /// Everything the stage output depends on, serialized with exact float
    /// formatting.
    fn fingerprint(&self, stage: Stage) -> String {
        let c = self.cfg;
        let scenario = &c.scenario_text;
        match stage {
            Stage::Assess => format!("{scenario}\n{:?}", c.assess),
            Stage::Plan => format!("{scenario}\n{:?}\n{:?}\nseed={}", c.plan, c.formation, c.seed),
            Stage::Formation => format!("{:?}", c.formation),
            Stage::Simulate => format!("{:?}\n{:?}", c.simulate, c.formation.shape_euler),
            Stage::Detect => format!("{:?}\nseed={}", c.detect, c.seed),
        }
    }
}

fn record_files(dir: &FsPath, names: &[String], rel_root: &FsPath) -> Result<Vec<FileRecord>> {
    names
        .iter()
        .map(|n| {
            let p = dir.join(n);
            Ok(FileRecord {
                sha256: sha256_hex(&read(&p)?),
                path: p.strip_prefix(rel_root).map(FsPath::to_path_buf).unwrap_or(p),
            })
        })
        .collect()
}

/// Output file names listed in a stage record whose key equals `key` and
/// whose files still hash to the recorded values.
fn cached_outputs(dir: &FsPath, key: &str) -> Option<Vec<String>> {
    let text = std::fs::read_to_string(dir.join(STAGE_RECORD)).ok()?;
    let mut lines = text.lines();
    if lines.next()? != format!("key = {key}") {
        return None;
    }
    let mut names = Vec::new();
    for line in lines {
        let (name, sha) = line.strip_prefix("output = ")?.rsplit_once(' ')?;
        if sha256_hex(&std::fs::read(dir.join(name)).ok()?) != sha {
            return None;
        }
        names.push(name.to_string());
    }
    Some(names)
}

fn with_upstream(stages: &[Stage]) -> Vec<Stage> {
    let mut all: Vec<Stage> = stages.to_vec();
    let mut i = 0;
    while i < all.len() {
        for up in all[i].upstream() {
            if !all.contains(up) {
                all.push(*up);
            }
        }
        i += 1;
    }
    all.sort();
    all
}

/// Runs the configured stages (plus any they depend on) into `out_dir`,
/// reusing outputs whose inputs are unchanged. Writes `manifest.txt` and
/// `report.txt` at the top of `out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &FsPath) -> Result<PipelineRun> {
    cfg.validate()?;
    let ctx = Context {
        cfg,
        scenario: cfg.scenario()?,
        out_dir,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut records: Vec<StageRecord> = Vec::new();
    let mut sections = Vec::new();

    for stage in with_upstream(&cfg.stages) {
        let started = Instant::now();
        let tag = |e: Error| Error::Stage {
            stage: stage.name().into(),
            source: Box::new(e),
        };
        let dir = ctx.stage_dir(stage);
        let inputs = ctx.inputs(stage).map_err(tag)?;

        let mut hasher = Sha256::new();
        hasher.update(TOOL_VERSION.as_bytes());
        hasher.update(stage.name().as_bytes());
        hasher.update(ctx.fingerprint(stage).as_bytes());
        let mut input_records = Vec::new();
        for p in &inputs {
            let sha = sha256_hex(&read(p).map_err(tag)?);
            hasher.update(sha.as_bytes());
            input_records.push(FileRecord {
                path: p.strip_prefix(out_dir).map(FsPath::to_path_buf).unwrap_or(p.clone()),
                sha256: sha,
            });
        }
        let key = hex::encode(hasher.finalize());

        let (names, cache_hit) = match cached_outputs(&dir, &key) {
            Some(names) => (names, true),
            None => {
                std::fs::create_dir_all(&dir).map_err(|e| tag(Error::io(&dir, e)))?;
                // a stale record must not survive a failed rerun
                let _ = std::fs::remove_file(dir.join(STAGE_RECORD));
                let out = run_stage(&ctx, stage).map_err(tag)?;
                let mut names = Vec::new();
                let mut record = format!("key = {key}\n");
                let summary = out.summary.to_kv();
                for (name, bytes) in out
                    .files
                    .iter()
                    .map(|(n, b)| (n.as_str(), b.as_slice()))
                    .chain([(SUMMARY, summary.as_bytes())])
                {
                    write(&dir.join(name), bytes).map_err(tag)?;
                    record.push_str(&format!("output = {name} {}\n", sha256_hex(bytes)));
                    names.push(name.to_string());
                }
                write(&dir.join(STAGE_RECORD), record.as_bytes()).map_err(tag)?;
                (names, false)
            }
        };

        let summary_text = std::fs::read_to_string(dir.join(SUMMARY)).map_err(|e| tag(Error::io(&dir, e)))?;
        sections.push(ReportSection::parse(&summary_text).map_err(tag)?);
        records.push(StageRecord {
            stage,
            key,
            cache_hit,
            inputs: input_records,
            outputs: record_files(&dir, &names, out_dir).map_err(tag)?,
            duration: started.elapsed(),
        });
    }

    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        scenario_sha256: sha256_hex(cfg.scenario_text.as_bytes()),
        seed: cfg.seed,
        stages: records,
    };
    let report = MetricsReport {
        header: vec![
            ("tool_version".into(), TOOL_VERSION.into()),
            ("scenario".into(), cfg.scenario_source.clone()),
            ("scenario_sha256".into(), manifest.scenario_sha256.clone()),
            ("seed".into(), cfg.seed.to_string()),
        ],
        sections,
    };
    write(&out_dir.join("report.txt"), report.to_text().as_bytes())?;
    write(&out_dir.join("manifest.txt"), manifest.to_text().as_bytes())?;
    Ok(PipelineRun { manifest, report })
}

fn run_stage(ctx: &Context<'_>, stage: Stage) -> Result<StageOutput> {
    match stage {
        Stage::Assess => assess(ctx),
        Stage::Plan => plan(ctx),
        Stage::Formation => formation(ctx),
        Stage::Simulate => simulate(ctx),
        Stage::Detect => detect_stage(ctx),
    }
}

fn assess(ctx: &Context<'_>) -> Result<StageOutput> {
    let s = &ctx.scenario;
    let (camera, request) = match (&s.camera, &s.coverage) {
        (Some(c), Some(r)) => (c, r),
        _ => {
            return Err(Error::Validation(
                "scenario needs [camera] and [coverage] sections for assessment".into(),
            ))
        }
    };
    let views = generate_viewpoints(
        request,
        camera,
        &ctx.cfg.assess.surface_origin,
        &ctx.cfg.assess.surface_normal,
    )?;
    let mut csv = String::from("x,y,z,dir_x,dir_y,dir_z\n");
    for v in &views {
        let (p, o) = (v.position, v.orientation);
        csv.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            p.x, p.y, p.z, o.x, o.y, o.z
        ));
    }
    let mut out = StageOutput::new(Stage::Assess);
    out.file("viewpoints.csv", csv);
    let first = views.first().expect("a valid request yields at least one view");
    out.summary.push("footprint_m", fixed(first.footprint, 4));
    out.summary.push("standoff_m", fixed(first.standoff, 4));
    out.summary.push("viewpoints", views.len());
    Ok(out)
}

fn plan(ctx: &Context<'_>) -> Result<StageOutput> {
    let p = &ctx.cfg.plan;
    let config = PsoConfig {
        seed: ctx.cfg.seed,
        ..p.pso.clone()
    };
    let planned = run_planner(p.planner, &ctx.scenario, &ctx.cfg.formation, &config, &p.weights)?;
    let mut out = StageOutput::new(Stage::Plan);
    out.file("path.csv", planned.path.to_csv());
    out.file("convergence.csv", planned.convergence_csv());
    let s = &mut out.summary;
    s.push("planner", p.planner.name());
    s.push("final_cost", fixed(planned.cost.total, 4));
    s.push("length_cost", fixed(planned.cost.length_cost, 4));
    s.push("violation_cost", fixed(planned.cost.violation_cost, 6));
    s.push("altitude_cost", fixed(planned.cost.altitude_cost, 4));
    s.push("initial_cost", fixed(planned.initial_cost(), 4));
    s.push("iterations_to_1pct", planned.iterations_to_within_1pct);
    s.push("path_length_m", fixed(path_length(&planned.path), 4));
    s.push(
        "min_clearance_m",
        fixed(
            min_clearance(&planned.path, &ctx.scenario.obstacles, DEFAULT_SAMPLES_PER_SEGMENT),
            4,
        ),
    );
    Ok(out)
}

fn load_path(path: &FsPath) -> Result<Path> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Path::from_csv(&text)
}

fn formation(ctx: &Context<'_>) -> Result<StageOutput> {
    let reference = load_path(&ctx.stage_dir(Stage::Plan).join("path.csv"))?;
    let spec = &ctx.cfg.formation;
    let paths = individual_trajectories(&reference, spec);
    let mut out = StageOutput::new(Stage::Formation);
    for (n, p) in paths.iter().enumerate() {
        out.file(format!("uav_{}.csv", n + 1), p.to_csv());
    }
    let mut centroid_dev: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for k in 0..reference.len() {
        let at: Vec<_> = paths.iter().map(|p| p.waypoints[k]).collect();
        centroid_dev = centroid_dev.max((formation_centroid(&at)? - reference.waypoints[k]).norm());
    }
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            let d: Vec<f64> = (0..reference.len())
                .map(|k| (paths[i].waypoints[k] - paths[j].waypoints[k]).norm())
                .collect();
            let (lo, hi) = d
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            spread = spread.max(hi - lo);
        }
    }
    out.summary.push("uavs", paths.len());
    out.summary
        .push("max_centroid_deviation_m", format!("{centroid_dev:.3e}"));
    out.summary.push("max_pair_distance_spread_m", format!("{spread:.3e}"));
    Ok(out)
}

fn decimate(trace: &SimTrace, every: usize) -> SimTrace {
    SimTrace {
        dt: trace.dt * every as f64,
        records: trace.records.iter().step_by(every).copied().collect(),
    }
}

fn simulate(ctx: &Context<'_>) -> Result<StageOutput> {
    let c = &ctx.cfg.simulate;
    let paths = ctx
        .uav_path_files()?
        .iter()
        .map(|p| load_path(p))
        .collect::<Result<Vec<_>>>()?;
    let disturbance = Disturbance::sinusoid(c.disturbance);
    let sim = SimOptions {
        dt: c.dt,
        duration: c.duration,
        adaptation: c.adaptation,
        boundary_layer: None,
        record_every: c.record_every,
    };
    let flight = FlightOptions {
        sim,
        speed: c.speed,
        settle_time: c.settle_time,
        shape_euler: ctx.cfg.formation.shape_euler,
        disturbance,
        ..FlightOptions::default()
    };
    let atsm = AtsmConfig::default();
    let params = QuadParams::default();
    let result = simulate_formation_flight(&paths, &atsm, &params, &flight)?;

    let profile = ReferenceProfile::inspection_steps();
    let attitude = simulate_attitude_tracking(
        &profile,
        &disturbance,
        &atsm,
        &params,
        &SimOptions {
            duration: c.attitude_duration,
            record_every: 1,
            ..sim
        },
    )?;

    let mut out = StageOutput::new(Stage::Simulate);
    for (n, t) in result.traces.iter().enumerate() {
        out.file(format!("trace_{}.csv", n + 1), t.to_csv());
    }
    out.file("errors.csv", result.errors_csv());
    out.file("attitude.csv", decimate(&attitude, c.record_every).to_csv());
    let s = &mut out.summary;
    s.push(
        "flight_time_s",
        fixed(result.traces[0].records.last().map_or(0.0, |r| r.t), 3),
    );
    for (n, e) in result.rms_error.iter().enumerate() {
        s.push(format!("rms_error_uav_{}_m", n + 1), fixed(*e, 4));
    }
    for (step, axis) in profile.steps.iter().zip(["roll", "pitch", "yaw"]) {
        let t = settling_time(&attitude, step.axis, step.time, step.value, 0.5f64.to_radians());
        s.push(
            format!("settling_{axis}_s"),
            t.map_or_else(|| "none".to_string(), |t| fixed(t, 3)),
        );
    }
    Ok(out)
}

struct DetectItem {
    name: String,
    image: GrayImage,
    truth: Option<Mask>,
    generated: bool,
}

fn detect_stage(ctx: &Context<'_>) -> Result<StageOutput> {
    let d = &ctx.cfg.detect;
    let mut items = Vec::new();
    for (i, p) in d.images.iter().enumerate() {
        let name = p
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Validation(format!("bad image path {}", p.display())))?
            .to_string();
        if items.iter().any(|it: &DetectItem| it.name == name) {
            return Err(Error::Validation(format!("duplicate image name `{name}`")));
        }
        let truth = match d.truths.get(i) {
            Some(t) => Some(Mask::from_gray(&read_gray(t)?)),
            None => None,
        };
        items.push(DetectItem {
            name,
            image: read_gray(p)?,
            truth,
            generated: false,
        });
    }
    for i in 0..d.synthetic {
        let s = synth_defect_image(&SynthSpec {
            width: d.size,
            height: d.size,
            noise_sigma: d.noise_sigma[i % d.noise_sigma.len()],
            crack_width: d.crack_width,
            seed: ctx.cfg.seed.wrapping_add(i as u64),
            vertical: i % 2 == 1,
            ..SynthSpec::default()
        })?;
        items.push(DetectItem {
            name: format!("synth_{i:03}"),
            image: s.image,
            truth: Some(s.truth),
            generated: true,
        });
    }
    if items.is_empty() {
        return Err(Error::Validation("detect stage has no images".into()));
    }

    let results = items
        .par_iter()
        .map(|it| {
            let (seg, mask) = detect(&it.image, d.contrast_stop, d.polarity)?;
            let (otsu_t, otsu_mask) = detect_otsu(&it.image, d.polarity)?;
            let scores = match &it.truth {
                Some(t) => Some((f_measure(&mask, t)?, f_measure(&otsu_mask, t)?)),
                None => None,
            };
            Ok((seg, mask, otsu_t, scores))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = StageOutput::new(Stage::Detect);
    let mut csv =
        String::from("image,threshold,iterations,converged,precision,recall,f_measure,otsu_threshold,otsu_f_measure\n");
    let (mut f_sum, mut otsu_sum, mut scored) = (0.0, 0.0, 0usize);
    for (it, (seg, mask, otsu_t, scores)) in items.iter().zip(&results) {
        out.file(format!("mask_{}.pgm", it.name), mask.to_gray().to_pgm());
        if it.generated {
            out.file(format!("image_{}.pgm", it.name), it.image.to_pgm());
            if let Some(t) = &it.truth {
                out.file(format!("truth_{}.pgm", it.name), t.to_gray().to_pgm());
            }
        }
        let score_cols = match scores {
            Some((m, o)) => {
                f_sum += m.f_measure;
                otsu_sum += o.f_measure;
                scored += 1;
                format!(
                    "{:.6},{:.6},{:.6},{otsu_t},{:.6}",
                    m.precision, m.recall, m.f_measure, o.f_measure
                )
            }
            None => format!(",,,{otsu_t},"),
        };
        csv.push_str(&format!(
            "{},{},{},{},{score_cols}\n",
            it.name,
            seg.final_threshold,
            seg.iteration_thresholds.len(),
            seg.converged
        ));
        let row = match scores {
            Some((m, o)) => format!(
                "T={} iterations={} p={:.4} r={:.4} F={:.4} otsu_F={:.4}",
                seg.final_threshold,
                seg.iteration_thresholds.len(),
                m.precision,
                m.recall,
                m.f_measure,
                o.f_measure
            ),
            None => format!(
                "T={} iterations={}",
                seg.final_threshold,
                seg.iteration_thresholds.len()
            ),
        };
        out.summary.push(it.name.clone(), row);
    }
    out.file("detections.csv", csv);
    out.summary.push("images", items.len());
    if scored > 0 {
        out.summary.push("mean_f_measure", fixed(f_sum / scored as f64, 4));
        out.summary
            .push("mean_otsu_f_measure", fixed(otsu_sum / scored as f64, 4));
    }
    Ok(out)
}
