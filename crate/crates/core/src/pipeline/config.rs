use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;

use crate::detection::{Polarity, DEFAULT_CONTRAST_STOP};
use crate::error::{Error, Result};
use crate::formation::FormationSpec;
use crate::kv::{self, Section};
use crate::planner::{CostWeights, PlannerKind, PsoConfig};
use crate::scenario::{Scenario, BRIDGE_SCENARIO};

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Assess,
    Plan,
    Formation,
    Simulate,
    Detect,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Assess,
        Stage::Plan,
        Stage::Formation,
        Stage::Simulate,
        Stage::Detect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Assess => "assess",
            Stage::Plan => "plan",
            Stage::Formation => "formation",
            Stage::Simulate => "simulate",
            Stage::Detect => "detect",
        }
    }

    /// Stages whose outputs this one reads.
    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Formation => &[Stage::Plan],
            Stage::Simulate => &[Stage::Formation],
            _ => &[],
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssessConfig {
    /// Corner of the inspected patch.
    pub surface_origin: Vector3<f64>,
    pub surface_normal: Vector3<f64>,
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self {
            surface_origin: Vector3::zeros(),
            surface_normal: Vector3::z(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub planner: PlannerKind,
    pub pso: PsoConfig,
    pub weights: CostWeights,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            planner: PlannerKind::ThetaPso,
            pso: PsoConfig::default(),
            weights: CostWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub dt: f64,
    /// Formation flight length; 0 flies until the last waypoint plus `settle_time`.
    pub duration: f64,
    pub speed: f64,
    pub settle_time: f64,
    pub adaptation: bool,
    /// Amplitude of the sinusoidal torque disturbance, N m.
    pub disturbance: f64,
    pub record_every: usize,
    /// Length of the attitude step-response experiment.
    pub attitude_duration: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 0.0,
            speed: 2.0,
            settle_time: 3.0,
            adaptation: true,
            disturbance: 0.1,
            record_every: 10,
            attitude_duration: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    pub images: Vec<PathBuf>,
    /// Ground-truth masks, matched to `images` by position.
    pub truths: Vec<PathBuf>,
    /// Number of generated crack images added to the batch.
    pub synthetic: usize,
    /// Noise levels cycled over the generated images.
    pub noise_sigma: Vec<f64>,
    pub crack_width: usize,
    pub size: usize,
    pub contrast_stop: f64,
    pub polarity: Polarity,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            images: Vec::new(),
            truths: Vec::new(),
            synthetic: 0,
            noise_sigma: vec![0.0, 10.0, 20.0],
            crack_width: 4,
            size: 256,
            contrast_stop: DEFAULT_CONTRAST_STOP,
            polarity: Polarity::Dark,
        }
    }
}

/// Parsed pipeline configuration. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// `builtin` or a scenario file path.
    pub scenario_source: String,
    pub scenario_text: String,
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub assess: AssessConfig,
    pub plan: PlanConfig,
    pub formation: FormationSpec,
    pub simulate: SimulateConfig,
    pub detect: DetectConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scenario_source: "builtin".into(),
            scenario_text: BRIDGE_SCENARIO.into(),
            seed: 0,
            stages: Stage::ALL.to_vec(),
            assess: AssessConfig::default(),
            plan: PlanConfig::default(),
            formation: FormationSpec::triangle(),
            simulate: SimulateConfig::default(),
            detect: DetectConfig::default(),
        }
    }
}

fn opt<T>(s: &Section, key: &str, default: T, get: impl Fn(&kv::Entry) -> Result<T>) -> Result<T> {
    s.get(key).map_or(Ok(default), get)
}

impl PipelineConfig {
    pub fn load_file(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(FsPath::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &FsPath) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen = Vec::new();
        for s in kv::parse(text)? {
            if seen.contains(&s.name) {
                return Err(Error::Parse {
                    line: s.line,
                    message: format!("duplicate [{}] section", s.name),
                });
            }
            seen.push(s.name.clone());
            match s.name.as_str() {
                "pipeline" => {
                    s.check_keys(&["scenario", "seed", "stages"])?;
                    if let Some(e) = s.get("scenario") {
                        if e.value != "builtin" {
                            let p = base_dir.join(&e.value);
                            cfg.scenario_text = std::fs::read_to_string(&p).map_err(|err| Error::io(&p, err))?;
                        }
                        cfg.scenario_source = e.value.clone();
                    }
                    cfg.seed = opt(&s, "seed", 0, |e| e.u64())?;
                    if let Some(e) = s.get("stages") {
                        let mut stages = e.list().iter().map(|n| n.parse()).collect::<Result<Vec<Stage>>>()?;
                        stages.sort();
                        stages.dedup();
                        cfg.stages = stages;
                    }
                }
                "assess" => {
                    s.check_keys(&["surface_origin", "surface_normal"])?;
                    let d = AssessConfig::default();
                    cfg.assess = AssessConfig {
                        surface_origin: opt(&s, "surface_origin", d.surface_origin, |e| e.vec3())?,
                        surface_normal: opt(&s, "surface_normal", d.surface_normal, |e| e.vec3())?,
                    };
                }
                "plan" => {
                    s.check_keys(&[
                        "planner",
                        "swarm_size",
                        "waypoints",
                        "iterations",
                        "inertia",
                        "cognitive_gain",
                        "social_gain",
                        "init_spread",
                        "weights",
                    ])?;
                    let d = PsoConfig::default();
                    let planner = opt(&s, "planner", PlannerKind::ThetaPso, |e| e.value.parse())?;
                    let pso = PsoConfig {
                        swarm_size: opt(&s, "swarm_size", d.swarm_size, |e| e.usize())?,
                        waypoints: opt(&s, "waypoints", d.waypoints, |e| e.usize())?,
                        iterations: opt(&s, "iterations", d.iterations, |e| e.usize())?,
                        inertia: opt(&s, "inertia", d.inertia, |e| e.f64())?,
                        cognitive_gain: opt(&s, "cognitive_gain", d.cognitive_gain, |e| e.f64())?,
                        social_gain: opt(&s, "social_gain", d.social_gain, |e| e.f64())?,
                        init_spread: opt(&s, "init_spread", d.init_spread, |e| e.f64())?,
                        seed: 0,
                    };
                    pso.validate()?;
                    let weights = match s.get("weights") {
                        Some(e) => {
                            let w = e.vec3()?;
                            CostWeights::new(w.x, w.y, w.z)?
                        }
                        None => CostWeights::default(),
                    };
                    cfg.plan = PlanConfig { planner, pso, weights };
                }
                "formation" => cfg.formation = FormationSpec::from_section(&s)?,
                "simulate" => {
                    s.check_keys(&[
                        "dt",
                        "duration",
                        "speed",
                        "settle_time",
                        "adaptation",
                        "disturbance",
                        "record_every",
                        "attitude_duration",
                    ])?;
                    let d = SimulateConfig::default();
                    cfg.simulate = SimulateConfig {
                        dt: opt(&s, "dt", d.dt, |e| e.f64())?,
                        duration: opt(&s, "duration", d.duration, |e| e.f64())?,
                        speed: opt(&s, "speed", d.speed, |e| e.f64())?,
                        settle_time: opt(&s, "settle_time", d.settle_time, |e| e.f64())?,
                        adaptation: opt(&s, "adaptation", d.adaptation, |e| e.bool())?,
                        disturbance: opt(&s, "disturbance", d.disturbance, |e| e.f64())?,
                        record_every: opt(&s, "record_every", d.record_every, |e| e.usize())?,
                        attitude_duration: opt(&s, "attitude_duration", d.attitude_duration, |e| e.f64())?,
                    };
                }
                "detect" => {
                    s.check_keys(&[
                        "image",
                        "truth",
                        "synthetic",
                        "noise_sigma",
                        "crack_width",
                        "size",
                        "contrast_stop",
                        "polarity",
                    ])?;
                    let d = DetectConfig::default();
                    let noise_sigma = match s.get("noise_sigma") {
                        Some(e) => e
                            .list()
                            .iter()
                            .map(|v| {
                                v.parse::<f64>().map_err(|_| Error::Parse {
                                    line: e.line,
                                    message: format!("bad noise level `{v}`"),
                                })
                            })
                            .collect::<Result<Vec<_>>>()?,
                        None => d.noise_sigma,
                    };
                    cfg.detect = DetectConfig {
                        images: s.all("image").map(|e| base_dir.join(&e.value)).collect(),
                        truths: s.all("truth").map(|e| base_dir.join(&e.value)).collect(),
                        synthetic: opt(&s, "synthetic", d.synthetic, |e| e.usize())?,
                        noise_sigma,
                        crack_width: opt(&s, "crack_width", d.crack_width, |e| e.usize())?,
                        size: opt(&s, "size", d.size, |e| e.usize())?,
                        contrast_stop: opt(&s, "contrast_stop", d.contrast_stop, |e| e.f64())?,
                        polarity: opt(&s, "polarity", d.polarity, |e| e.value.parse())?,
                    };
                }
                other => {
                    return Err(Error::Parse {
                        line: s.line,
                        message: format!("unknown section [{other}]"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario()?;
        self.formation.validate()?;
        self.plan.pso.validate()?;
        let d = &self.detect;
        if !d.truths.is_empty() && d.truths.len() != d.images.len() {
            return Err(Error::Validation(format!(
                "{} truth masks for {} images",
                d.truths.len(),
                d.images.len()
            )));
        }
        if !(d.contrast_stop > 0.0 && d.contrast_stop < 1.0) {
            return Err(Error::Validation("contrast_stop must lie in (0, 1)".into()));
        }
        if d.synthetic > 0 && d.noise_sigma.is_empty() {
            return Err(Error::Validation("noise_sigma needs at least one level".into()));
        }
        let s = &self.simulate;
        if !(s.dt > 0.0 && s.dt <= 0.01)
            || !(s.speed > 0.0)
            || s.record_every == 0
            || !(s.attitude_duration >= 2.0)
            || !(s.disturbance >= 0.0)
        {
            return Err(Error::Validation(
                "simulate: need 0 < dt <= 0.01, speed > 0, record_every >= 1, attitude_duration >= 2, disturbance >= 0"
                    .into(),
            ));
        }
        if self.stages.is_empty() {
            return Err(Error::Validation("no stages selected".into()));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::load(&self.scenario_text)
    }

    pub fn runs(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }
}
