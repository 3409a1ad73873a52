use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uav_inspect::control::{
    settling_time, simulate_attitude_tracking, simulate_formation_flight, AtsmConfig, Disturbance, FlightOptions,
    QuadParams, ReferenceProfile, SimOptions,
};
use uav_inspect::coverage::generate_viewpoints;
use uav_inspect::detection::{detect, read_gray, synth_defect_image, Polarity, SynthSpec};
use uav_inspect::formation::{individual_trajectories, FormationSpec};
use uav_inspect::pipeline::{
    compare_planners, detection_table, evaluate_dirs, run_pipeline, run_planner, PipelineConfig, PlannerSetup,
};
use uav_inspect::planner::{PlannerKind, PsoConfig};
use uav_inspect::scenario::{Path, Scenario};
use uav_inspect::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_VERDICT: u8 = 4;

#[derive(Parser)]
#[command(name = "uav-inspect", version, about = "Multi-UAV surface inspection toolkit")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file, for `detect`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Pipeline configuration; its sections provide defaults for every subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file; the built-in bridge scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct PlannerArgs {
    #[arg(long)]
    swarm_size: Option<usize>,
    #[arg(long)]
    waypoints: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Standoff distance, footprint and viewpoint grid for the scenario's camera.
    Assess {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
    /// Plan the formation centroid path.
    Plan {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// `theta-pso` or `pso`.
        #[arg(long)]
        planner: Option<String>,
        #[command(flatten)]
        pso: PlannerArgs,
    },
    /// Expand a centroid path into one path per UAV.
    Formation {
        #[arg(long)]
        path: PathBuf,
        /// File with a `[formation]` section; the three-UAV triangle when omitted.
        #[arg(long)]
        formation: Option<PathBuf>,
    },
    /// Fly the UAV paths in DIR and run the attitude step experiment.
    Simulate {
        #[arg(long)]
        paths: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        /// Flight length in seconds; until the last waypoint when omitted.
        #[arg(long)]
        duration: Option<f64>,
        /// Disable gain adaptation.
        #[arg(long)]
        no_adaptation: bool,
    },
    /// Segment dark (or bright) defects in a PNM image.
    Detect {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        cs: Option<f64>,
        #[arg(long)]
        polarity: Option<String>,
    },
    /// Score predicted masks against truth masks with matching names.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the configured stages with caching.
    Pipeline,
    /// Compare angle-encoded PSO with conventional PSO over many seeds.
    ComparePlanners {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Number of seeds, counted up from `--seed`.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[command(flatten)]
        pso: PlannerArgs,
    },
    /// Generate synthetic crack images with truth masks.
    Synth {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,10,20")]
        noise: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        crack_width: usize,
    },
}

enum Failure {
    Error(Error),
    Verdict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type CliResult = Result<(), Failure>;

fn io_err(path: &FsPath, e: std::io::Error) -> Failure {
    Failure::Error(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write(path: &FsPath, bytes: impl AsRef<[u8]>) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read_text(path: &FsPath) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

struct Env {
    config: PipelineConfig,
    out: PathBuf,
}

impl Env {
    fn scenario(&self, arg: &ScenarioArg) -> Result<Scenario, Failure> {
        match &arg.scenario {
            Some(p) => Ok(Scenario::load(&read_text(p)?)?),
            None => Ok(self.config.scenario()?),
        }
    }

    fn pso(&self, args: &PlannerArgs) -> PsoConfig {
        let mut c = self.config.plan.pso.clone();
        c.seed = self.config.seed;
        if let Some(v) = args.swarm_size {
            c.swarm_size = v;
        }
        if let Some(v) = args.waypoints {
            c.waypoints = v;
        }
        if let Some(v) = args.iterations {
            c.iterations = v;
        }
        c
    }
}

fn run(cli: Cli) -> CliResult {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let env = Env {
        config,
        out: cli.out.clone().unwrap_or_else(|| PathBuf::from("out")),
    };

    match cli.command {
        Command::Assess { scenario } => {
            let s = env.scenario(&scenario)?;
            let (Some(camera), Some(request)) = (&s.camera, &s.coverage) else {
                return Err(Error::Validation("scenario has no [camera] and [coverage] sections".into()).into());
            };
            let a = &env.config.assess;
            let views = generate_viewpoints(request, camera, &a.surface_origin, &a.surface_normal)?;
            let mut csv = String::from("x,y,z,dir_x,dir_y,dir_z\n");
            for v in &views {
                let (p, o) = (v.position, v.orientation);
                csv.push_str(&format!(
                    "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                    p.x, p.y, p.z, o.x, o.y, o.z
                ));
            }
            write(&env.out.join("viewpoints.csv"), csv)?;
            println!("footprint_m  {:.4}", views[0].footprint);
            println!("standoff_m   {:.4}", views[0].standoff);
            println!("viewpoints   {}", views.len());
        }
        Command::Plan { scenario, planner, pso } => {
            let s = env.scenario(&scenario)?;
            let kind = match planner {
                Some(p) => p.parse()?,
                None => env.config.plan.planner,
            };
            let config = env.pso(&pso);
            let planned = run_planner(kind, &s, &env.config.formation, &config, &env.config.plan.weights)?;
            write(&env.out.join("path.csv"), planned.path.to_csv())?;
            write(&env.out.join("convergence.csv"), planned.convergence_csv())?;
            println!("planner             {}", kind.name());
            println!("final_cost          {:.4}", planned.cost.total);
            println!("violation_cost      {:.6}", planned.cost.violation_cost);
            println!("iterations_to_1pct  {}", planned.iterations_to_within_1pct);
        }
        Command::Formation { path, formation } => {
            let reference = Path::from_csv(&read_text(&path)?)?;
            let spec = match formation {
                Some(f) => FormationSpec::load(&read_text(&f)?)?,
                None => env.config.formation.clone(),
            };
            for (n, p) in individual_trajectories(&reference, &spec).iter().enumerate() {
                write(&env.out.join(format!("uav_{}.csv", n + 1)), p.to_csv())?;
            }
            println!("wrote {} UAV paths to {}", spec.len(), env.out.display());
        }
        Command::Simulate {
            paths,
            dt,
            duration,
            no_adaptation,
        } => simulate(&env, &paths, dt, duration, no_adaptation)?,
        Command::Detect { input, cs, polarity } => {
            let image = read_gray(&input)?;
            let polarity: Polarity = match polarity {
                Some(p) => p.parse()?,
                None => env.config.detect.polarity,
            };
            let (seg, mask) = detect(&image, cs.unwrap_or(env.config.detect.contrast_stop), polarity)?;
            let out = cli.out.unwrap_or_else(|| PathBuf::from("mask.pgm"));
            write(&out, mask.to_gray().to_pgm())?;
            println!("threshold   {}", seg.final_threshold);
            println!("iterations  {:?}", seg.iteration_thresholds);
            println!("contrasts   {:?}", seg.contrasts);
            println!("converged   {}", seg.converged);
        }
        Command::Evaluate { pred, truth, report } => {
            let table = detection_table(&evaluate_dirs(&pred, &truth)?);
            if let Some(r) = report {
                write(&r, &table)?;
            }
            print!("{table}");
        }
        Command::Pipeline => {
            let run = run_pipeline(&env.config, &env.out)?;
            print!("{}", run.report.to_text());
            for s in &run.manifest.stages {
                eprintln!(
                    "{:<10} {:<5} {:>10.1} ms",
                    s.stage.name(),
                    if s.cache_hit { "hit" } else { "miss" },
                    s.duration.as_secs_f64() * 1e3
                );
            }
        }
        Command::ComparePlanners { scenario, seeds, pso } => {
            let s = env.scenario(&scenario)?;
            let config = env.pso(&pso);
            let seed_list: Vec<u64> = (0..seeds as u64).map(|i| env.config.seed + i).collect();
            let side = |kind| PlannerSetup {
                kind,
                config: config.clone(),
            };
            let cmp = compare_planners(
                &s,
                &env.config.formation,
                &env.config.plan.weights,
                &seed_list,
                &side(PlannerKind::ThetaPso),
                &side(PlannerKind::Pso),
            )?;
            write(&env.out.join("comparison.csv"), cmp.to_csv())?;
            write(&env.out.join("comparison.txt"), cmp.to_text())?;
            print!("{}", cmp.to_text());
            if !cmp.theta_pso_wins() {
                return Err(Failure::Verdict(format!("verdict {}", cmp.verdict.name())));
            }
        }
        Command::Synth {
            count,
            size,
            noise,
            crack_width,
        } => {
            if noise.is_empty() {
                return Err(Error::Validation("need at least one noise level".into()).into());
            }
            for i in 0..count {
                let s = synth_defect_image(&SynthSpec {
                    width: size,
                    height: size,
                    noise_sigma: noise[i % noise.len()],
                    crack_width,
                    seed: env.config.seed.wrapping_add(i as u64),
                    vertical: i % 2 == 1,
                    ..SynthSpec::default()
                })?;
                let name = format!("synth_{i:03}.pgm");
                write(&env.out.join("images").join(&name), s.image.to_pgm())?;
                write(&env.out.join("truth").join(&name), s.truth.to_gray().to_pgm())?;
            }
            println!("wrote {count} images to {}", env.out.display());
        }
    }
    Ok(())
}

fn simulate(env: &Env, dir: &FsPath, dt: Option<f64>, duration: Option<f64>, no_adaptation: bool) -> CliResult {
    let mut files: Vec<(usize, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let n = p
                .file_name()?
                .to_str()?
                .strip_prefix("uav_")?
                .strip_suffix(".csv")?
                .parse()
                .ok()?;
            Some((n, p))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Validation(format!("no uav_<n>.csv files in {}", dir.display())).into());
    }
    let paths = files
        .iter()
        .map(|(_, p)| Ok(Path::from_csv(&read_text(p)?)?))
        .collect::<Result<Vec<_>, Failure>>()?;

    let c = &env.config.simulate;
    let disturbance = Disturbance::sinusoid(c.disturbance);
    let sim = SimOptions {
        dt: dt.unwrap_or(c.dt),
        duration: duration.unwrap_or(c.duration),
        adaptation: c.adaptation && !no_adaptation,
        boundary_layer: None,
        record_every: c.record_every,
    };
    let flight = FlightOptions {
        sim,
        speed: c.speed,
        settle_time: c.settle_time,
        shape_euler: env.config.formation.shape_euler,
        disturbance,
        ..FlightOptions::default()
    };
    let atsm = AtsmConfig::default();
    let params = QuadParams::default();
    let result = simulate_formation_flight(&paths, &atsm, &params, &flight)?;
    for (n, t) in result.traces.iter().enumerate() {
        write(&env.out.join(format!("trace_{}.csv", n + 1)), t.to_csv())?;
        println!("uav {}  rms_error_m {:.4}", n + 1, result.rms_error[n]);
    }
    write(&env.out.join("errors.csv"), result.errors_csv())?;

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
    write(&env.out.join("attitude.csv"), attitude.to_csv())?;
    for (step, axis) in profile.steps.iter().zip(["roll", "pitch", "yaw"]) {
        match settling_time(&attitude, step.axis, step.time, step.value, 0.5f64.to_radians()) {
            Some(t) => println!("settling_{axis}_s  {t:.3}"),
            None => println!("settling_{axis}_s  none"),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict(msg)) => {
            eprintln!("acceptance verdict failed: {msg}");
            ExitCode::from(EXIT_VERDICT)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_STAGE })
        }
    }
}
