//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Vector3;
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uav_inspect::control::{
    settling_time, simulate_attitude_tracking, step_dynamics, AtsmConfig, Disturbance, QuadParams, QuadState,
    ReferenceProfile, SimOptions,
};
use uav_inspect::detection::{
    between_class_variance, decode_pnm, detect, detect_otsu, f_measure, otsu_threshold, synth_defect_image, Histogram,
    Polarity, SynthSpec, VarianceForm, DEFAULT_CONTRAST_STOP,
};
use uav_inspect::formation::{formation_centroid, individual_trajectories, FormationSpec};
use uav_inspect::pipeline::{compare_planners, run_pipeline, PipelineConfig, PlannerSetup};
use uav_inspect::planner::{plan_path, CostWeights, PlannerKind, PsoConfig};
use uav_inspect::scenario::{path_length, Path, Scenario, BRIDGE_SCENARIO};

struct Outcome {
    pass: bool,
    /// Soft criteria may pass with a warning.
    warn: bool,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome {
        pass: ok,
        warn: false,
        detail,
    }
}

fn planner_ordering() -> Outcome {
    let scenario = Scenario::load(BRIDGE_SCENARIO).unwrap();
    let config = PsoConfig::default();
    let seeds: Vec<u64> = (0..20).collect();
    let side = |kind| PlannerSetup {
        kind,
        config: config.clone(),
    };
    let cmp = compare_planners(
        &scenario,
        &FormationSpec::triangle(),
        &CostWeights::default(),
        &seeds,
        &side(PlannerKind::ThetaPso),
        &side(PlannerKind::Pso),
    )
    .unwrap();
    let ok = cmp.median_left_cost <= cmp.median_right_cost && cmp.median_left_iterations < cmp.median_right_iterations;
    check(
        ok,
        format!(
            "20 seeds, N={} S={} iters={}: median cost theta {:.3} vs pso {:.3}, median iterations-to-1% theta {} vs pso {}",
            config.swarm_size,
            config.waypoints,
            config.iterations,
            cmp.median_left_cost,
            cmp.median_right_cost,
            cmp.median_left_iterations,
            cmp.median_right_iterations
        ),
    )
}

fn planner_optimality() -> Outcome {
    let bridge = Scenario::load(BRIDGE_SCENARIO).unwrap();
    let scenario = Scenario::empty(
        bridge.workspace_min,
        bridge.workspace_max,
        bridge.start,
        bridge.target,
        bridge.altitude_ref,
    )
    .unwrap();
    let straight = (scenario.target - scenario.start).norm();
    let mut worst: f64 = 0.0;
    let mut within = 0;
    for seed in 0..10 {
        let config = PsoConfig {
            seed,
            ..PsoConfig::default()
        };
        let planned = plan_path(&scenario, &FormationSpec::triangle(), &config, &CostWeights::default()).unwrap();
        let excess = path_length(&planned.path) / straight - 1.0;
        worst = worst.max(excess);
        if excess <= 0.01 {
            within += 1;
        }
    }
    check(
        within == 10,
        format!(
            "{within}/10 seeds within 1% of the {straight:.3} m straight line, worst excess {:.4}%",
            worst * 100.0
        ),
    )
}

fn formation_rigidity() -> Outcome {
    let spec = FormationSpec::triangle();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut centroid_err, mut spread): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = rng.random_range(2..30);
        let reference = Path::new(
            (0..n)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(0.0..101.0),
                        rng.random_range(0.0..141.0),
                        rng.random_range(0.0..40.0),
                    )
                })
                .collect(),
        );
        let paths = individual_trajectories(&reference, &spec);
        for k in 0..n {
            let at: Vec<_> = paths.iter().map(|p| p.waypoints[k]).collect();
            centroid_err = centroid_err.max((formation_centroid(&at).unwrap() - reference.waypoints[k]).amax());
        }
        for i in 0..paths.len() {
            for j in i + 1..paths.len() {
                let d0 = (spec.offsets[i] - spec.offsets[j]).norm();
                for k in 0..n {
                    let d = (paths[i].waypoints[k] - paths[j].waypoints[k]).norm();
                    spread = spread.max((d - d0).abs());
                }
            }
        }
    }
    check(
        centroid_err <= 1e-12 && spread <= 1e-12,
        format!("100 random paths: max centroid error {centroid_err:.2e} m, max pair-distance drift {spread:.2e} m"),
    )
}

fn atsm_settling() -> Outcome {
    let started = Instant::now();
    let profile = ReferenceProfile::inspection_steps();
    let trace = simulate_attitude_tracking(
        &profile,
        &Disturbance::bounded_sinusoid(),
        &AtsmConfig::default(),
        &QuadParams::default(),
        &SimOptions::default(),
    );
    let trace = match trace {
        Ok(t) => t,
        Err(e) => return check(false, format!("simulation failed: {e}")),
    };
    let elapsed = started.elapsed().as_secs_f64();
    let mut ok = elapsed < 10.0;
    let mut parts = Vec::new();
    for (step, axis) in profile.steps.iter().zip(["roll", "pitch", "yaw"]) {
        let t = settling_time(&trace, step.axis, step.time, step.value, 0.5f64.to_radians());
        ok &= t.is_some_and(|t| t <= 2.0);
        parts.push(format!("{axis} {}", t.map_or("never".into(), |t| format!("{t:.3} s"))));
    }
    check(
        ok,
        format!(
            "0.5 deg band under 0.1 N m sinusoid: {}; run {elapsed:.2} s",
            parts.join(", ")
        ),
    )
}

fn rk4_order() -> Outcome {
    let worst_ratio = std::cell::Cell::new(f64::INFINITY);
    let mut runner = TestRunner::new_with_rng(
        ProptestConfig {
            cases: 24,
            failure_persistence: None,
            ..ProptestConfig::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let magnitude = (0.3f64..1.0, any::<bool>()).prop_map(|(m, neg)| if neg { -m } else { m });
    let strategy = (
        [magnitude.clone(), magnitude.clone(), magnitude],
        [-0.003f64..0.003, -0.003f64..0.003, -0.003f64..0.003],
    );
    let result = runner.run(&strategy, |(rates, torque)| {
        let start = QuadState {
            euler_rates: Vector3::from(rates),
            ..QuadState::default()
        };
        let torque = Vector3::from(torque);
        let errors_full = |dt: f64, reference: &nalgebra::Vector6<f64>| -> f64 {
            let s = final_state(&start, &torque, dt);
            (s - reference).norm()
        };
        let dts = [0.01, 0.005, 0.0025];
        let reference = final_state(&start, &torque, dts[2] / 8.0);
        let e: Vec<f64> = dts.iter().map(|&dt| errors_full(dt, &reference)).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            worst_ratio.set(worst_ratio.get().min(ratio));
            prop_assert!(ratio >= 8.0, "ratio {ratio} (errors {e:?})");
        }
        Ok(())
    });
    check(
        result.is_ok(),
        match result {
            Ok(()) => format!(
                "24 random open-loop cases, dt 10/5/2.5 ms vs dt/8 reference: worst error ratio per halving {:.2}",
                worst_ratio.get()
            ),
            Err(e) => format!("{e}"),
        },
    )
}

/// Euler angles and rates after one second, as a 6-vector.
fn final_state(start: &QuadState, torque: &Vector3<f64>, dt: f64) -> nalgebra::Vector6<f64> {
    let params = QuadParams::new(0.01, 0.015, 0.02).unwrap();
    let steps = (1.0 / dt).round() as usize;
    let mut s = *start;
    for _ in 0..steps {
        s = step_dynamics(&s, torque, &Vector3::zeros(), &params, dt).unwrap();
    }
    nalgebra::Vector6::new(
        s.euler.x,
        s.euler.y,
        s.euler.z,
        s.euler_rates.x,
        s.euler_rates.y,
        s.euler_rates.z,
    )
}

fn exhaustive_otsu(hist: &Histogram) -> u8 {
    let slice = hist.full_slice();
    let mut best = (0.0, 1u8);
    for t in 1..=255u8 {
        let v = between_class_variance(hist, &slice, t, VarianceForm::ClassMeans).unwrap();
        if v > best.0 {
            best = (v, t);
        }
    }
    best.1
}

fn otsu_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let started = Instant::now();
    let mut mismatches = 0;
    let mut cases = 0;
    while cases < 1000 {
        let mut counts = [0u64; 256];
        match cases % 3 {
            // a few spikes with small counts, so plateaus and exact ties are common
            0 => {
                for _ in 0..rng.random_range(2..5) {
                    counts[rng.random_range(0..256)] += rng.random_range(1..4);
                }
            }
            1 => {
                for c in counts.iter_mut() {
                    *c = rng.random_range(0..1000);
                }
            }
            _ => {
                let n = rng.random_range(2..40);
                for _ in 0..n {
                    counts[rng.random_range(0..256)] += rng.random_range(1..100_000);
                }
            }
        }
        let hist = Histogram::from_counts(counts);
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            continue;
        }
        cases += 1;
        if otsu_threshold(&hist, &hist.full_slice()).unwrap() != exhaustive_otsu(&hist) {
            mismatches += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    check(
        mismatches == 0 && elapsed < 1.0,
        format!("{cases} random histograms, {mismatches} mismatches against exhaustive argmax, {elapsed:.3} s"),
    )
}

fn crack_corpus() -> Outcome {
    let sigmas = [0.0, 10.0, 20.0];
    let (mut at_least, mut low_noise) = (0, Vec::new());
    for i in 0..50u64 {
        let sigma = sigmas[i as usize % 3];
        let s = synth_defect_image(&SynthSpec {
            noise_sigma: sigma,
            crack_width: 2 + i as usize % 5,
            seed: 1000 + i,
            vertical: i % 2 == 1,
            ..SynthSpec::default()
        })
        .unwrap();
        let (_, it_mask) = detect(&s.image, DEFAULT_CONTRAST_STOP, Polarity::Dark).unwrap();
        let (_, otsu_mask) = detect_otsu(&s.image, Polarity::Dark).unwrap();
        let f_it = f_measure(&it_mask, &s.truth).unwrap().f_measure;
        let f_otsu = f_measure(&otsu_mask, &s.truth).unwrap().f_measure;
        if f_it >= f_otsu {
            at_least += 1;
        }
        if sigma <= 10.0 {
            low_noise.push(f_it);
        }
    }
    let mean = low_noise.iter().sum::<f64>() / low_noise.len() as f64;
    check(
        at_least >= 45 && mean >= 0.90,
        format!("IT F >= Otsu F on {at_least}/50 images; mean IT F at sigma <= 10: {mean:.4}"),
    )
}

fn throughput() -> Outcome {
    let s = synth_defect_image(&SynthSpec {
        width: 1000,
        height: 1000,
        noise_sigma: 10.0,
        crack_width: 6,
        seed: 8,
        ..SynthSpec::default()
    })
    .unwrap();
    let bytes = s.image.to_pgm();
    let mut times = Vec::new();
    for _ in 0..20 {
        let started = Instant::now();
        let image = decode_pnm(&bytes).unwrap().into_gray().unwrap();
        let (_, mask) = detect(&image, DEFAULT_CONTRAST_STOP, Polarity::Dark).unwrap();
        std::hint::black_box(mask.to_gray().to_pgm());
        times.push(started.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    let median = 0.5 * (times[9] + times[10]);
    Outcome {
        pass: median <= 200.0,
        warn: median > 50.0,
        detail: format!(
            "1 megapixel decode + detect + encode, median of 20: {median:.2} ms (budget 50 ms, hard limit 200 ms)"
        ),
    }
}

fn pipeline_determinism() -> Outcome {
    let config_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/inspection.conf");
    let cfg = PipelineConfig::load_file(&config_path).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_pipeline(&cfg, a.path()).unwrap();
    run_pipeline(&cfg, b.path()).unwrap();
    let mut compared = 0;
    let mut differing = Vec::new();
    for stage in &ra.manifest.stages {
        for f in &stage.outputs {
            let name = f.path.to_string_lossy();
            let relevant = ["path.csv", "trace_", "attitude.csv", "errors.csv", "mask_"]
                .iter()
                .any(|p| name.contains(p));
            if relevant {
                compared += 1;
                if std::fs::read(a.path().join(&f.path)).unwrap() != std::fs::read(b.path().join(&f.path)).unwrap() {
                    differing.push(name.into_owned());
                }
            }
        }
    }
    compared += 1;
    if std::fs::read(a.path().join("report.txt")).unwrap() != std::fs::read(b.path().join("report.txt")).unwrap() {
        differing.push("report.txt".into());
    }
    check(
        differing.is_empty() && compared > 5,
        format!(
            "{compared} path/trace/mask/report files compared across two fresh runs, {} differ {differing:?}",
            differing.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("planner ordering", planner_ordering),
        ("planner optimality", planner_optimality),
        ("formation rigidity", formation_rigidity),
        ("attitude settling", atsm_settling),
        ("integrator order", rk4_order),
        ("otsu equivalence", otsu_equivalence),
        ("crack corpus", crack_corpus),
        ("throughput", throughput),
        ("pipeline determinism", pipeline_determinism),
    ];
    // `cargo test -- <filter>` passes the filter through; honour plain substrings
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let o = run();
        let verdict = match (o.pass, o.warn) {
            (true, false) => "PASS",
            (true, true) => "PASS (warn)",
            (false, _) => "FAIL",
        };
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {name:<21} {verdict:<11} {} [{:.1} s]",
            i + 1,
            o.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
