use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uav-inspect"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.conf");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "[pipeline]\nseed = 3\n\n[plan]\nswarm_size = 12\nwaypoints = 4\niterations = 15\n\n[detect]\nsynthetic = 2\nsize = 64\n";

#[test]
fn assess_prints_standoff() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["assess", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("22.30"));
    assert!(dir.path().join("viewpoints.csv").exists());
}

#[test]
fn plan_formation_simulate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, SMALL);
    let plan_dir = d.join("plan");
    let o = run(&["--config", &cfg, "--out", plan_dir.to_str().unwrap(), "plan"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path_csv = plan_dir.join("path.csv");
    assert_eq!(std::fs::read_to_string(&path_csv).unwrap().lines().count(), 1 + 6);

    let form_dir = d.join("form");
    let o = run(&[
        "--out",
        form_dir.to_str().unwrap(),
        "formation",
        "--path",
        path_csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(form_dir.join("uav_3.csv").exists());

    let sim_dir = d.join("sim");
    let o = run(&[
        "--out",
        sim_dir.to_str().unwrap(),
        "simulate",
        "--paths",
        form_dir.to_str().unwrap(),
        "--duration",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = std::fs::read_to_string(sim_dir.join("trace_1.csv")).unwrap();
    assert!(header.starts_with("t,x,y,z,phi,theta,psi,p,q,r,u_phi,u_theta,u_psi,sigma_phi"));
    assert!(sim_dir.join("errors.csv").exists());
}

#[test]
fn synth_detect_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(&["--out", d.to_str().unwrap(), "synth", "--count", "3", "--size", "64"]);
    assert!(o.status.success());
    let pred = d.join("pred");
    std::fs::create_dir(&pred).unwrap();
    for i in 0..3 {
        let name = format!("synth_{i:03}.pgm");
        let o = run(&[
            "detect",
            "--in",
            d.join("images").join(&name).to_str().unwrap(),
            "--cs",
            "0.5",
            "--polarity",
            "dark",
            "--out",
            pred.join(&name).to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let report = d.join("table.txt");
    let o = run(&[
        "evaluate",
        "--pred",
        pred.to_str().unwrap(),
        "--truth",
        d.join("truth").to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let table = std::fs::read_to_string(report).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.lines().last().unwrap().starts_with("mean"));
}

#[test]
fn pipeline_is_cached_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, SMALL);
    let (a, b) = (d.join("a"), d.join("b"));
    for out in [&a, &b, &a] {
        let o = run(&["--config", &cfg, "--out", out.to_str().unwrap(), "pipeline"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest = std::fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert_eq!(manifest.matches("cache = hit").count(), 5);
    for f in [
        "report.txt",
        "plan/path.csv",
        "simulate/trace_2.csv",
        "detect/mask_synth_001.pgm",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn exit_codes() {
    let o = run(&["compare-planners", "--seeds", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["detect", "--in", "/definitely/missing.pgm"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["plan", "--planner", "ga"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));

    // without [camera] and [coverage] there is nothing to assess
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.txt");
    std::fs::write(
        &scenario,
        "[workspace]\nmin = 0,0,0\nmax = 10,10,10\n[mission]\nstart = 1,1,1\ntarget = 9,9,9\n",
    )
    .unwrap();
    let o = run(&["assess", "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verdict_failure_exits_4() {
    // a one-particle swarm cannot improve on its start, so theta-PSO cannot win
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "compare-planners",
        "--seeds",
        "5",
        "--swarm-size",
        "1",
        "--iterations",
        "1",
        "--waypoints",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert!(dir.path().join("comparison.csv").exists());
}
