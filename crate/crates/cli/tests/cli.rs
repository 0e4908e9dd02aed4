use std::process::{Command, Output};

use releq_cli::config::{Envelope, RunConfig};
use releq_cli::run::{IntegrateReport, ReFindReport};
use releq_core::{AxisScanReport, Classification, ProbeReport, Prop71Report, REOutcome, ScanReport};
use serde::de::DeserializeOwned;
use serde_json::Value;

const GAMMA: &str = r#"{"gamma": [1, 1, -2]}"#;

fn releq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_releq"))
        .args(args)
        .env_remove("RELEQ_THREADS")
        .output()
        .expect("binary runs")
}

fn parse<T: DeserializeOwned>(out: &Output) -> Envelope<T> {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Removes every `elapsed_seconds` field, the only nondeterministic output.
fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("elapsed_seconds");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[test]
fn collinear_re_find() {
    let out = releq(&[
        "re-find", "--system", "vortex", "--params", GAMMA, "--mu", "0,1",
        "--guess", "[[1.02, 0.01], [-0.98, 0.0], [0.01, -0.02]]",
    ]);
    assert_eq!(code(&out), 0);
    let env: Envelope<ReFindReport> = parse(&out);
    let sol = env.report.outcome.converged().expect("converged");
    assert_eq!(sol.classification, Classification::Collinear);
    assert!(sol.residual_norm <= 1e-10);
    assert_eq!(env.config.seed, 1);
}

#[test]
fn equilateral_re_find() {
    let out = releq(&[
        "re-find", "--system", "vortex", "--params", GAMMA, "--mu", "0.5,0",
        "--guess", r#"{"z": [[0, 0.3], [0.5, 0.3], [0.25, 0.73]]}"#, "--extremality",
    ]);
    assert_eq!(code(&out), 0);
    let env: Envelope<ReFindReport> = parse(&out);
    assert_eq!(env.report.outcome.converged().unwrap().classification, Classification::Equilateral);
    assert!(env.report.extremality.is_some());
}

#[test]
fn nonconvergence_exits_two() {
    let out = releq(&[
        "re-find", "--system", "vortex", "--params", GAMMA, "--mu", "0,1", "--max-iter", "1",
        "--guess", "[[1.5, 0.4], [-0.6, 0.2], [0.1, -0.5]]",
    ]);
    assert_eq!(code(&out), 2);
    let env: Envelope<ReFindReport> = parse(&out);
    assert!(matches!(env.report.outcome, REOutcome::Failed(_)));
}

#[test]
fn input_errors_exit_one() {
    let cases: [&[&str]; 7] = [
        &["re-find", "--system", "vortex", "--params", GAMMA, "--guess", "[[0,0],[1,0],[0,1]]"],
        &["re-find", "--system", "vortex", "--params", GAMMA, "--mu", "0,1", "--guess", "[[0,0],[0,0],[0,1]]"],
        &["re-find", "--system", "vortex", "--params", r#"{"gamma": [1]}"#, "--mu", "0,1", "--guess", "[[0,0]]"],
        &["re-find", "--system", "vortex", "--params", GAMMA, "--mu", "0,1", "--guess", "{not json"],
        &["prop71", "--separation", "-1"],
        &["scan", "--experiment", "axis", "--a-min", "3", "--a-max", "1"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = releq(args);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let cfg = r#"{"run": {"command": "prop71", "separation": 1.0, "n_offaxis": 5, "restarts": 1, "colour": 3},
                 "seed": 1, "output": null, "format": "json"}"#;
    std::fs::write(&path, cfg).unwrap();
    assert_eq!(code(&releq(&["replay", path.to_str().unwrap()])), 1);
    let cfg = r#"{"run": {"command": "prop71", "separation": 1.0, "n_offaxis": 5, "restarts": 1},
                 "seed": 1, "output": null, "format": "json", "extra": 0}"#;
    std::fs::write(&path, cfg).unwrap();
    assert_eq!(code(&releq(&["replay", path.to_str().unwrap()])), 1);
}

#[test]
fn prop71_defaults_pass() {
    let out = releq(&["prop71"]);
    assert_eq!(code(&out), 0);
    let env: Envelope<Prop71Report> = parse(&out);
    assert!((env.report.disc_radius - 0.9529).abs() <= 1e-3);
    assert!((env.report.disc_radius - (3f64.sqrt() / 2.0).cbrt()).abs() <= 1e-12);
    assert_eq!(env.report.n_offaxis, 100);
    assert_eq!(env.report.restarts, 10);
}

#[test]
fn prop71_scales_with_separation() {
    let out = releq(&["prop71", "--separation", "2", "--n-offaxis", "10", "--restarts", "2"]);
    assert_eq!(code(&out), 0);
    let env: Envelope<Prop71Report> = parse(&out);
    assert!((env.report.disc_radius - (3f64.sqrt() * 4.0).cbrt()).abs() <= 1e-10);
    assert!((env.report.energy_threshold - 8.0 / 6.0).abs() <= 1e-10);
}

#[test]
fn axis_scan_defaults_converge() {
    let out = releq(&["scan", "--experiment", "axis"]);
    assert_eq!(code(&out), 0);
    let env: Envelope<AxisScanReport> = parse(&out);
    assert_eq!(env.report.scan.outcomes.len(), 20);
    assert_eq!(env.report.scan.converged, 20);
}

#[test]
fn momentum_and_rigid_body_scans() {
    let out = releq(&[
        "scan", "--experiment", "momentum", "--system", "vortex", "--params", r#"{"gamma": [1, 1, 1]}"#,
        "--guess", "[[1, 0], [-0.5, 0.8660254037844386], [-0.5, -0.8660254037844386]]",
    ]);
    assert_eq!(code(&out), 0);
    let env: Envelope<ScanReport> = parse(&out);
    assert_eq!(env.report.converged, 27);

    let out = releq(&["scan", "--experiment", "arb", "--points", "3", "--skew", "2", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# releq-cli"));
    assert_eq!(text.lines().count(), 2 + 9 + 2);
}

#[test]
fn probe_misses_off_the_image() {
    let out = releq(&["probe", "--targets", "[[0.01, 0, 0]]"]);
    assert_eq!(code(&out), 0);
    let env: Envelope<ProbeReport> = parse(&out);
    let o = &env.report.outcomes[0];
    assert!(o.min_distance >= 0.0075);
    assert!(!o.hit);
    let out = releq(&["probe", "--targets", "[[0.01, 0, 0]]", "--saturate", "--samples", "2000"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn midpoint_integration_conserves_momentum() {
    let out = releq(&[
        "integrate", "--system", "vortex", "--params", GAMMA, "--state", "[[1, 0], [-1, 0], [0, 0]]",
        "--method", "midpoint", "--t", "10", "--dt", "0.01",
    ]);
    assert_eq!(code(&out), 0);
    let env: Envelope<IntegrateReport> = parse(&out);
    assert!(env.report.conservation.max_momentum_drift <= 1e-9);
    assert_eq!(env.report.trajectory.states.len(), 1001);
}

#[test]
fn trajectory_csv() {
    let out = releq(&[
        "integrate", "--system", "vortex", "--params", GAMMA, "--state", "[[1, 0], [-1, 0], [0, 0]]",
        "--t", "0.1", "--dt", "0.01", "--format", "csv",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next().unwrap(), "t,x0,y0,x1,y1,x2,y2");
    assert_eq!(lines.count(), 11);
}

#[test]
fn fixed_seed_is_deterministic() {
    let args = ["prop71", "--n-offaxis", "20", "--restarts", "3", "--seed", "42"];
    let mut a: Value = serde_json::from_slice(&releq(&args).stdout).unwrap();
    let mut b: Value = serde_json::from_slice(&releq(&args).stdout).unwrap();
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);
    assert_eq!(a["config"]["seed"], 42);
}

#[test]
fn reports_round_trip_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = releq(&["prop71", "--n-offaxis", "10", "--restarts", "2", "--output", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let env: Envelope<Prop71Report> = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&env).unwrap() + "\n", text);

    let mut cfg: RunConfig = env.config.clone();
    cfg.output = None;
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let replay = releq(&["replay", cfg_path.to_str().unwrap()]);
    assert_eq!(code(&replay), 0);
    let again: Envelope<Prop71Report> = parse(&replay);
    assert_eq!(again.report.offaxis, env.report.offaxis);
}

#[test]
fn thread_cap_is_validated() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_releq"))
            .args(["scan", "--experiment", "arb", "--points", "2", "--skew", "0"])
            .env("RELEQ_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("2")), 0);
    assert_eq!(code(&run("zero")), 1);
}
