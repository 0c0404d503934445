use hho::adaptivity::{RefinementMode, StopReason};
use hho::benchmarks::BenchmarkName;
use hho::hho::Variant;
use hho_cli::config::{ConfigError, Epsilon, RunConfig};
use hho_cli::output::CONVERGENCE_COLUMNS;
use hho_cli::runner::execute;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::process::Command;

fn minimal() -> RunConfig {
    RunConfig::from_toml("benchmark = \"manufactured-affine\"\nk = 0\n").unwrap()
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let b = hho::benchmarks::Benchmark::<f64>::new(cfg.benchmark);
    cfg.driver_settings(&b).map(|_| ())
}

// [TRIVIAL]
#[test]
fn minimal_config_gets_defaults() {
    let cfg = minimal();
    assert_eq!(cfg.theta, 0.5);
    assert_eq!(cfg.epsilon().unwrap(), 0.01);
    assert_eq!(cfg.variant, Variant::RaviartThomas);
    assert_eq!(cfg.mode, RefinementMode::Adaptive);
    assert!(!cfg.timing);
    validate(&cfg).unwrap();
}

// [TRIVIAL]
#[test]
fn auto_epsilon_scales_with_degree() {
    let cfg =
        RunConfig::from_toml("benchmark = \"p-laplace-lshape\"\nk = 2\neps = \"auto\"\n").unwrap();
    assert!((cfg.epsilon().unwrap() - 0.03).abs() < 1e-15);
    let bad =
        RunConfig::from_toml("benchmark = \"p-laplace-lshape\"\nk = 2\neps = \"large\"\n").unwrap();
    assert!(matches!(bad.epsilon(), Err(ConfigError::EpsilonKeyword(_))));
    assert!("auto".parse::<Epsilon>().is_ok());
    assert!("0.5".parse::<Epsilon>().is_ok());
    assert!("x".parse::<Epsilon>().is_err());
}

// [PAPER]
#[test]
fn epsilon_above_bound_is_rejected() {
    let mut cfg = minimal();
    cfg.eps = Epsilon::Value(5.0);
    let err = validate(&cfg).unwrap_err();
    assert!(err.to_string().contains("0 < eps <= k+1"), "{err}");
    cfg.variant = Variant::Stabilized;
    cfg.eps = Epsilon::Value(-0.1);
    assert!(validate(&cfg).is_err());
}

// [TRIVIAL]
#[test]
fn every_invalid_field_has_a_named_error() {
    let cases: Vec<(&str, Box<dyn Fn(&mut RunConfig)>)> = vec![
        ("theta", Box::new(|c| c.theta = 1.0)),
        ("k = 9", Box::new(|c| c.k = 9)),
        ("max_ndof", Box::new(|c| c.max_ndof = 0)),
        ("max_levels", Box::new(|c| c.max_levels = Some(0))),
        ("tolerance", Box::new(|c| c.solver.tolerance = f64::NAN)),
        ("max_iterations", Box::new(|c| c.solver.max_iterations = 0)),
        ("memory", Box::new(|c| c.solver.memory = 0)),
        ("armijo", Box::new(|c| c.solver.armijo = 1.5)),
        ("zero_estimator", Box::new(|c| c.zero_estimator = -1.0)),
    ];
    for (name, edit) in cases {
        let mut cfg = minimal();
        edit(&mut cfg);
        let err = validate(&cfg).unwrap_err();
        assert!(err.to_string().contains(name), "{name}: {err}");
    }
    let unknown = RunConfig::from_toml("benchmark = \"nope\"\nk = 0\n").unwrap_err();
    assert!(matches!(unknown, ConfigError::Parse(_)));
    let extra =
        RunConfig::from_toml("benchmark = \"odp-lshape\"\nk = 0\ncolour = 1\n").unwrap_err();
    assert!(extra.to_string().contains("colour"), "{extra}");
}

// [TRIVIAL]
#[test]
fn config_round_trips_through_toml() {
    let mut cfg = minimal();
    cfg.benchmark = BenchmarkName::FhmRect;
    cfg.max_levels = Some(3);
    cfg.eps = Epsilon::Keyword("auto".into());
    cfg.solver.memory = 7;
    let text = cfg.to_toml();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    let plain = minimal();
    assert_eq!(RunConfig::from_toml(&plain.to_toml()).unwrap(), plain);
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

// [TRIVIAL]
#[test]
fn affine_run_writes_exact_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = minimal();
    cfg.out = dir.path().join("a");
    let outcome = execute(&cfg).unwrap();
    assert_eq!(outcome.stop, StopReason::ZeroEstimator);
    assert_eq!(outcome.reports.len(), 1);
    let r = &outcome.reports[0];
    assert!(r.err_energy <= 1e-10 && r.estimator <= 1e-10);
    assert!(r.err_grad.unwrap() <= 1e-10 && r.err_stress.unwrap() <= 1e-10);

    let csv = std::fs::read_to_string(cfg.out.join("convergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CONVERGENCE_COLUMNS.join(","));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 13);
    assert_eq!(row[0], "0");
    assert_eq!(row[5], "", "stab is empty for the Raviart-Thomas variant");
    assert_eq!(row[12], "", "seconds is empty unless timing is on");
    assert!(lines.next().is_none());

    let mesh = std::fs::read_to_string(cfg.out.join("level_000.mesh")).unwrap();
    assert!(mesh.starts_with("vertices 9 / triangles 8 / sides 16\n"));
    let echo: serde_json::Value =
        serde_json::from_slice(&std::fs::read(cfg.out.join("run.json")).unwrap()).unwrap();
    assert_eq!(echo["config"]["benchmark"], "manufactured-affine");
    assert_eq!(echo["epsilon"], 0.01);

    // a rerun is byte-identical
    let mut again = cfg.clone();
    again.out = dir.path().join("b");
    execute(&again).unwrap();
    for f in [
        "convergence.csv",
        "bounds.csv",
        "level_000.mesh",
        "summary.json",
    ] {
        assert_eq!(digest(&cfg.out.join(f)), digest(&again.out.join(f)), "{f}");
    }
}

// [PAPER]
#[test]
fn uniform_p_laplace_energies_approach_reference() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::from_toml(
        "benchmark = \"p-laplace-lshape\"\nk = 0\nmode = \"uniform\"\nmax_levels = 5\n",
    )
    .unwrap();
    cfg.out = dir.path().to_path_buf();
    let outcome = execute(&cfg).unwrap();
    assert_eq!(outcome.stop, StopReason::MaxLevels);
    let e: Vec<f64> = outcome.reports.iter().map(|r| r.energy).collect();
    assert_eq!(e.len(), 5);
    // the discrete energies increase towards the exact energy from below
    let reference = -1.4423089582447;
    for w in e.windows(2) {
        assert!(w[0] < w[1] && w[1] < reference, "{e:?}");
    }
    for l in 0..5 {
        assert!(dir.path().join(format!("level_{l:03}.mesh")).exists());
    }
}

// [TRIVIAL]
#[test]
fn binary_applies_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "benchmark = \"p-laplace-lshape\"\nk = 1\n").unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_hho"))
        .args(["run", "--config"])
        .arg(&config)
        .args([
            "--benchmark",
            "manufactured-affine",
            "--degree",
            "2",
            "--mode",
            "uniform",
        ])
        .args([
            "--theta",
            "0.3",
            "--eps",
            "auto",
            "--max-ndof",
            "500",
            "--variant",
            "stabilized",
            "--out",
        ])
        .arg(&out)
        .env("HHO_THREADS", "2")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let echo: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("run.json")).unwrap()).unwrap();
    let c = &echo["config"];
    assert_eq!(c["benchmark"], "manufactured-affine");
    assert_eq!(
        (c["k"].as_u64(), c["mode"].as_str()),
        (Some(2), Some("uniform"))
    );
    assert_eq!(
        (c["theta"].as_f64(), c["eps"].as_str()),
        (Some(0.3), Some("auto"))
    );
    assert_eq!(
        (c["max_ndof"].as_u64(), c["variant"].as_str()),
        (Some(500), Some("stabilized"))
    );
    assert_eq!(echo["estimator"], "stabilized");
    assert!((echo["epsilon"].as_f64().unwrap() - 0.03).abs() < 1e-15);

    let bad = Command::new(env!("CARGO_BIN_EXE_hho"))
        .args(["run", "--config"])
        .arg(&config)
        .args(["--eps", "5", "--degree", "0", "--out"])
        .arg(dir.path().join("bad"))
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("0 < eps <= k+1"));
}
