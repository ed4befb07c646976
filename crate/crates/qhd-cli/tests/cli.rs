//! End-to-end runs through the library pipelines and the built binary:
//! artifact layout, exit codes, manifest re-runnability and thread-count
//! independence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use qhd_cli::run::{ensemble, extract, run};
use qhd_cli::{parse_config, Regime};

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qhd_cli_test_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const DIRAC_CONFIG: &str = "\
regime = dirac
seed = 1
grid.n_points = 128
grid.dx = 0.5
grid.dt = 0.05
initial.sigma = 3.0
initial.k0 = 0.4
evolve.n_steps = 100
evolve.record_every = 10
";

#[test]
fn dirac_run_produces_artifacts_and_passes_gates() {
    let dir = tempdir("dirac");
    let cfg = parse_config(DIRAC_CONFIG).unwrap();
    assert_eq!(cfg.regime, Regime::Dirac);
    let outcome = run(&cfg, &dir).unwrap();
    assert_eq!(outcome.exit_code, 0);
    for name in ["manifest.txt", "trajectory.qhd1", "observables.csv", "hydro.csv", "diagnostics.txt"] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
    let diag = fs::read_to_string(dir.join("diagnostics.txt")).unwrap();
    assert!(diag.contains("unitarity = PASS"), "{diag}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn manifest_is_sufficient_to_rerun_exactly() {
    let dir_a = tempdir("rerun_a");
    let dir_b = tempdir("rerun_b");
    let cfg = parse_config(DIRAC_CONFIG).unwrap();
    run(&cfg, &dir_a).unwrap();
    // re-parse the manifest (comments ignored) and rerun
    let manifest = fs::read_to_string(dir_a.join("manifest.txt")).unwrap();
    let cfg2 = parse_config(&manifest).unwrap();
    run(&cfg2, &dir_b).unwrap();
    let a = fs::read(dir_a.join("trajectory.qhd1")).unwrap();
    let b = fs::read(dir_b.join("trajectory.qhd1")).unwrap();
    assert_eq!(a, b, "rerun from manifest must be bit-identical");
    let _ = fs::remove_dir_all(&dir_a);
    let _ = fs::remove_dir_all(&dir_b);
}

#[test]
fn extract_dumps_named_fields() {
    let dir = tempdir("extract");
    let cfg = parse_config(DIRAC_CONFIG).unwrap();
    run(&cfg, &dir).unwrap();
    let traj = dir.join("trajectory.qhd1");
    for field in ["rho", "qdot", "p13", "logratio1", "vqu1", "bsum"] {
        let out = dir.join(format!("extract_{field}"));
        let outcome = extract(&traj, field, &out).unwrap();
        assert_eq!(outcome.exit_code, 0);
        assert!(out.join(format!("{field}.qhd1")).exists());
    }
    // unknown field is a config-level error
    assert!(extract(&traj, "warp_factor", &dir.join("x")).is_err());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn stochastic_zero_temperature_matches_dirac_bitwise() {
    let dir_a = tempdir("stoch_a");
    let dir_b = tempdir("stoch_b");
    let dirac = parse_config(DIRAC_CONFIG).unwrap();
    run(&dirac, &dir_a).unwrap();
    let stoch_text = DIRAC_CONFIG.replace("regime = dirac", "regime = stochastic\nnoise.temperature = 0.0");
    let stoch = parse_config(&stoch_text).unwrap();
    run(&stoch, &dir_b).unwrap();
    let a = fs::read(dir_a.join("trajectory.qhd1")).unwrap();
    let b = fs::read(dir_b.join("trajectory.qhd1")).unwrap();
    assert_eq!(a, b, "T = 0 stochastic run must be bitwise the dirac run");
    let _ = fs::remove_dir_all(&dir_a);
    let _ = fs::remove_dir_all(&dir_b);
}

#[test]
fn ensemble_statistics_are_thread_count_independent() {
    let text = "\
regime = stochastic
seed = 11
grid.n_points = 64
grid.dx = 0.5
grid.dt = 0.05
initial.sigma = 3.0
noise.temperature = 1e-6
noise.lambda_c = 2.0
evolve.n_steps = 20
evolve.record_every = 10
";
    let cfg = parse_config(text).unwrap();
    let dir_a = tempdir("ens_a");
    let dir_b = tempdir("ens_b");
    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool1.install(|| ensemble(&cfg, 8, &dir_a)).unwrap();
    let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    pool4.install(|| ensemble(&cfg, 8, &dir_b)).unwrap();
    let a = fs::read(dir_a.join("stats.csv")).unwrap();
    let b = fs::read(dir_b.join("stats.csv")).unwrap();
    assert_eq!(a, b, "ensemble statistics must not depend on thread count");
    let _ = fs::remove_dir_all(&dir_a);
    let _ = fs::remove_dir_all(&dir_b);
}

#[test]
fn compare_regime_emits_scaling_report() {
    let text = "\
regime = compare
grid.n_points = 512
grid.dx = 0.5
grid.dt = 0.01
compare.v1 = 0.01
compare.v2 = 0.02
compare.sigma = 16.0
compare.t_final = 0.5
";
    let cfg = parse_config(text).unwrap();
    let dir = tempdir("compare");
    let outcome = run(&cfg, &dir).unwrap();
    assert_eq!(outcome.exit_code, 0);
    let report = fs::read_to_string(dir.join("compare_report.txt")).unwrap();
    assert!(report.contains("velocity_distance_ratio"), "{report}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn boost_check_without_trajectory_is_a_clear_error() {
    let text = "regime = boost_check\nboost.beta = 0.2\n";
    let cfg = parse_config(text).unwrap();
    let dir = tempdir("boostless");
    let err = run(&cfg, &dir).unwrap_err();
    assert!(
        err.to_string().contains("boost.trajectory"),
        "unexpected error: {err}"
    );
    let _ = fs::remove_dir_all(&dir);
}

fn qhd_binary() -> &'static str {
    env!("CARGO_BIN_EXE_qhd")
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    let dir = tempdir("bin");
    // no args -> usage, code 2
    let out = Command::new(qhd_binary()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    // bad config -> 2, with every violation listed
    let bad = dir.join("bad.cfg");
    fs::write(&bad, "regime = warp\ngrid.dx = -1\n").unwrap();
    let out = Command::new(qhd_binary())
        .args(["run", bad.to_str().unwrap(), "-o", dir.join("o1").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("grid.dx"), "{stderr}");
    // missing file -> 3
    let out = Command::new(qhd_binary())
        .args(["run", dir.join("nope.cfg").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    // good run -> 0
    let good = dir.join("good.cfg");
    fs::write(&good, DIRAC_CONFIG).unwrap();
    let out_dir = dir.join("run_out");
    let out = Command::new(qhd_binary())
        .args(["run", good.to_str().unwrap(), "-o", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    // boost-check over the stored trajectory
    let bc_dir = dir.join("bc_out");
    let out = Command::new(qhd_binary())
        .args([
            "boost-check",
            out_dir.join("trajectory.qhd1").to_str().unwrap(),
            "--beta",
            "0.01",
            "-o",
            bc_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(bc_dir.join("boost_report.txt").exists());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn identical_runs_are_bit_identical_across_thread_caps() {
    let dir = tempdir("det");
    let cfg_path = dir.join("st.cfg");
    fs::write(
        &cfg_path,
        "\
regime = stochastic
seed = 5
grid.n_points = 64
grid.dx = 0.5
grid.dt = 0.05
initial.sigma = 3.0
noise.temperature = 1e-6
noise.lambda_c = 2.0
evolve.n_steps = 30
evolve.record_every = 10
",
    )
    .unwrap();
    let run_with = |threads: &str, out: &Path| {
        let st = Command::new(qhd_binary())
            .env("QHD_THREADS", threads)
            .args(["run", cfg_path.to_str().unwrap(), "-o", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    };
    let (o1, o4) = (dir.join("t1"), dir.join("t4"));
    run_with("1", &o1);
    run_with("4", &o4);
    for name in ["trajectory.qhd1", "noise_log.csv"] {
        let a = fs::read(o1.join(name)).unwrap();
        let b = fs::read(o4.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across thread caps");
    }
    let _ = fs::remove_dir_all(&dir);
}
