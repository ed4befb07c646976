//! Regime pipelines: build the problem from a config, evolve, extract,
//! diagnose, and write artifacts (manifest, QHD1 dumps, CSV series,
//! key-value reports).

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};

use qhd_core::algebra::C64;
use qhd_core::boost::{current_covariance_check, vqu_invariance_check, BoostSpec};
use qhd_core::em::EMFieldSet;
use qhd_core::evolve::{evolve, EvolveConfig, Trajectory};
use qhd_core::field::{
    free_eigenspinor, positive_branch_packet, rest_superposition_packet,
    EnergyBranch, SpinorField,
};
use qhd_core::gamma::{build_gammas, GammaSet, Representation};
use qhd_core::grid::GridSpec;
use qhd_core::hydro::{continuity_residual, force_balance, quantum_potential, HydroFrame};
use qhd_core::noise::{ensemble_run, evolve_stochastic, NoiseSpec};
use qhd_core::nonlinear::spreading_comparison;
use qhd_core::pauli::{dirac_vs_pauli, evolve_pauli, pauli_packet};
use qhd_core::report::{write_csv, KeyValueReport};
use qhd_core::spectral::Spectral;
use qhd_core::{qhd1, QhdError};

use crate::config::{EmKind, InitialKind, Regime, RunConfig};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Unitarity gate for <= 1e4-step runs.
pub const NORM_DRIFT_GATE: f64 = 1e-10;

#[derive(Debug)]
pub struct RunOutcome {
    /// 0 ok, 1 invariant failure.
    pub exit_code: i32,
    pub summary: Vec<String>,
}

pub fn cap_threads_from_env() {
    if let Ok(raw) = std::env::var("QHD_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

pub fn build_grid(cfg: &RunConfig) -> anyhow::Result<GridSpec> {
    Ok(GridSpec::new(cfg.n_points, cfg.dx, cfg.dt)?)
}

pub fn build_em(cfg: &RunConfig, grid: GridSpec) -> EMFieldSet {
    let mut em = match cfg.em_kind {
        EmKind::Free => EMFieldSet::free(grid, cfg.mass),
        EmKind::UniformE => EMFieldSet::uniform_electric(grid, cfg.mass, cfg.charge, cfg.e0),
        EmKind::Harmonic => EMFieldSet::harmonic(grid, cfg.mass, cfg.charge, cfg.omega),
    };
    em.e = cfg.charge;
    em = em.with_uniform_b(cfg.b_ext);
    if cfg.a0 != 0.0 {
        em = em.with_uniform_a(cfg.a0);
    }
    em
}

fn spin_from_angles(theta: f64, phi: f64) -> [C64; 2] {
    [
        C64::new((theta / 2.0).cos(), 0.0),
        C64::new(0.0, phi).exp() * (theta / 2.0).sin(),
    ]
}

pub fn build_initial(
    cfg: &RunConfig,
    grid: GridSpec,
    gammas: &GammaSet,
    sp: &Spectral,
) -> anyhow::Result<SpinorField> {
    let center = cfg.center.unwrap_or(grid.length() / 2.0);
    let spin = spin_from_angles(cfg.spin_theta, cfg.spin_phi);
    let psi = match cfg.initial_kind {
        InitialKind::Gaussian => {
            positive_branch_packet(grid, cfg.mass, center, cfg.sigma, cfg.k0, spin, gammas, sp)?
        }
        InitialKind::RestSuperposition => rest_superposition_packet(grid, center, cfg.sigma, spin),
        InitialKind::PlaneWave => {
            // snap the carrier to the lattice ladder so the sampled wave is
            // periodic; the resolved value lands in the manifest
            let dk = 2.0 * std::f64::consts::PI / grid.length();
            let k = (cfg.k0 / dk).round() * dk;
            let u = free_eigenspinor(k, cfg.mass, EnergyBranch::Positive, spin);
            let mut psi = SpinorField::zeros(grid);
            for j in 0..grid.n_points {
                let phase = C64::new(0.0, k * grid.z(j)).exp();
                psi.set_value(j, [u[0] * phase, u[1] * phase, u[2] * phase, u[3] * phase]);
            }
            psi.normalize();
            psi
        }
    };
    Ok(psi)
}

pub fn write_manifest(cfg: &RunConfig, grid: &GridSpec, outdir: &Path) -> anyhow::Result<()> {
    let mut text = String::new();
    text.push_str("# qhd run manifest: parseable config echo\n");
    text.push_str(&format!("# artifact_version = {ARTIFACT_VERSION}\n"));
    text.push_str(&format!("# cfl_ratio = {:.17e}\n", grid.cfl_ratio()));
    if cfg.regime == Regime::Stochastic {
        let spec = NoiseSpec::new(cfg.temperature, cfg.lambda_c.max(f64::MIN_POSITIVE), cfg.kappa, cfg.seed);
        if let Ok(spec) = spec {
            if spec.under_resolved(grid) {
                text.push_str("# warning: noise kernel under-resolved (lambda_c < 2 dx)\n");
            }
        }
    }
    text.push_str(&cfg.echo());
    fs::write(outdir.join("manifest.txt"), text)?;
    Ok(())
}

fn write_observables(traj: &Trajectory, outdir: &Path) -> anyhow::Result<()> {
    let rows: Vec<Vec<f64>> = traj
        .series
        .iter()
        .map(|r| {
            vec![
                r.t,
                r.norm,
                r.mean_z,
                r.mean_energy.unwrap_or(f64::NAN),
            ]
        })
        .collect();
    write_csv(&outdir.join("observables.csv"), &["t", "norm", "mean_z", "mean_energy"], &rows)?;
    Ok(())
}

fn write_hydro_series(
    traj: &Trajectory,
    em: &EMFieldSet,
    gammas: &GammaSet,
    sp: &Spectral,
    outdir: &Path,
) -> anyhow::Result<()> {
    if traj.frames.len() < 3 {
        return Ok(());
    }
    let frames: Vec<HydroFrame> = traj
        .frames
        .iter()
        .map(|f| HydroFrame::from_spinor(f, gammas, sp))
        .collect::<Result<_, _>>()?;
    let fb = force_balance(&frames, em)?;
    let mut rows = Vec::new();
    for i in 1..frames.len() - 1 {
        let res = continuity_residual(&frames[i - 1], &frames[i], &frames[i + 1]);
        let l2 = qhd_core::analysis::l2_norm(&res, frames[i].grid.dx);
        let fb_row = &fb.per_frame[i - 1];
        rows.push(vec![
            frames[i].time_stamp,
            frames[i].charge(),
            l2,
            fb_row.l2_residual[0],
            fb_row.l2_residual[1],
        ]);
    }
    write_csv(
        &outdir.join("hydro.csv"),
        &["t", "charge", "continuity_l2", "force_l2_pair13", "force_l2_pair24"],
        &rows,
    )?;
    Ok(())
}

fn norm_drift(traj: &Trajectory) -> f64 {
    let n0 = traj.series[0].norm;
    traj.series
        .iter()
        .map(|r| (r.norm - n0).abs() / n0)
        .fold(0.0_f64, f64::max)
}

pub fn run(cfg: &RunConfig, outdir: &Path) -> anyhow::Result<RunOutcome> {
    fs::create_dir_all(outdir)
        .with_context(|| format!("creating output directory {}", outdir.display()))?;
    let grid = build_grid(cfg)?;
    write_manifest(cfg, &grid, outdir)?;
    match cfg.regime {
        Regime::Dirac => run_dirac(cfg, grid, outdir),
        Regime::Pauli => run_pauli(cfg, grid, outdir),
        Regime::Stochastic => run_stochastic(cfg, grid, outdir),
        Regime::Nonlinear => run_nonlinear(cfg, grid, outdir),
        Regime::BoostCheck => run_boost_check(cfg, outdir),
        Regime::Compare => run_compare(cfg, grid, outdir),
    }
}

fn run_dirac(cfg: &RunConfig, grid: GridSpec, outdir: &Path) -> anyhow::Result<RunOutcome> {
    let gammas = build_gammas(Representation::ChiralAsPaper);
    let sp = Spectral::new(&grid);
    let em = build_em(cfg, grid);
    let psi0 = build_initial(cfg, grid, &gammas, &sp)?;
    let mut config = EvolveConfig::new(cfg.dt, cfg.n_steps, cfg.record_every);
    if cfg.adjoint_check {
        config = config.with_adjoint_check();
    }
    let traj = evolve(&psi0, &em, &gammas, &config)?;
    qhd1::write_trajectory(&outdir.join("trajectory.qhd1"), &traj.frames)?;
    write_observables(&traj, outdir)?;
    write_hydro_series(&traj, &em, &gammas, &sp, outdir)?;
    let drift = norm_drift(&traj);
    let unitary_ok = drift < NORM_DRIFT_GATE;
    let mut report = KeyValueReport::new();
    report.push("regime", "dirac");
    report.push_f64("cfl_ratio", grid.cfl_ratio());
    report.push_f64("norm_drift", drift);
    report.push("unitarity", if unitary_ok { "PASS" } else { "FAIL" });
    report.push("nan", "PASS");
    if let Some(dev) = traj.adjoint_deviation {
        report.push_f64("adjoint_deviation", dev);
    }
    report.write(&outdir.join("diagnostics.txt"))?;
    Ok(RunOutcome {
        exit_code: i32::from(!unitary_ok),
        summary: vec![
            format!("norm drift {drift:.3e} ({})", if unitary_ok { "PASS" } else { "FAIL" }),
            format!("frames recorded: {}", traj.frames.len()),
        ],
    })
}

fn run_pauli(cfg: &RunConfig, grid: GridSpec, outdir: &Path) -> anyhow::Result<RunOutcome> {
    let em = build_em(cfg, grid);
    let spin = spin_from_angles(cfg.spin_theta, cfg.spin_phi);
    let center = cfg.center.unwrap_or(grid.length() / 2.0);
    let state0 = pauli_packet(grid, center, cfg.sigma, cfg.k0, spin);
    let config = EvolveConfig::new(cfg.dt, cfg.n_steps, cfg.record_every);
    let traj = evolve_pauli(&state0, &em, &config)?;
    // 2-component QHD1 records
    {
        let mut w = BufWriter::new(fs::File::create(outdir.join("trajectory.qhd1"))?);
        for f in &traj.frames {
            let comps: Vec<&[C64]> = f.xi.iter().map(|c| c.as_slice()).collect();
            qhd1::write_record(&mut w, f.grid.dx, f.time_stamp, &comps)?;
        }
    }
    let rows: Vec<Vec<f64>> = traj
        .series
        .iter()
        .map(|r| vec![r.t, r.norm, r.mean_z, r.width, r.spin[0], r.spin[1], r.spin[2]])
        .collect();
    write_csv(
        &outdir.join("observables.csv"),
        &["t", "norm", "mean_z", "width", "spin_x", "spin_y", "spin_z"],
        &rows,
    )?;
    let n0 = traj.series[0].norm;
    let drift = traj
        .series
        .iter()
        .map(|r| (r.norm - n0).abs() / n0)
        .fold(0.0_f64, f64::max);
    let unitary_ok = drift < NORM_DRIFT_GATE;
    let mut report = KeyValueReport::new();
    report.push("regime", "pauli");
    report.push_f64("norm_drift", drift);
    report.push("unitarity", if unitary_ok { "PASS" } else { "FAIL" });
    report.write(&outdir.join("diagnostics.txt"))?;
    Ok(RunOutcome {
        exit_code: i32::from(!unitary_ok),
        summary: vec![format!("norm drift {drift:.3e}")],
    })
}

fn run_stochastic(cfg: &RunConfig, grid: GridSpec, outdir: &Path) -> anyhow::Result<RunOutcome> {
    let gammas = build_gammas(Representation::ChiralAsPaper);
    let sp = Spectral::new(&grid);
    let em = build_em(cfg, grid);
    let psi0 = build_initial(cfg, grid, &gammas, &sp)?;
    let lambda = if cfg.lambda_c.is_finite() {
        cfg.lambda_c
    } else {
        grid.length()
    };
    let spec = NoiseSpec::new(cfg.temperature, lambda, cfg.kappa, cfg.seed)?;
    let config = EvolveConfig::new(cfg.dt, cfg.n_steps, cfg.record_every);
    let traj = evolve_stochastic(&psi0, &em, &gammas, &spec, &config)?;
    qhd1::write_trajectory(&outdir.join("trajectory.qhd1"), &traj.frames)?;
    let rows: Vec<Vec<f64>> = traj
        .step_log
        .iter()
        .map(|&(t, prenorm, corr)| vec![t, prenorm, corr])
        .collect();
    write_csv(
        &outdir.join("noise_log.csv"),
        &["t", "prenorm", "correction"],
        &rows,
    )?;
    let mut report = KeyValueReport::new();
    report.push("regime", "stochastic");
    report.push("seed", cfg.seed);
    report.push_f64("temperature", cfg.temperature);
    report.push_f64("lambda_c", spec.lambda_c);
    report.push("clamped_points", traj.clamped_total);
    report.push(
        "kernel_under_resolved",
        spec.under_resolved(&grid).to_string(),
    );
    report.push("nan", "PASS");
    report.write(&outdir.join("diagnostics.txt"))?;
    Ok(RunOutcome {
        exit_code: 0,
        summary: vec![format!(
            "stochastic run complete, {} clamped points",
            traj.clamped_total
        )],
    })
}

fn run_nonlinear(cfg: &RunConfig, grid: GridSpec, outdir: &Path) -> anyhow::Result<RunOutcome> {
    let gammas = build_gammas(Representation::ChiralAsPaper);
    let sp = Spectral::new(&grid);
    let em = build_em(cfg, grid);
    let psi0 = build_initial(cfg, grid, &gammas, &sp)?;
    let config = EvolveConfig::new(cfg.dt, cfg.n_steps, cfg.record_every);
    let (cmp, linear, nonlinear) = spreading_comparison(&psi0, &em, &gammas, &config)?;
    qhd1::write_trajectory(&outdir.join("trajectory_linear.qhd1"), &linear.frames)?;
    qhd1::write_trajectory(&outdir.join("trajectory_nonlinear.qhd1"), &nonlinear.frames)?;
    let n = cmp.width_linear.len().min(cmp.width_nonlinear.len());
    let frame_dt = linear.frame_interval();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![i as f64 * frame_dt, cmp.width_linear[i], cmp.width_nonlinear[i]])
        .collect();
    write_csv(
        &outdir.join("widths.csv"),
        &["t", "width_linear", "width_nonlinear"],
        &rows,
    )?;
    let corr_rows: Vec<Vec<f64>> = nonlinear
        .series
        .iter()
        .map(|r| vec![r.t, r.norm_correction, r.mean_z, r.width])
        .collect();
    write_csv(
        &outdir.join("nonlinear_series.csv"),
        &["t", "norm_correction", "mean_z", "width"],
        &corr_rows,
    )?;
    let mut report = KeyValueReport::new();
    report.push("regime", "nonlinear");
    report.push_f64("growth_linear", cmp.growth_linear);
    report.push_f64("growth_nonlinear", cmp.growth_nonlinear);
    report.push_f64("suppression_ratio", cmp.suppression_ratio);
    report.push_f64("max_abs_log_norm_correction", cmp.max_norm_correction);
    report.write(&outdir.join("comparison.txt"))?;
    Ok(RunOutcome {
        exit_code: 0,
        summary: vec![format!(
            "width growth ratio {:.3} (nonlinear {:.4} vs linear {:.4})",
            cmp.suppression_ratio, cmp.growth_nonlinear, cmp.growth_linear
        )],
    })
}

fn run_boost_check(cfg: &RunConfig, outdir: &Path) -> anyhow::Result<RunOutcome> {
    let Some(traj_path) = &cfg.trajectory else {
        bail!("boost_check requires boost.trajectory = <path to a stored trajectory>");
    };
    boost_check(Path::new(traj_path), cfg.beta, cfg.t_prime, outdir)
}

pub fn boost_check(
    traj_path: &Path,
    beta: f64,
    t_prime: Option<f64>,
    outdir: &Path,
) -> anyhow::Result<RunOutcome> {
    fs::create_dir_all(outdir)?;
    let frames = qhd1::read_trajectory_frames(traj_path)
        .with_context(|| format!("reading trajectory {}", traj_path.display()))?;
    if frames.len() < 4 {
        bail!(
            "boost_check precondition: stored trajectory has {} frames, needs >= 4 (record more frames)",
            frames.len()
        );
    }
    let gammas = build_gammas(Representation::ChiralAsPaper);
    let boost = BoostSpec::new(beta, &gammas)?;
    let dt_rec = frames[1].time_stamp - frames[0].time_stamp;
    let traj = Trajectory {
        dt: dt_rec,
        record_every: 1,
        adjoint_deviation: None,
        series: Vec::new(),
        frames,
    };
    // valid primed-time window: the covariance slice plus the vqu triple at
    // t' +/- frame_interval/gamma must all map inside the covered range,
    // including the cubic stencil margin and the slice tilt gamma beta L
    let grid = traj.frames[0].grid;
    let t_first = traj.frames[0].time_stamp;
    let t_last = traj.frames.last().unwrap().time_stamp;
    let dtp = dt_rec / boost.gamma;
    let lmax = grid.length() - grid.dx;
    let tp_lo = (t_first + dt_rec) / boost.gamma + dtp - beta.min(0.0) * lmax;
    let tp_hi = (t_last - dt_rec) / boost.gamma - dtp - beta.max(0.0) * lmax;
    if tp_lo > tp_hi {
        bail!(
            "boost_check precondition: trajectory [{t_first}, {t_last}] is too short for \
             beta = {beta} on a box of length {} (the tilted slice spans {:.3} time units); \
             record a longer trajectory",
            grid.length(),
            boost.gamma * beta.abs() * grid.length()
        );
    }
    let tp = t_prime.unwrap_or(0.5 * (tp_lo + tp_hi));
    let cov = current_covariance_check(&traj, &boost, tp, &gammas)?;
    let vqu = vqu_invariance_check(&traj, &boost, tp, &gammas)?;
    let mut report = KeyValueReport::new();
    report.push("regime", "boost_check");
    report.push_f64("beta", beta);
    report.push_f64("t_prime", tp);
    report.push_f64("current_max_rel_deviation", cov.max_rel_deviation);
    report.push_f64("charge_primed", cov.charge_primed);
    report.push_f64("charge_original", cov.charge_original);
    for a in 0..4 {
        report.push_f64(
            &format!("vqu_mean_rel_deviation_{}", a + 1),
            vqu.mean_rel_deviation[a],
        );
        report.push_f64(
            &format!("vqu_max_rel_deviation_{}", a + 1),
            vqu.max_rel_deviation[a],
        );
    }
    report.push_f64("vqu_mask_overlap", vqu.mask_overlap);
    report.push("vqu_overlap_warning", vqu.overlap_warning.to_string());
    report.write(&outdir.join("boost_report.txt"))?;
    // deviation histogram
    let mut rows = Vec::new();
    if !vqu.deviations.is_empty() {
        let lo = vqu.deviations.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vqu
            .deviations
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let bins = 32usize;
        let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
        let mut counts = vec![0usize; bins];
        for d in &vqu.deviations {
            let b = (((d - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, &c) in counts.iter().enumerate() {
            rows.push(vec![lo + (b as f64 + 0.5) * width, c as f64]);
        }
    }
    write_csv(&outdir.join("vqu_deviation_hist.csv"), &["deviation", "count"], &rows)?;
    Ok(RunOutcome {
        exit_code: 0,
        summary: vec![
            format!("J covariance max deviation {:.3e}", cov.max_rel_deviation),
            format!(
                "V_qu invariance (measurement): mean rel dev {:.3e}, overlap {:.2}",
                vqu.mean_rel_deviation[0], vqu.mask_overlap
            ),
        ],
    })
}

fn run_compare(cfg: &RunConfig, grid: GridSpec, outdir: &Path) -> anyhow::Result<RunOutcome> {
    let gammas = build_gammas(Representation::ChiralAsPaper);
    let mut report = KeyValueReport::new();
    report.push("regime", "compare");
    let mut rho_d = Vec::new();
    let mut vel_d = Vec::new();
    for (tag, v) in [("v1", cfg.compare_v1), ("v2", cfg.compare_v2)] {
        let cmp = dirac_vs_pauli(
            grid,
            cfg.mass,
            cfg.compare_sigma,
            v,
            cfg.compare_t_final,
            cfg.dt,
            &gammas,
        )?;
        report.push_f64(&format!("{tag}_over_c"), v);
        report.push_f64(&format!("{tag}_rho_distance"), cmp.rho_distance);
        report.push_f64(&format!("{tag}_velocity_distance"), cmp.velocity_distance);
        report.push_f64(&format!("{tag}_negative_weight"), cmp.negative_weight);
        rho_d.push(cmp.rho_distance);
        vel_d.push(cmp.velocity_distance);
    }
    // the velocity-field distance carries the physical velocity scaling;
    // the rho distance is dominated by the static embedding dressing
    let ratio = vel_d[1] / vel_d[0];
    report.push_f64("velocity_distance_ratio", ratio);
    report.push_f64("rho_distance_ratio", rho_d[1] / rho_d[0]);
    let expected = (cfg.compare_v2 / cfg.compare_v1).powi(2);
    report.push_f64("quadratic_scaling_expectation", expected);
    report.write(&outdir.join("compare_report.txt"))?;
    Ok(RunOutcome {
        exit_code: 0,
        summary: vec![format!(
            "velocity distance ratio {ratio:.2} (quadratic expectation {expected:.2})"
        )],
    })
}

/// Known hydro field names for `extract --dump-field`.
pub const FIELD_NAMES: &str =
    "rho, j0, j3, qdot, r1..r4, s1..s4, logratio1..logratio4, p13, p24, vqu1..vqu4, bsum";

pub fn extract(traj_path: &Path, field: &str, outdir: &Path) -> anyhow::Result<RunOutcome> {
    fs::create_dir_all(outdir)?;
    let frames = qhd1::read_trajectory_frames(traj_path)?;
    let gammas = build_gammas(Representation::ChiralAsPaper);
    let sp = Spectral::new(&frames[0].grid);
    let hydro: Vec<HydroFrame> = frames
        .iter()
        .map(|f| HydroFrame::from_spinor(f, &gammas, &sp))
        .collect::<Result<_, _>>()?;
    let dx = frames[0].grid.dx;
    let needs_triple = field.starts_with("vqu") || field == "bsum";
    let mut w = BufWriter::new(fs::File::create(
        outdir.join(format!("{field}.qhd1")),
    )?);
    let component_index = |name: &str, prefix: &str| -> anyhow::Result<usize> {
        let idx: usize = name
            .strip_prefix(prefix)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| anyhow!("unknown field {name:?}, expected one of: {FIELD_NAMES}"))?;
        if (1..=4).contains(&idx) {
            Ok(idx - 1)
        } else {
            Err(anyhow!("component index out of range in {name:?}"))
        }
    };
    let mut frames_written = 0usize;
    if needs_triple {
        if hydro.len() < 3 {
            bail!("field {field:?} needs at least 3 recorded frames");
        }
        for i in 1..hydro.len() - 1 {
            let qp = quantum_potential(&hydro[i - 1], &hydro[i], &hydro[i + 1])?;
            let values: &[f64] = if field == "bsum" {
                &qp.contraction
            } else {
                &qp.vqu[component_index(field, "vqu")?]
            };
            qhd1::write_real_field(&mut w, dx, hydro[i].time_stamp, values)?;
            frames_written += 1;
        }
    } else {
        for frame in &hydro {
            let values: Vec<f64> = match field {
                "rho" => frame.rho.clone(),
                "j0" => frame.j0.clone(),
                "j3" => frame.j3.clone(),
                "qdot" => frame.qdot.clone(),
                "p13" => frame.p_pair[0].clone(),
                "p24" => frame.p_pair[1].clone(),
                name if name.starts_with("logratio") => {
                    frame.logratio[component_index(name, "logratio")?].clone()
                }
                name if name.starts_with('r') => frame.r[component_index(name, "r")?].clone(),
                name if name.starts_with('s') => frame.s[component_index(name, "s")?].clone(),
                other => bail!("unknown field {other:?}, expected one of: {FIELD_NAMES}"),
            };
            qhd1::write_real_field(&mut w, dx, frame.time_stamp, &values)?;
            frames_written += 1;
        }
    }
    // per-frame observables alongside the dump
    let mut rows = Vec::new();
    for i in 1..hydro.len().saturating_sub(1) {
        let res = continuity_residual(&hydro[i - 1], &hydro[i], &hydro[i + 1]);
        rows.push(vec![
            hydro[i].time_stamp,
            hydro[i].charge(),
            qhd_core::analysis::l2_norm(&res, dx),
        ]);
    }
    write_csv(&outdir.join("hydro.csv"), &["t", "charge", "continuity_l2"], &rows)?;
    Ok(RunOutcome {
        exit_code: 0,
        summary: vec![format!("wrote {frames_written} {field} frames")],
    })
}

pub fn ensemble(cfg: &RunConfig, n: usize, outdir: &Path) -> anyhow::Result<RunOutcome> {
    fs::create_dir_all(outdir)?;
    let grid = build_grid(cfg)?;
    write_manifest(cfg, &grid, outdir)?;
    let gammas = build_gammas(Representation::ChiralAsPaper);
    let sp = Spectral::new(&grid);
    let em = build_em(cfg, grid);
    let psi0 = build_initial(cfg, grid, &gammas, &sp)?;
    let lambda = if cfg.lambda_c.is_finite() {
        cfg.lambda_c
    } else {
        grid.length()
    };
    let spec = NoiseSpec::new(cfg.temperature, lambda, cfg.kappa, cfg.seed)?;
    let config = EvolveConfig::new(cfg.dt, cfg.n_steps, cfg.record_every);
    let report = ensemble_run(&psi0, &em, &gammas, &spec, n, &config)?;
    let mut rows = Vec::new();
    for (fi, &t) in report.times.iter().enumerate() {
        for j in 0..grid.n_points {
            rows.push(vec![
                t,
                grid.z(j),
                report.mean_rho[fi][j],
                report.var_rho[fi][j],
            ]);
        }
    }
    write_csv(&outdir.join("stats.csv"), &["t", "z", "mean_rho", "var_rho"], &rows)?;
    let mut kv = KeyValueReport::new();
    kv.push("n_realizations", n);
    kv.push_f64("prenorm_final_variance", report.prenorm_final_variance);
    kv.push_f64("mean_abs_log_correction", report.mean_abs_log_correction);
    kv.write(&outdir.join("ensemble_report.txt"))?;
    Ok(RunOutcome {
        exit_code: 0,
        summary: vec![format!("{n} realizations complete")],
    })
}

/// Map an error to the documented exit codes: 2 config, 3 I/O, 1 invariant.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<crate::config::ConfigErrors>().is_some() {
        return 2;
    }
    if let Some(q) = err.downcast_ref::<QhdError>() {
        return match q {
            QhdError::Io(_) | QhdError::Format(_) => 3,
            QhdError::InvalidConfig(_) | QhdError::InvalidGrid(_) | QhdError::InvalidNoiseSpec(_) => 2,
            _ => 1,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    // precondition messages (missing trajectory etc.) are config-level
    2
}

pub fn load_config_file(path: &Path) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    crate::config::parse_config(&text).map_err(anyhow::Error::new)
}

pub fn default_outdir(config_path: &Path) -> PathBuf {
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "run".to_string());
    PathBuf::from(format!("{stem}_out"))
}
