//! Spatially correlated Gaussian noise and the stochastic Dirac stepping.
//!
//! One noise realization per time step, white in time (variance scaled by
//! 1/dt) and Gaussian-correlated in space with kernel exp[-(lambda/
//! lambda_c)^2]. Fields are synthesized spectrally: Hermitian white draws
//! per mode scaled by the square root of the kernel's spectrum, so the
//! sample covariance matches the target kernel shape by construction.
//! Realizations are deterministic in (seed, step index) and independent
//! across steps, which keeps ensembles reproducible under any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::algebra::C64;
use crate::em::EMFieldSet;
use crate::error::{QhdError, Result};
use crate::evolve::{DiracPropagator, EvolveConfig};
use crate::field::SpinorField;
use crate::gamma::GammaSet;
use crate::grid::GridSpec;
use crate::spectral::Spectral;

/// Amplitude/correlation description of the thermostat noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    /// Noise amplitude (thermostat temperature, energy units; k_B = 1).
    pub temperature: f64,
    /// Spatial correlation length of the Gaussian kernel.
    pub lambda_c: f64,
    /// Dimensionless prefactor of the lambda_c(T) law.
    pub kappa: f64,
    /// Base RNG seed; realization r uses seed + r, step s uses stream s.
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(temperature: f64, lambda_c: f64, kappa: f64, seed: u64) -> Result<Self> {
        if temperature < 0.0 {
            return Err(QhdError::InvalidNoiseSpec(format!(
                "temperature must be >= 0, got {temperature}"
            )));
        }
        if !(lambda_c > 0.0) {
            return Err(QhdError::InvalidNoiseSpec(format!(
                "lambda_c must be > 0, got {lambda_c}"
            )));
        }
        Ok(Self {
            temperature,
            lambda_c,
            kappa,
            seed,
        })
    }

    /// Build with the correlation length tied to the temperature by
    /// lambda_c = kappa / sqrt(2 m T).
    pub fn from_temperature(temperature: f64, mass: f64, kappa: f64, seed: u64) -> Result<Self> {
        let lc = lambda_c(temperature, mass, kappa);
        if lc.is_infinite() {
            // T = 0: noise disabled; the correlation length is a sentinel
            return Ok(Self {
                temperature: 0.0,
                lambda_c: f64::INFINITY,
                kappa,
                seed,
            });
        }
        Self::new(temperature, lc, kappa, seed)
    }

    /// Kernel under-resolution warning condition.
    pub fn under_resolved(&self, grid: &GridSpec) -> bool {
        self.lambda_c.is_finite() && self.lambda_c < 2.0 * grid.dx
    }

    /// Per-step field variance: white-in-time discretization carries 1/dt.
    pub fn step_variance(&self, dt: f64) -> f64 {
        self.temperature / dt
    }
}

/// lambda_c = kappa hbar / sqrt(2 m k T) in natural units (hbar = k_B = 1).
/// T = 0 maps to the +infinity sentinel (noise disabled).
pub fn lambda_c(temperature: f64, mass: f64, kappa: f64) -> f64 {
    if temperature == 0.0 {
        return f64::INFINITY;
    }
    kappa / (2.0 * mass * temperature).sqrt()
}

/// One realization of the correlated field.
#[derive(Debug, Clone)]
pub struct NoiseField {
    pub values: Vec<f64>,
    pub seed: u64,
    pub step_index: u64,
}

/// Cached square-root spectrum of the periodized Gaussian kernel for one
/// (grid, spec, dt) combination.
pub struct NoiseGenerator {
    spec: NoiseSpec,
    grid: GridSpec,
    sp: Spectral,
    /// sqrt(N sigma^2 G_hat_m) per mode.
    sqrt_spectrum: Vec<f64>,
}

impl NoiseGenerator {
    pub fn new(spec: NoiseSpec, grid: GridSpec, dt: f64) -> Self {
        let n = grid.n_points;
        let sp = Spectral::new(&grid);
        if spec.temperature == 0.0 {
            return Self {
                spec,
                grid,
                sp,
                sqrt_spectrum: vec![0.0; n],
            };
        }
        // periodized kernel sampled on the grid
        let l = grid.length();
        let kernel: Vec<C64> = (0..n)
            .map(|j| {
                let mut d = grid.z(j);
                if d > l / 2.0 {
                    d -= l;
                }
                let mut g = 0.0;
                for image in -1..=1 {
                    let dd = d + image as f64 * l;
                    g += (-(dd / spec.lambda_c) * (dd / spec.lambda_c)).exp();
                }
                C64::new(g, 0.0)
            })
            .collect();
        let ghat = sp.forward(&kernel);
        let sigma2 = spec.step_variance(dt);
        let sqrt_spectrum = ghat
            .iter()
            .map(|v| (v.re.max(0.0) * n as f64 * sigma2).sqrt())
            .collect();
        Self {
            spec,
            grid,
            sp,
            sqrt_spectrum,
        }
    }

    /// Deterministic realization for (seed, step_index).
    pub fn generate(&self, step_index: u64) -> NoiseField {
        let n = self.grid.n_points;
        if self.spec.temperature == 0.0 {
            return NoiseField {
                values: vec![0.0; n],
                seed: self.spec.seed,
                step_index,
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(step_index);
        let mut hat = vec![C64::new(0.0, 0.0); n];
        // fixed draw order: DC, Nyquist, then conjugate pairs
        let g0: f64 = rng.sample(StandardNormal);
        hat[0] = C64::new(g0 * self.sqrt_spectrum[0], 0.0);
        let gn: f64 = rng.sample(StandardNormal);
        hat[n / 2] = C64::new(gn * self.sqrt_spectrum[n / 2], 0.0);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for m in 1..n / 2 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let v = C64::new(a * half, b * half) * self.sqrt_spectrum[m];
            hat[m] = v;
            hat[n - m] = v.conj();
        }
        let values = self.sp.inverse(&hat).iter().map(|v| v.re).collect();
        NoiseField {
            values,
            seed: self.spec.seed,
            step_index,
        }
    }
}

pub fn generate_noise(spec: &NoiseSpec, grid: &GridSpec, dt: f64, step_index: u64) -> NoiseField {
    NoiseGenerator::new(*spec, *grid, dt).generate(step_index)
}

/// Per-step bookkeeping of the non-unitary noise factor.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoiseStepLog {
    /// Norm correction factor applied after the noise term (1.0 when T=0).
    pub correction: f64,
    /// Points where the 1/rho division was clamped.
    pub clamped: usize,
}

/// Largest per-step log-amplitude kick the noise term may apply at a point.
/// Where 1/rho would push the kick past this, the exponent is clamped and
/// the point counted. The budget must stay perturbative: tail points with
/// order-one kicks are amplified on average (a lognormal mean effect) and
/// would bias the ensemble density at first order in the noise amplitude.
pub const MAX_STEP_LOG_AMPLITUDE: f64 = 0.1;

/// One deterministic Strang step composed with the noise term
/// i Xi(z) / |Psi|^2 applied over dt. The term is anti-Hermitian, so the
/// norm is restored afterwards and the correction logged.
pub fn stochastic_step(
    psi: &SpinorField,
    prop: &DiracPropagator,
    gen: &NoiseGenerator,
    step_index: u64,
) -> (SpinorField, NoiseStepLog) {
    if gen.spec.temperature == 0.0 {
        // bitwise-identical to the deterministic step
        return (
            prop.step(psi),
            NoiseStepLog {
                correction: 1.0,
                clamped: 0,
            },
        );
    }
    let mut out = prop.step(psi);
    let norm_before = out.norm2();
    let noise = gen.generate(step_index);
    let rho = out.rho();
    let dt = prop.dt();
    let mut clamped = 0usize;
    for j in 0..out.n_points() {
        let mut exponent = if rho[j] > 0.0 {
            dt * noise.values[j] / rho[j]
        } else {
            f64::INFINITY
        };
        if !exponent.is_finite() || exponent.abs() > MAX_STEP_LOG_AMPLITUDE {
            clamped += 1;
            exponent = exponent.clamp(-MAX_STEP_LOG_AMPLITUDE, MAX_STEP_LOG_AMPLITUDE);
            if !exponent.is_finite() {
                exponent = 0.0;
            }
        }
        let factor = exponent.exp();
        for a in 0..4 {
            out.comps[a][j] *= factor;
        }
    }
    let norm_after = out.norm2();
    let correction = (norm_before / norm_after).sqrt();
    out.scale(correction);
    (
        out,
        NoiseStepLog {
            correction,
            clamped,
        },
    )
}

#[derive(Debug, Clone)]
pub struct StochasticTrajectory {
    pub frames: Vec<SpinorField>,
    /// (t, pre-renormalization norm, correction factor) per step.
    pub step_log: Vec<(f64, f64, f64)>,
    pub clamped_total: usize,
    pub dt: f64,
    pub record_every: usize,
}

pub fn evolve_stochastic(
    psi0: &SpinorField,
    em: &EMFieldSet,
    gammas: &GammaSet,
    spec: &NoiseSpec,
    config: &EvolveConfig,
) -> Result<StochasticTrajectory> {
    let prop = DiracPropagator::new(&psi0.grid, em, gammas, config.dt)?;
    let gen = NoiseGenerator::new(*spec, psi0.grid, config.dt);
    let record_every = config.record_every.max(1);
    let mut psi = psi0.clone();
    let mut frames = vec![psi.clone()];
    let mut step_log = Vec::with_capacity(config.n_steps);
    let mut clamped_total = 0usize;
    for step_idx in 1..=config.n_steps {
        let (next, log) = stochastic_step(&psi, &prop, &gen, step_idx as u64);
        psi = next;
        if !psi.is_finite() {
            return Err(QhdError::NanDetected { step: step_idx });
        }
        clamped_total += log.clamped;
        let prenorm = if log.correction > 0.0 {
            psi.norm2() / (log.correction * log.correction)
        } else {
            psi.norm2()
        };
        step_log.push((psi.time_stamp, prenorm, log.correction));
        if step_idx % record_every == 0 {
            frames.push(psi.clone());
        }
    }
    Ok(StochasticTrajectory {
        frames,
        step_log,
        clamped_total,
        dt: config.dt,
        record_every,
    })
}

/// Ensemble mean/variance of rho at the recorded times, plus per-realization
/// diagnostics. Realization r runs with seed = base + r; the reduction is a
/// sequential fold in r order, so results are bit-identical for any rayon
/// pool size.
#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub times: Vec<f64>,
    pub mean_rho: Vec<Vec<f64>>,
    pub var_rho: Vec<Vec<f64>>,
    /// Variance over realizations of the final pre-renormalization norm.
    pub prenorm_final_variance: f64,
    pub mean_abs_log_correction: f64,
    pub n_realizations: usize,
}

pub fn ensemble_run(
    psi0: &SpinorField,
    em: &EMFieldSet,
    gammas: &GammaSet,
    spec: &NoiseSpec,
    n_realizations: usize,
    config: &EvolveConfig,
) -> Result<EnsembleReport> {
    assert!(n_realizations >= 2, "ensemble needs at least 2 realizations");
    let runs: Vec<Result<StochasticTrajectory>> = (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let mut spec_r = *spec;
            spec_r.seed = spec.seed.wrapping_add(r as u64);
            evolve_stochastic(psi0, em, gammas, &spec_r, config)
        })
        .collect();
    let mut trajs = Vec::with_capacity(n_realizations);
    for run in runs {
        trajs.push(run?);
    }
    let n_frames = trajs[0].frames.len();
    let n = psi0.n_points();
    let times: Vec<f64> = trajs[0].frames.iter().map(|f| f.time_stamp).collect();
    let mut mean_rho = vec![vec![0.0; n]; n_frames];
    let mut var_rho = vec![vec![0.0; n]; n_frames];
    for traj in &trajs {
        for (fi, frame) in traj.frames.iter().enumerate() {
            for (j, &r) in frame.rho().iter().enumerate() {
                mean_rho[fi][j] += r;
                var_rho[fi][j] += r * r;
            }
        }
    }
    let nr = n_realizations as f64;
    for fi in 0..n_frames {
        for j in 0..n {
            mean_rho[fi][j] /= nr;
            var_rho[fi][j] = (var_rho[fi][j] / nr - mean_rho[fi][j] * mean_rho[fi][j]).max(0.0);
        }
    }
    let finals: Vec<f64> = trajs
        .iter()
        .map(|t| t.step_log.last().map(|&(_, p, _)| p).unwrap_or(1.0))
        .collect();
    let fmean = finals.iter().sum::<f64>() / nr;
    let prenorm_final_variance =
        finals.iter().map(|v| (v - fmean) * (v - fmean)).sum::<f64>() / nr;
    let mut corr_acc = 0.0;
    let mut corr_count = 0usize;
    for t in &trajs {
        for &(_, _, c) in &t.step_log {
            corr_acc += c.ln().abs();
            corr_count += 1;
        }
    }
    Ok(EnsembleReport {
        times,
        mean_rho,
        var_rho,
        prenorm_final_variance,
        mean_abs_log_correction: if corr_count > 0 {
            corr_acc / corr_count as f64
        } else {
            0.0
        },
        n_realizations,
    })
}

/// Average spatial autocovariance over realizations: C(d) for lags
/// d = 0..n/2.
pub fn sample_autocovariance(fields: &[NoiseField], n: usize) -> Vec<f64> {
    let lags = n / 2;
    let mut cov = vec![0.0; lags];
    for field in fields {
        for (d, c) in cov.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += field.values[j] * field.values[(j + d) % n];
            }
            *c += acc / n as f64;
        }
    }
    for c in cov.iter_mut() {
        *c /= fields.len() as f64;
    }
    cov
}

/// Least-squares fit of the correlation length from an autocovariance:
/// ln C(d) = ln C(0) - (d dx / lambda)^2 over lags with C > 0.2 C(0).
pub fn fit_correlation_length(cov: &[f64], dx: f64) -> f64 {
    let c0 = cov[0];
    let mut us = Vec::new();
    let mut ys = Vec::new();
    for (d, &c) in cov.iter().enumerate().skip(1) {
        if c > 0.2 * c0 {
            let lag = d as f64 * dx;
            us.push(lag * lag);
            ys.push((c / c0).ln());
        } else {
            break;
        }
    }
    assert!(us.len() >= 2, "kernel under-resolved for fitting");
    let (slope, _) = crate::analysis::linear_fit(&us, &ys);
    (-1.0 / slope).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{free_eigenspinor, packet_with_spinor, spin_up, EnergyBranch};
    use crate::gamma::{build_gammas, Representation};

    fn grid(n: usize, dx: f64, dt: f64) -> GridSpec {
        GridSpec::new(n, dx, dt).unwrap()
    }

    #[test]
    fn lambda_c_scales_inverse_sqrt_temperature() {
        let l1 = lambda_c(1.0, 1.0, 1.0);
        let l4 = lambda_c(4.0, 1.0, 1.0);
        assert!((l1 / l4 - 2.0).abs() < 1e-14);
        // m and T enter as a product
        assert!((lambda_c(1.0, 4.0, 2.5) - lambda_c(4.0, 1.0, 2.5)).abs() < 1e-14);
        assert!(lambda_c(0.0, 1.0, 1.0).is_infinite());
    }

    #[test]
    fn si_boundary_value_matches_codata_arithmetic() {
        // hbar / sqrt(2 m_e k_B 300K), computed independently: 1.2139e-9 m
        let lc = crate::units::lambda_c_si_meters(300.0, crate::units::ELECTRON_MASS_KG, 1.0);
        assert!(
            (lc - 1.2139e-9).abs() / 1.2139e-9 < 1e-3,
            "lambda_c(300K) = {lc}"
        );
    }

    #[test]
    fn zero_temperature_yields_zero_field() {
        let g = grid(64, 0.5, 0.02);
        let spec = NoiseSpec::new(0.0, 1.0, 1.0, 7).unwrap();
        let field = generate_noise(&spec, &g, 0.02, 3);
        assert!(field.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_and_step_is_bit_identical_across_pools() {
        let g = grid(128, 0.5, 0.02);
        let spec = NoiseSpec::new(0.5, 2.0, 1.0, 42).unwrap();
        let gen = NoiseGenerator::new(spec, g, 0.02);
        let a = gen.generate(11);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool.install(|| gen.generate(11));
        assert_eq!(a.values, b.values);
        let c = gen.generate(12);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn covariance_matches_gaussian_kernel() {
        // kernel value at one correlation length is e^{-1}
        let g = grid(256, 0.25, 0.02);
        let lc = 2.0;
        let spec = NoiseSpec::new(1.0, lc, 1.0, 9).unwrap();
        let gen = NoiseGenerator::new(spec, g, 0.02);
        let fields: Vec<NoiseField> = (0..4000).map(|s| gen.generate(s)).collect();
        let cov = sample_autocovariance(&fields, g.n_points);
        let sigma2 = spec.step_variance(0.02);
        assert!(
            (cov[0] - sigma2).abs() / sigma2 < 0.05,
            "variance {} vs {sigma2}",
            cov[0]
        );
        let lag = (lc / g.dx).round() as usize;
        let ratio = cov[lag] / cov[0];
        let expected = (-1.0_f64).exp();
        // 3 sigma statistical window for 4000 x 256 correlated samples
        assert!(
            (ratio - expected).abs() < 0.03,
            "C(lc)/C(0) = {ratio} vs {expected}"
        );
    }

    #[test]
    fn fitted_correlation_length_matches_spec() {
        let g = grid(256, 0.25, 0.02);
        let lc = 2.0;
        let spec = NoiseSpec::new(1.0, lc, 1.0, 1234).unwrap();
        let gen = NoiseGenerator::new(spec, g, 0.02);
        let fields: Vec<NoiseField> = (0..2000).map(|s| gen.generate(s)).collect();
        let cov = sample_autocovariance(&fields, g.n_points);
        let fitted = fit_correlation_length(&cov, g.dx);
        assert!(
            ((fitted - lc) / lc).abs() < 0.05,
            "fitted {fitted} vs {lc}"
        );
    }

    #[test]
    fn under_resolved_kernel_is_flagged() {
        let g = grid(64, 0.5, 0.02);
        let spec = NoiseSpec::new(1.0, 0.5, 1.0, 1).unwrap();
        assert!(spec.under_resolved(&g));
        let ok = NoiseSpec::new(1.0, 2.0, 1.0, 1).unwrap();
        assert!(!ok.under_resolved(&g));
    }

    #[test]
    fn zero_temperature_step_is_bitwise_deterministic() {
        let g = grid(128, 0.25, 0.02);
        let em = EMFieldSet::free(g, 1.0);
        let gammas = build_gammas(Representation::ChiralAsPaper);
        let psi = packet_with_spinor(
            g,
            16.0,
            2.0,
            0.4,
            free_eigenspinor(0.0, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let prop = DiracPropagator::new(&g, &em, &gammas, g.dt).unwrap();
        let gen = NoiseGenerator::new(NoiseSpec::new(0.0, 1.0, 1.0, 5).unwrap(), g, g.dt);
        let (stoch, log) = stochastic_step(&psi, &prop, &gen, 1);
        let det = prop.step(&psi);
        assert_eq!(log.correction, 1.0);
        for a in 0..4 {
            for j in 0..g.n_points {
                assert!(stoch.comps[a][j] == det.comps[a][j], "bitwise mismatch");
            }
        }
    }

    #[test]
    fn norm_correction_scales_linearly_with_amplitude() {
        let g = grid(128, 0.25, 0.02);
        let em = EMFieldSet::free(g, 1.0);
        let gammas = build_gammas(Representation::ChiralAsPaper);
        let psi = packet_with_spinor(
            g,
            16.0,
            3.0,
            0.2,
            free_eigenspinor(0.0, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let mean_corr = |temperature: f64| -> f64 {
            let spec = NoiseSpec::new(temperature, 2.0, 1.0, 77).unwrap();
            let config = EvolveConfig::new(g.dt, 40, 40);
            let traj = evolve_stochastic(&psi, &em, &gammas, &spec, &config).unwrap();
            traj.step_log
                .iter()
                .map(|&(_, _, c)| c.ln().abs())
                .sum::<f64>()
                / traj.step_log.len() as f64
        };
        // amplitude ~ sqrt(T): quadrupling T should double the correction
        let c1 = mean_corr(1e-6);
        let c2 = mean_corr(4e-6);
        let ratio = c2 / c1;
        assert!(
            (1.6..2.4).contains(&ratio),
            "correction ratio {ratio}, expected ~2"
        );
    }

    #[test]
    fn ensemble_mean_tracks_deterministic_run_at_small_noise() {
        let g = grid(128, 0.25, 0.02);
        let em = EMFieldSet::free(g, 1.0);
        let gammas = build_gammas(Representation::ChiralAsPaper);
        let psi = packet_with_spinor(
            g,
            16.0,
            3.0,
            0.3,
            free_eigenspinor(0.0, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let steps = 50;
        let config = EvolveConfig::new(g.dt, steps, steps);
        let det = crate::evolve::evolve(&psi, &em, &gammas, &config).unwrap();
        let det_rho = det.frames.last().unwrap().rho();
        // T must be small enough that the quadratic-in-noise drift of the
        // multiplicative term stays below the ensemble standard error,
        // which itself shrinks only as sqrt(T)
        let spec = NoiseSpec::new(1e-9, 2.0, 1.0, 99).unwrap();
        let n_real = 200;
        let report = ensemble_run(&psi, &em, &gammas, &spec, n_real, &config).unwrap();
        let mean = report.mean_rho.last().unwrap();
        let var = report.var_rho.last().unwrap();
        // compare on the packet bulk: clamped tail points have collapsed
        // variance and no meaningful standard error
        let rmax = det_rho.iter().cloned().fold(0.0_f64, f64::max);
        let mut worst_sigma = 0.0_f64;
        for j in 0..g.n_points {
            if det_rho[j] < 1e-3 * rmax {
                continue;
            }
            let se = (var[j] / n_real as f64).sqrt();
            if se > 0.0 {
                worst_sigma = worst_sigma.max((mean[j] - det_rho[j]).abs() / se);
            }
        }
        // 3 sigma per point would be too strict across ~60 correlated
        // points; allow the usual multiple-comparison headroom
        assert!(
            worst_sigma < 5.0,
            "ensemble mean deviates {worst_sigma} standard errors"
        );
    }

    #[test]
    fn identical_seeds_give_zero_variance() {
        let g = grid(64, 0.5, 0.05);
        let em = EMFieldSet::free(g, 1.0);
        let gammas = build_gammas(Representation::ChiralAsPaper);
        let psi = packet_with_spinor(
            g,
            16.0,
            2.0,
            0.0,
            free_eigenspinor(0.0, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let spec = NoiseSpec::new(1e-4, 2.0, 1.0, 3).unwrap();
        let config = EvolveConfig::new(g.dt, 10, 10);
        // run the same realization twice by hand
        let a = evolve_stochastic(&psi, &em, &gammas, &spec, &config).unwrap();
        let b = evolve_stochastic(&psi, &em, &gammas, &spec, &config).unwrap();
        let (fa, fb) = (a.frames.last().unwrap(), b.frames.last().unwrap());
        for c in 0..4 {
            assert_eq!(fa.comps[c], fb.comps[c]);
        }
    }

    #[test]
    fn prenorm_variance_grows_with_temperature() {
        let g = grid(64, 0.5, 0.05);
        let em = EMFieldSet::free(g, 1.0);
        let gammas = build_gammas(Representation::ChiralAsPaper);
        let psi = packet_with_spinor(
            g,
            16.0,
            2.5,
            0.0,
            free_eigenspinor(0.0, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let config = EvolveConfig::new(g.dt, 20, 20);
        let var_at = |temperature: f64| -> f64 {
            let spec = NoiseSpec::new(temperature, 2.0, 1.0, 21).unwrap();
            ensemble_run(&psi, &em, &gammas, &spec, 40, &config)
                .unwrap()
                .prenorm_final_variance
        };
        let v1 = var_at(1e-6);
        let v2 = var_at(1e-5);
        let v3 = var_at(1e-4);
        assert!(v1 < v2 && v2 < v3, "variances {v1}, {v2}, {v3}");
    }

    #[test]
    fn ensemble_standard_error_halves_with_four_x_realizations() {
        let g = grid(64, 0.5, 0.05);
        let em = EMFieldSet::free(g, 1.0);
        let gammas = build_gammas(Representation::ChiralAsPaper);
        let psi = packet_with_spinor(
            g,
            16.0,
            2.5,
            0.0,
            free_eigenspinor(0.0, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let config = EvolveConfig::new(g.dt, 10, 10);
        let spec = NoiseSpec::new(1e-4, 2.0, 1.0, 5).unwrap();
        let se_of = |n_real: usize, seed: u64| -> f64 {
            let mut s = spec;
            s.seed = seed;
            let rep = ensemble_run(&psi, &em, &gammas, &s, n_real, &config).unwrap();
            let var = rep.var_rho.last().unwrap();
            (var.iter().sum::<f64>() / var.len() as f64 / n_real as f64).sqrt()
        };
        let se_small = se_of(50, 5);
        let se_big = se_of(200, 5);
        let ratio = se_small / se_big;
        assert!(
            (1.4..2.9).contains(&ratio),
            "expected ~2x standard error reduction, got {ratio}"
        );
    }
}
