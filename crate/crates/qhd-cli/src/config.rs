//! Key-value run configuration: parsing, validation with a full violation
//! list, and the manifest echo that makes every run re-runnable.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Dirac,
    Pauli,
    Stochastic,
    Nonlinear,
    BoostCheck,
    Compare,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Dirac => "dirac",
            Regime::Pauli => "pauli",
            Regime::Stochastic => "stochastic",
            Regime::Nonlinear => "nonlinear",
            Regime::BoostCheck => "boost_check",
            Regime::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    Gaussian,
    RestSuperposition,
    PlaneWave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmKind {
    Free,
    UniformE,
    Harmonic,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub regime: Regime,
    pub seed: u64,
    pub seed_given: bool,
    pub n_points: usize,
    pub dx: f64,
    pub dt: f64,
    pub mass: f64,
    pub charge: f64,
    pub initial_kind: InitialKind,
    pub center: Option<f64>,
    pub sigma: f64,
    pub k0: f64,
    pub spin_theta: f64,
    pub spin_phi: f64,
    pub em_kind: EmKind,
    pub e0: f64,
    pub omega: f64,
    pub b_ext: [f64; 3],
    pub a0: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub adjoint_check: bool,
    pub temperature: f64,
    pub lambda_c: f64,
    pub kappa: f64,
    pub beta: f64,
    pub trajectory: Option<String>,
    pub t_prime: Option<f64>,
    pub compare_v1: f64,
    pub compare_v2: f64,
    pub compare_sigma: f64,
    pub compare_t_final: f64,
    pub ensemble_n: usize,
}

#[derive(Debug)]
pub struct ConfigErrors {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid config ({} violation(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Extractor {
    map: BTreeMap<String, String>,
    consumed: Vec<String>,
    violations: Vec<String>,
}

impl Extractor {
    fn get(&mut self, key: &str) -> Option<String> {
        if let Some(v) = self.map.get(key) {
            self.consumed.push(key.to_string());
            Some(v.clone())
        } else {
            None
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        match self.get(key) {
            None => default,
            Some(raw) => match raw.parse::<f64>() {
                Ok(v) => v,
                Err(_) => {
                    self.violations
                        .push(format!("{key}: expected a number, got {raw:?}"));
                    default
                }
            },
        }
    }

    fn f64_opt(&mut self, key: &str) -> Option<f64> {
        self.get(key).and_then(|raw| match raw.parse::<f64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.violations
                    .push(format!("{key}: expected a number, got {raw:?}"));
                None
            }
        })
    }

    fn usize_or(&mut self, key: &str, default: usize) -> usize {
        match self.get(key) {
            None => default,
            Some(raw) => match raw.parse::<usize>() {
                Ok(v) => v,
                Err(_) => {
                    self.violations
                        .push(format!("{key}: expected a non-negative integer, got {raw:?}"));
                    default
                }
            },
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> bool {
        match self.get(key).as_deref() {
            None => default,
            Some("true") | Some("1") | Some("yes") => true,
            Some("false") | Some("0") | Some("no") => false,
            Some(raw) => {
                self.violations
                    .push(format!("{key}: expected true/false, got {raw:?}"));
                default
            }
        }
    }

}

/// Parse `key = value` lines (UTF-8, `#` comments) into a validated config.
/// Every violation is reported, not just the first; unknown keys are
/// rejected.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut map = BTreeMap::new();
    let mut violations = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                let key = k.trim().to_string();
                if map.insert(key.clone(), v.trim().to_string()).is_some() {
                    violations.push(format!("{key}: duplicated (line {})", lineno + 1));
                }
            }
            None => violations.push(format!(
                "line {}: expected `key = value`, got {line:?}",
                lineno + 1
            )),
        }
    }
    let mut ex = Extractor {
        map,
        consumed: Vec::new(),
        violations,
    };

    let regime = match ex.get("regime").as_deref() {
        Some("dirac") => Regime::Dirac,
        Some("pauli") => Regime::Pauli,
        Some("stochastic") => Regime::Stochastic,
        Some("nonlinear") => Regime::Nonlinear,
        Some("boost_check") => Regime::BoostCheck,
        Some("compare") => Regime::Compare,
        Some(other) => {
            ex.violations.push(format!(
                "regime: unknown {other:?} (expected dirac|pauli|stochastic|nonlinear|boost_check|compare)"
            ));
            Regime::Dirac
        }
        None => {
            ex.violations.push("regime: missing".to_string());
            Regime::Dirac
        }
    };

    let n_points = ex.usize_or("grid.n_points", 256);
    if n_points < 8 || !n_points.is_power_of_two() {
        ex.violations.push(format!(
            "grid.n_points: must be a power of two >= 8, got {n_points}"
        ));
    }
    let dx = ex.f64_or("grid.dx", 0.25);
    if dx <= 0.0 {
        ex.violations.push(format!("grid.dx: must be > 0, got {dx}"));
    }
    let dt = ex.f64_or("grid.dt", 0.1 * dx.max(f64::MIN_POSITIVE));
    if dt <= 0.0 {
        ex.violations.push(format!("grid.dt: must be > 0, got {dt}"));
    }
    let mass = ex.f64_or("particle.mass", 1.0);
    if mass < 0.0 {
        ex.violations
            .push(format!("particle.mass: must be >= 0, got {mass}"));
    }
    let charge = ex.f64_or("particle.charge", 1.0);

    let initial_kind = match ex.get("initial.kind").as_deref() {
        None | Some("gaussian") => InitialKind::Gaussian,
        Some("rest_superposition") => InitialKind::RestSuperposition,
        Some("plane_wave") => InitialKind::PlaneWave,
        Some(other) => {
            ex.violations.push(format!(
                "initial.kind: unknown {other:?} (expected gaussian|rest_superposition|plane_wave)"
            ));
            InitialKind::Gaussian
        }
    };
    let center = ex.f64_opt("initial.center");
    let sigma = ex.f64_or("initial.sigma", 4.0);
    if sigma <= 0.0 {
        ex.violations
            .push(format!("initial.sigma: must be > 0, got {sigma}"));
    }
    let k0 = ex.f64_or("initial.k0", 0.0);
    let spin_theta = ex.f64_or("initial.spin_theta", 0.0);
    let spin_phi = ex.f64_or("initial.spin_phi", 0.0);

    let em_kind = match ex.get("em.kind").as_deref() {
        None | Some("free") => EmKind::Free,
        Some("uniform_e") => EmKind::UniformE,
        Some("harmonic") => EmKind::Harmonic,
        Some(other) => {
            ex.violations.push(format!(
                "em.kind: unknown {other:?} (expected free|uniform_e|harmonic)"
            ));
            EmKind::Free
        }
    };
    let e0 = ex.f64_or("em.e0", 0.0);
    let omega = ex.f64_or("em.omega", 0.0);
    if em_kind == EmKind::Harmonic && omega <= 0.0 {
        ex.violations
            .push(format!("em.omega: harmonic trap needs omega > 0, got {omega}"));
    }
    let b_ext = [
        ex.f64_or("em.b_x", 0.0),
        ex.f64_or("em.b_y", 0.0),
        ex.f64_or("em.b_z", 0.0),
    ];
    let a0 = ex.f64_or("em.a0", 0.0);

    let n_steps = ex.usize_or("evolve.n_steps", 100);
    if n_steps == 0 {
        ex.violations
            .push("evolve.n_steps: must be >= 1 for a run".to_string());
    }
    let record_every = ex.usize_or("evolve.record_every", 1);
    if record_every == 0 {
        ex.violations
            .push("evolve.record_every: must be >= 1".to_string());
    }
    let adjoint_check = ex.bool_or("evolve.adjoint_check", false);

    let temperature = ex.f64_or("noise.temperature", 0.0);
    if temperature < 0.0 {
        ex.violations
            .push(format!("noise.temperature: must be >= 0, got {temperature}"));
    }
    let kappa = ex.f64_or("noise.kappa", 1.0);
    let lambda_c = match ex.f64_opt("noise.lambda_c") {
        Some(v) => {
            if v <= 0.0 {
                ex.violations
                    .push(format!("noise.lambda_c: must be > 0, got {v}"));
            }
            v
        }
        None => qhd_core::noise::lambda_c(temperature, mass.max(f64::MIN_POSITIVE), kappa),
    };

    let seed_given = ex.map.contains_key("seed");
    let seed = ex.usize_or("seed", 0) as u64;
    if regime == Regime::Stochastic && !seed_given {
        ex.violations
            .push("seed: required for the stochastic regime (reproducibility)".to_string());
    }

    let beta = ex.f64_or("boost.beta", 0.0);
    if regime == Regime::BoostCheck && !(beta.abs() < 1.0 && beta != 0.0) {
        ex.violations.push(format!(
            "boost.beta: boost_check needs 0 < |beta| < 1, got {beta}"
        ));
    }
    let trajectory = ex.get("boost.trajectory");
    let t_prime = ex.f64_opt("boost.t_prime");

    let compare_v1 = ex.f64_or("compare.v1", 0.01);
    let compare_v2 = ex.f64_or("compare.v2", 0.02);
    let compare_sigma = ex.f64_or("compare.sigma", 16.0);
    let compare_t_final = ex.f64_or("compare.t_final", 1.0);
    if regime == Regime::Compare {
        for (key, v) in [("compare.v1", compare_v1), ("compare.v2", compare_v2)] {
            if !(0.0..=0.05).contains(&v) {
                ex.violations
                    .push(format!("{key}: v/c must lie in [0, 0.05], got {v}"));
            }
        }
    }
    let ensemble_n = ex.usize_or("ensemble.n", 2);

    // unknown keys are violations
    for key in ex.map.keys() {
        if !ex.consumed.iter().any(|c| c == key) {
            ex.violations.push(format!("{key}: unknown key"));
        }
    }

    if ex.violations.is_empty() {
        Ok(RunConfig {
            regime,
            seed,
            seed_given,
            n_points,
            dx,
            dt,
            mass,
            charge,
            initial_kind,
            center,
            sigma,
            k0,
            spin_theta,
            spin_phi,
            em_kind,
            e0,
            omega,
            b_ext,
            a0,
            n_steps,
            record_every,
            adjoint_check,
            temperature,
            lambda_c,
            kappa,
            beta,
            trajectory,
            t_prime,
            compare_v1,
            compare_v2,
            compare_sigma,
            compare_t_final,
            ensemble_n,
        })
    } else {
        Err(ConfigErrors {
            violations: ex.violations,
        })
    }
}

impl RunConfig {
    /// Render the resolved configuration back into parseable form; the
    /// manifest is this echo plus comment lines with derived diagnostics.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("regime", self.regime.as_str().into());
        kv("seed", self.seed.to_string());
        kv("grid.n_points", self.n_points.to_string());
        kv("grid.dx", format!("{:.17e}", self.dx));
        kv("grid.dt", format!("{:.17e}", self.dt));
        kv("particle.mass", format!("{:.17e}", self.mass));
        kv("particle.charge", format!("{:.17e}", self.charge));
        kv(
            "initial.kind",
            match self.initial_kind {
                InitialKind::Gaussian => "gaussian",
                InitialKind::RestSuperposition => "rest_superposition",
                InitialKind::PlaneWave => "plane_wave",
            }
            .into(),
        );
        if let Some(c) = self.center {
            kv("initial.center", format!("{c:.17e}"));
        }
        kv("initial.sigma", format!("{:.17e}", self.sigma));
        kv("initial.k0", format!("{:.17e}", self.k0));
        kv("initial.spin_theta", format!("{:.17e}", self.spin_theta));
        kv("initial.spin_phi", format!("{:.17e}", self.spin_phi));
        kv(
            "em.kind",
            match self.em_kind {
                EmKind::Free => "free",
                EmKind::UniformE => "uniform_e",
                EmKind::Harmonic => "harmonic",
            }
            .into(),
        );
        kv("em.e0", format!("{:.17e}", self.e0));
        if self.em_kind == EmKind::Harmonic {
            kv("em.omega", format!("{:.17e}", self.omega));
        }
        kv("em.b_x", format!("{:.17e}", self.b_ext[0]));
        kv("em.b_y", format!("{:.17e}", self.b_ext[1]));
        kv("em.b_z", format!("{:.17e}", self.b_ext[2]));
        kv("em.a0", format!("{:.17e}", self.a0));
        kv("evolve.n_steps", self.n_steps.to_string());
        kv("evolve.record_every", self.record_every.to_string());
        kv("evolve.adjoint_check", self.adjoint_check.to_string());
        kv("noise.temperature", format!("{:.17e}", self.temperature));
        if self.lambda_c.is_finite() {
            kv("noise.lambda_c", format!("{:.17e}", self.lambda_c));
        }
        kv("noise.kappa", format!("{:.17e}", self.kappa));
        if self.beta != 0.0 {
            kv("boost.beta", format!("{:.17e}", self.beta));
        }
        if let Some(t) = &self.trajectory {
            kv("boost.trajectory", t.clone());
        }
        if let Some(t) = self.t_prime {
            kv("boost.t_prime", format!("{t:.17e}"));
        }
        if self.regime == Regime::Compare {
            kv("compare.v1", format!("{:.17e}", self.compare_v1));
            kv("compare.v2", format!("{:.17e}", self.compare_v2));
            kv("compare.sigma", format!("{:.17e}", self.compare_sigma));
            kv("compare.t_final", format!("{:.17e}", self.compare_t_final));
        }
        kv("ensemble.n", self.ensemble_n.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("regime = dirac\n").unwrap();
        assert_eq!(cfg.regime, Regime::Dirac);
        assert_eq!(cfg.n_points, 256);
        assert!((cfg.dt - 0.025).abs() < 1e-15);
        assert_eq!(cfg.record_every, 1);
    }

    #[test]
    fn all_violations_are_collected() {
        let err = parse_config(
            "regime = warp\ngrid.dx = -1\ngrid.n_points = 100\nbogus.key = 1\n",
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("regime"), "{text}");
        assert!(text.contains("grid.dx"), "{text}");
        assert!(text.contains("grid.n_points"), "{text}");
        assert!(text.contains("bogus.key"), "{text}");
        assert!(err.violations.len() >= 4);
    }

    #[test]
    fn negative_dx_is_rejected_with_key_path() {
        let err = parse_config("regime = dirac\ngrid.dx = -0.5\n").unwrap_err();
        assert!(err.violations.iter().any(|v| v.starts_with("grid.dx")));
    }

    #[test]
    fn stochastic_without_seed_is_rejected() {
        let err = parse_config("regime = stochastic\nnoise.temperature = 0.1\n").unwrap_err();
        assert!(err.violations.iter().any(|v| v.starts_with("seed")));
        assert!(parse_config("regime = stochastic\nnoise.temperature = 0.1\nseed = 7\n").is_ok());
    }

    #[test]
    fn echo_reparses_to_the_same_config() {
        let cfg = parse_config(
            "regime = stochastic\nseed = 9\nnoise.temperature = 0.25\ngrid.n_points = 64\n",
        )
        .unwrap();
        let echoed = parse_config(&cfg.echo()).unwrap();
        assert_eq!(echoed.seed, cfg.seed);
        assert_eq!(echoed.n_points, cfg.n_points);
        assert_eq!(echoed.temperature, cfg.temperature);
        assert_eq!(echoed.lambda_c, cfg.lambda_c);
        assert_eq!(cfg.echo(), echoed.echo());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("# a comment\n\nregime = pauli # trailing\n").unwrap();
        assert_eq!(cfg.regime, Regime::Pauli);
    }
}
