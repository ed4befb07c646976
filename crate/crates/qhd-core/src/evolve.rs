//! Unitary time evolution of the Dirac field by Strang-split spectral
//! stepping, plus the adjoint co-evolution used as an internal consistency
//! oracle.
//!
//! Factorization per step: a half-step diagonal phase for eW (and, when A
//! varies in space, the alpha^3-diagonal eA phase), then the exact k-space
//! propagator of the kinetic+mass part, then the second half phase. Each
//! factor is unitary, so the composed step is unitary to rounding. A uniform
//! A is folded into the k-space factor exactly.

use crate::algebra::{C64, Mat4, ZERO};
use crate::em::EMFieldSet;
use crate::error::{QhdError, Result};
use crate::field::{mean_energy, SpinorField};
use crate::gamma::GammaSet;
use crate::grid::GridSpec;
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    StrangSpectral,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
    /// Co-evolve the adjoint field and report the worst deviation from the
    /// adjoint of the evolved field.
    pub adjoint_check: bool,
}

impl EvolveConfig {
    pub fn new(dt: f64, n_steps: usize, record_every: usize) -> Self {
        Self {
            scheme: Scheme::StrangSpectral,
            dt,
            n_steps,
            record_every: record_every.max(1),
        adjoint_check: false,
        }
    }

    pub fn with_adjoint_check(mut self) -> Self {
        self.adjoint_check = true;
        self
    }
}

/// Per-step observables, recorded at every step (norm, centroid) with the
/// energy filled in at recorded frames only.
#[derive(Debug, Clone, Copy)]
pub struct ObsRow {
    pub t: f64,
    pub norm: f64,
    pub mean_z: f64,
    pub mean_energy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frames: Vec<SpinorField>,
    pub series: Vec<ObsRow>,
    pub dt: f64,
    pub record_every: usize,
    /// Worst pointwise deviation of the co-evolved adjoint, when requested.
    pub adjoint_deviation: Option<f64>,
}

impl Trajectory {
    pub fn frame_interval(&self) -> f64 {
        self.dt * self.record_every as f64
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time_stamp).collect()
    }
}

/// Cached split factors for one (grid, em, gammas, dt) combination.
pub struct DiracPropagator {
    pub sp: Spectral,
    dt: f64,
    /// exp(-i e W dt/2) per point.
    half_pot: Vec<C64>,
    /// Per-point theta = e A(z) c dt/2 for the alpha^3 phase, empty when A
    /// is uniform (folded into the k-space factor instead).
    half_theta_a: Vec<f64>,
    /// Exact kinetic+mass propagator per mode.
    kinetic: Vec<Mat4>,
    /// chi^0 conj(kinetic[mirror]) chi^0 per mode, built on demand for the
    /// adjoint co-evolution.
    adjoint_kinetic: Option<Vec<Mat4>>,
    alpha3: Mat4,
    /// chi^0 conj(alpha^3) chi^0, the alpha matrix seen by the adjoint field.
    alpha3_adj: Mat4,
    chi0: Mat4,
}

fn conj_mat(m: &Mat4) -> Mat4 {
    let mut out = Mat4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            out.m[i][j] = m.m[i][j].conj();
        }
    }
    out
}

/// exp(-i h dt) for h = alpha^3 kappa + chi^0 m, using h^2 = E^2 I:
/// cos(E dt) I - i sin(E dt)/E h.
fn kinetic_exponential(kappa: f64, m: f64, dt: f64, alpha3: &Mat4, chi0: &Mat4) -> Mat4 {
    let energy = (kappa * kappa + m * m).sqrt();
    let h = alpha3
        .scale(C64::new(kappa, 0.0))
        .add(&chi0.scale(C64::new(m, 0.0)));
    let sinc = if energy == 0.0 {
        dt
    } else {
        (energy * dt).sin() / energy
    };
    Mat4::identity()
        .scale(C64::new((energy * dt).cos(), 0.0))
        .add(&h.scale(C64::new(0.0, -sinc)))
}

impl DiracPropagator {
    pub fn new(grid: &GridSpec, em: &EMFieldSet, gammas: &GammaSet, dt: f64) -> Result<Self> {
        grid.check_same_layout(&em.grid)?;
        let sp = Spectral::new(grid);
        let half_pot: Vec<C64> = em
            .w
            .iter()
            .map(|&w| C64::new(0.0, -em.e * w * dt / 2.0).exp())
            .collect();
        let a_uniform = em.a_is_uniform();
        let ea_fold = if a_uniform { em.e * em.a[0] } else { 0.0 };
        let half_theta_a: Vec<f64> = if a_uniform {
            Vec::new()
        } else {
            em.a.iter().map(|&a| em.e * a * dt / 2.0).collect()
        };
        let kinetic: Vec<Mat4> = sp
            .wavenumbers()
            .iter()
            .map(|&k| kinetic_exponential(k - ea_fold, em.m, dt, gammas.alpha3(), gammas.chi0()))
            .collect();
        let alpha3 = *gammas.alpha3();
        let chi0 = *gammas.chi0();
        let alpha3_adj = chi0.mul(&conj_mat(&alpha3)).mul(&chi0);
        Ok(Self {
            sp,
            dt,
            half_pot,
            half_theta_a,
            kinetic,
            adjoint_kinetic: None,
            alpha3,
            alpha3_adj,
            chi0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn apply_half_potential(&self, psi: &mut SpinorField, conjugate: bool) {
        for a in 0..4 {
            for (v, &p) in psi.comps[a].iter_mut().zip(self.half_pot.iter()) {
                *v *= if conjugate { p.conj() } else { p };
            }
        }
        if !self.half_theta_a.is_empty() {
            // exp(+i theta alpha^3) = cos(theta) I + i sin(theta) alpha^3;
            // the adjoint route sees exp(-i theta chi^0 conj(alpha^3) chi^0).
            for j in 0..psi.n_points() {
                let theta = self.half_theta_a[j];
                let (s, c) = theta.sin_cos();
                let v = psi.value_at(j);
                let (av, sign) = if conjugate {
                    (self.alpha3_adj.apply(&v), -s)
                } else {
                    (self.alpha3.apply(&v), s)
                };
                let mut out = [ZERO; 4];
                for a in 0..4 {
                    out[a] = C64::new(c, 0.0) * v[a] + C64::new(0.0, sign) * av[a];
                }
                psi.set_value(j, out);
            }
        }
    }

    fn apply_kinetic(&self, psi: &mut SpinorField, adjoint: bool) {
        let hats: [Vec<C64>; 4] = [
            self.sp.forward(&psi.comps[0]),
            self.sp.forward(&psi.comps[1]),
            self.sp.forward(&psi.comps[2]),
            self.sp.forward(&psi.comps[3]),
        ];
        let n = psi.n_points();
        let mats: &[Mat4] = if adjoint {
            self.adjoint_kinetic
                .as_ref()
                .expect("adjoint factors not prepared")
        } else {
            &self.kinetic
        };
        let mut out_hats: [Vec<C64>; 4] = [
            vec![ZERO; n],
            vec![ZERO; n],
            vec![ZERO; n],
            vec![ZERO; n],
        ];
        for m in 0..n {
            let v = [hats[0][m], hats[1][m], hats[2][m], hats[3][m]];
            let mv = mats[m].apply(&v);
            for a in 0..4 {
                out_hats[a][m] = mv[a];
            }
        }
        for a in 0..4 {
            psi.comps[a] = self.sp.inverse(&out_hats[a]);
        }
    }

    /// One Strang step. The caller owns NaN detection so step indices can be
    /// reported.
    pub fn step(&self, psi: &SpinorField) -> SpinorField {
        let mut out = psi.clone();
        self.apply_half_potential(&mut out, false);
        self.apply_kinetic(&mut out, false);
        self.apply_half_potential(&mut out, false);
        out.time_stamp = psi.time_stamp + self.dt;
        out
    }

    /// Prepare the mirrored-conjugated factors for adjoint co-evolution.
    pub fn prepare_adjoint(&mut self) {
        let n = self.kinetic.len();
        let mut adj = Vec::with_capacity(n);
        for m in 0..n {
            let mirror = (n - m) % n;
            let mut conj = Mat4::zeros();
            for i in 0..4 {
                for j in 0..4 {
                    conj.m[i][j] = self.kinetic[mirror].m[i][j].conj();
                }
            }
            adj.push(self.chi0.mul(&conj).mul(&self.chi0));
        }
        self.adjoint_kinetic = Some(adj);
    }

    /// One step of the adjoint field psi_bar = chi^0 conj(psi), which obeys
    /// the conjugated Schroedinger-like equation. Independent factor path
    /// from [`Self::step`]; equality of the two routes is the oracle.
    pub fn step_adjoint(&self, psi_bar: &SpinorField) -> SpinorField {
        let mut out = psi_bar.clone();
        self.apply_half_potential(&mut out, true);
        self.apply_kinetic(&mut out, true);
        self.apply_half_potential(&mut out, true);
        out.time_stamp = psi_bar.time_stamp + self.dt;
        out
    }
}

/// psi_bar = chi^0 conj(psi).
pub fn adjoint_field(psi: &SpinorField, gammas: &GammaSet) -> SpinorField {
    let mut out = psi.clone();
    for j in 0..psi.n_points() {
        let v = psi.value_at(j);
        let conj = [v[0].conj(), v[1].conj(), v[2].conj(), v[3].conj()];
        out.set_value(j, gammas.chi0().apply(&conj));
    }
    out
}

fn max_pointwise_distance(a: &SpinorField, b: &SpinorField) -> f64 {
    let mut worst = 0.0_f64;
    for c in 0..4 {
        for (x, y) in a.comps[c].iter().zip(b.comps[c].iter()) {
            worst = worst.max((x - y).norm());
        }
    }
    worst
}

/// Convenience single step matching the spec surface; loops should build a
/// [`DiracPropagator`] once and reuse it.
pub fn step(
    psi: &SpinorField,
    em: &EMFieldSet,
    gammas: &GammaSet,
    dt: f64,
) -> Result<SpinorField> {
    if !psi.is_finite() {
        return Err(QhdError::NanDetected { step: 0 });
    }
    let prop = DiracPropagator::new(&psi.grid, em, gammas, dt)?;
    let out = prop.step(psi);
    if !out.is_finite() {
        return Err(QhdError::NanDetected { step: 0 });
    }
    Ok(out)
}

/// Evolve `psi0` for `config.n_steps` steps, recording every
/// `config.record_every`-th frame (the initial frame is always recorded).
pub fn evolve(
    psi0: &SpinorField,
    em: &EMFieldSet,
    gammas: &GammaSet,
    config: &EvolveConfig,
) -> Result<Trajectory> {
    let mut prop = DiracPropagator::new(&psi0.grid, em, gammas, config.dt)?;
    if config.adjoint_check {
        prop.prepare_adjoint();
    }
    evolve_with(&prop, psi0, em, gammas, config, |_, _| {})
}

/// Evolution loop with a per-step observer hook; the stochastic and
/// nonlinear regimes wrap this with their own extra factors.
pub fn evolve_with<F>(
    prop: &DiracPropagator,
    psi0: &SpinorField,
    em: &EMFieldSet,
    gammas: &GammaSet,
    config: &EvolveConfig,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(usize, &SpinorField),
{
    if !psi0.is_finite() {
        return Err(QhdError::NanDetected { step: 0 });
    }
    let record_every = config.record_every.max(1);
    let mut psi = psi0.clone();
    let mut psi_bar = if config.adjoint_check {
        Some(adjoint_field(&psi, gammas))
    } else {
        None
    };
    let mut worst_adjoint = 0.0_f64;
    let mut frames = Vec::with_capacity(config.n_steps / record_every + 1);
    let mut series = Vec::with_capacity(config.n_steps + 1);
    let record = |psi: &SpinorField, frames: &mut Vec<SpinorField>| {
        frames.push(psi.clone());
    };
    let observe = |psi: &SpinorField, with_energy: bool| -> Result<ObsRow> {
        Ok(ObsRow {
            t: psi.time_stamp,
            norm: psi.norm2(),
            mean_z: psi.mean_z(),
            mean_energy: if with_energy {
                Some(mean_energy(psi, em, gammas, &prop.sp)?)
            } else {
                None
            },
        })
    };
    record(&psi, &mut frames);
    series.push(observe(&psi, true)?);
    for step_idx in 1..=config.n_steps {
        psi = prop.step(&psi);
        if !psi.is_finite() {
            return Err(QhdError::NanDetected { step: step_idx });
        }
        if let Some(bar) = psi_bar.as_mut() {
            *bar = prop.step_adjoint(bar);
            worst_adjoint = worst_adjoint.max(max_pointwise_distance(
                bar,
                &adjoint_field(&psi, gammas),
            ));
        }
        observer(step_idx, &psi);
        let at_record = step_idx % record_every == 0;
        series.push(observe(&psi, at_record)?);
        if at_record {
            record(&psi, &mut frames);
        }
    }
    Ok(Trajectory {
        frames,
        series,
        dt: config.dt,
        record_every,
        adjoint_deviation: psi_bar.map(|_| worst_adjoint),
    })
}
