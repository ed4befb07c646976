//! Lorentz boosts of recorded trajectories and the covariance checks built
//! on them: spinor-field boosting between frames, 4-vector covariance of
//! the current (the hard gate) and the quantum-potential scalar-invariance
//! measurement (a report, not a gate).
//!
//! Boosted slices sample the original trajectory at tilted spacetime
//! events: cubic interpolation in time over the recorded frames, the exact
//! trigonometric interpolant in space. A slice of a periodic field taken at
//! a tilted time is no longer strictly periodic; the packet configurations
//! used here vanish at the box edges, which keeps the seam mismatch at the
//! interpolation floor.


use crate::algebra::{C64, Mat4, Spinor4, ZERO};
use crate::error::{QhdError, Result};
use crate::evolve::Trajectory;
use crate::field::SpinorField;
use crate::gamma::GammaSet;
use crate::grid::GridSpec;
use crate::hydro::{quantum_potential, HydroFrame};
use crate::spectral::Spectral;

/// Boost along z with velocity fraction beta, plus the spinor-space
/// transformation exp(-(eta/2) chi^0 chi^3).
#[derive(Debug, Clone)]
pub struct BoostSpec {
    pub beta: f64,
    pub gamma: f64,
    pub rapidity: f64,
    pub spinor_boost: Mat4,
    pub spinor_boost_inv: Mat4,
}

impl BoostSpec {
    pub fn new(beta: f64, gammas: &GammaSet) -> Result<Self> {
        if !(-1.0..=1.0).contains(&beta) || beta.abs() >= 1.0 {
            return Err(QhdError::InvalidConfig(format!(
                "boost beta must lie in (-1, 1), got {beta}"
            )));
        }
        let rapidity = beta.atanh();
        let gamma = 1.0 / (1.0 - beta * beta).sqrt();
        let spinor_boost = boost_matrix(rapidity, gammas);
        let spinor_boost_inv = boost_matrix(-rapidity, gammas);
        Ok(Self {
            beta,
            gamma,
            rapidity,
            spinor_boost,
            spinor_boost_inv,
        })
    }

    /// The coordinate transformation Lambda^mu_nu, rows/cols (t, x, y, z).
    pub fn lambda(&self) -> [[f64; 4]; 4] {
        let (g, gb) = (self.gamma, self.gamma * self.beta);
        [
            [g, 0.0, 0.0, -gb],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [-gb, 0.0, 0.0, g],
        ]
    }

    /// Map an event from the primed frame back to the original frame.
    pub fn event_preimage(&self, t_prime: f64, z_prime: f64) -> (f64, f64) {
        (
            self.gamma * (t_prime + self.beta * z_prime),
            self.gamma * (z_prime + self.beta * t_prime),
        )
    }
}

/// exp(-(eta/2) chi^0 chi^3) via (chi^0 chi^3)^2 = 1:
/// cosh(eta/2) - sinh(eta/2) chi^0 chi^3.
pub fn boost_matrix(rapidity: f64, gammas: &GammaSet) -> Mat4 {
    let half = rapidity / 2.0;
    Mat4::identity()
        .scale(C64::new(half.cosh(), 0.0))
        .add(&gammas.alpha3().scale(C64::new(-half.sinh(), 0.0)))
}

/// Cubic-in-time, spectral-in-space sampler over recorded frames.
pub struct FrameInterpolator<'a> {
    frames: &'a [SpinorField],
    hats: Vec<[Vec<C64>; 4]>,
    sp: Spectral,
    grid: GridSpec,
    t_first: f64,
    dt_rec: f64,
}

impl<'a> FrameInterpolator<'a> {
    pub fn new(frames: &'a [SpinorField]) -> Result<Self> {
        if frames.len() < 4 {
            return Err(QhdError::InsufficientFrames {
                needed: 4,
                got: frames.len(),
            });
        }
        let grid = frames[0].grid;
        let sp = Spectral::new(&grid);
        let dt_rec = frames[1].time_stamp - frames[0].time_stamp;
        let hats = frames
            .iter()
            .map(|f| std::array::from_fn(|a| sp.forward(&f.comps[a])))
            .collect();
        Ok(Self {
            frames,
            hats,
            sp,
            grid,
            t_first: frames[0].time_stamp,
            dt_rec,
        })
    }

    pub fn t_first(&self) -> f64 {
        self.t_first
    }

    pub fn t_last(&self) -> f64 {
        self.frames.last().unwrap().time_stamp
    }

    /// Times must stay one frame away from the ends for the cubic stencil.
    pub fn covered(&self, t: f64) -> bool {
        t >= self.t_first + self.dt_rec && t <= self.t_last() - self.dt_rec
    }

    fn sample_frame(&self, idx: usize, z: f64) -> Spinor4 {
        // exact grid hit avoids the interpolant sum
        let jf = z / self.grid.dx;
        let jr = jf.round();
        if (jf - jr).abs() < 1e-9 {
            let j = (jr as i64).rem_euclid(self.grid.n_points as i64) as usize;
            return self.frames[idx].value_at(j);
        }
        std::array::from_fn(|a| self.sp.eval_interpolant(&self.hats[idx][a], z))
    }

    /// Sample the field at an arbitrary event inside the covered window.
    pub fn psi_at(&self, t: f64, z: f64) -> Result<Spinor4> {
        let l = self.grid.length();
        let z = z.rem_euclid(l);
        let s = (t - self.t_first) / self.dt_rec;
        let n = self.frames.len();
        let nearest = s.round();
        if (s - nearest).abs() < 1e-10 && (0.0..n as f64).contains(&nearest) {
            return Ok(self.sample_frame(nearest as usize, z));
        }
        if !self.covered(t) {
            return Err(QhdError::CoverageViolation {
                t_min_needed: t,
                t_max_needed: t,
                t_min_have: self.t_first,
                t_max_have: self.t_last(),
            });
        }
        let i1 = (s.floor() as usize).clamp(1, n - 3);
        let stencil = [i1 - 1, i1, i1 + 1, i1 + 2];
        let u = s - i1 as f64;
        // Lagrange weights on the uniform 4-point stencil {-1, 0, 1, 2}
        let w = [
            -u * (u - 1.0) * (u - 2.0) / 6.0,
            (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
            -(u + 1.0) * u * (u - 2.0) / 2.0,
            (u + 1.0) * u * (u - 1.0) / 6.0,
        ];
        let mut out = [ZERO; 4];
        for (sten_idx, &fi) in stencil.iter().enumerate() {
            let v = self.sample_frame(fi, z);
            for a in 0..4 {
                out[a] += v[a] * C64::new(w[sten_idx], 0.0);
            }
        }
        Ok(out)
    }
}

/// One primed-frame slice Psi'(t', z') = S Psi(Lambda^{-1} x') on the same
/// grid layout.
pub fn boost_slice(
    interp: &FrameInterpolator,
    boost: &BoostSpec,
    t_prime: f64,
) -> Result<SpinorField> {
    let grid = interp.grid;
    // coverage of the whole tilted slice, with the cubic stencil margin
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    for j in 0..grid.n_points {
        let (t, _) = boost.event_preimage(t_prime, grid.z(j));
        t_min = t_min.min(t);
        t_max = t_max.max(t);
    }
    if t_min < interp.t_first + interp.dt_rec || t_max > interp.t_last() - interp.dt_rec {
        return Err(QhdError::CoverageViolation {
            t_min_needed: t_min,
            t_max_needed: t_max,
            t_min_have: interp.t_first,
            t_max_have: interp.t_last(),
        });
    }
    let mut out = SpinorField::zeros(grid);
    out.time_stamp = t_prime;
    for j in 0..grid.n_points {
        let (t, z) = boost.event_preimage(t_prime, grid.z(j));
        let v = interp.psi_at(t, z)?;
        out.set_value(j, boost.spinor_boost.apply(&v));
    }
    Ok(out)
}

/// Boost a set of primed times into a primed-frame trajectory.
pub fn boost_field(
    traj: &Trajectory,
    boost: &BoostSpec,
    t_primes: &[f64],
) -> Result<Vec<SpinorField>> {
    let interp = FrameInterpolator::new(&traj.frames)?;
    t_primes
        .iter()
        .map(|&tp| boost_slice(&interp, boost, tp))
        .collect()
}

/// J^mu of one slice (time component first, z component second).
fn current_of(psi: &SpinorField, gammas: &GammaSet) -> (Vec<f64>, Vec<f64>) {
    let n = psi.n_points();
    let alpha3 = gammas.alpha3();
    let mut j0 = vec![0.0; n];
    let mut j3 = vec![0.0; n];
    for j in 0..n {
        let v = psi.value_at(j);
        let av = alpha3.apply(&v);
        for a in 0..4 {
            j0[j] += v[a].norm_sqr();
            j3[j] += (v[a].conj() * av[a]).re;
        }
    }
    (j0, j3)
}

#[derive(Debug, Clone)]
pub struct CovarianceReport {
    pub beta: f64,
    pub t_prime: f64,
    /// Worst |J'_measured - Lambda J_original| over the slice, relative to
    /// max |J'^0|.
    pub max_rel_deviation: f64,
    /// Charge integral in the primed frame vs the original frame.
    pub charge_primed: f64,
    pub charge_original: f64,
}

/// Compare J'^mu computed from boosted spinors against Lambda^mu_nu J^nu
/// interpolated from the original frame.
pub fn current_covariance_check(
    traj: &Trajectory,
    boost: &BoostSpec,
    t_prime: f64,
    gammas: &GammaSet,
) -> Result<CovarianceReport> {
    let interp = FrameInterpolator::new(&traj.frames)?;
    let primed = boost_slice(&interp, boost, t_prime)?;
    let (j0p, j3p) = current_of(&primed, gammas);
    let grid = primed.grid;
    let lam = boost.lambda();
    let mut max_dev = 0.0_f64;
    let scale = j0p.iter().cloned().fold(0.0_f64, f64::max);
    for j in 0..grid.n_points {
        let (t, z) = boost.event_preimage(t_prime, grid.z(j));
        let v = interp.psi_at(t, z)?;
        let mut tmp = SpinorField::zeros(grid);
        tmp.set_value(0, v);
        let av = gammas.alpha3().apply(&v);
        let mut j0 = 0.0;
        let mut j3 = 0.0;
        for a in 0..4 {
            j0 += v[a].norm_sqr();
            j3 += (v[a].conj() * av[a]).re;
        }
        let expected0 = lam[0][0] * j0 + lam[0][3] * j3;
        let expected3 = lam[3][0] * j0 + lam[3][3] * j3;
        max_dev = max_dev.max((j0p[j] - expected0).abs().max((j3p[j] - expected3).abs()));
    }
    let charge_primed = j0p.iter().sum::<f64>() * grid.dx;
    // compare against the charge of the central original frame
    let mid = traj.frames.len() / 2;
    let charge_original = traj.frames[mid].norm2();
    Ok(CovarianceReport {
        beta: boost.beta,
        t_prime,
        max_rel_deviation: max_dev / scale.max(f64::MIN_POSITIVE),
        charge_primed,
        charge_original,
    })
}

#[derive(Debug, Clone)]
pub struct VquInvarianceReport {
    pub beta: f64,
    pub t_prime: f64,
    /// Per-component deviation statistics of the bracket field, relative to
    /// its maximum magnitude over the compared mask.
    pub mean_rel_deviation: [f64; 4],
    pub max_rel_deviation: [f64; 4],
    /// Fraction of the grid where both frames' masks are valid.
    pub mask_overlap: f64,
    pub overlap_warning: bool,
    /// Raw deviations for histogramming.
    pub deviations: Vec<f64>,
}

/// Measure how close the quantum-potential bracket fields come to
/// transforming as Lorentz scalars: compute them in the primed frame from
/// boosted spinors and compare against the original-frame fields mapped
/// through the event transformation. A measurement, not a pass/fail gate:
/// the per-component log-ratios are representation-dependent and the source
/// does not pin the invariant contraction.
pub fn vqu_invariance_check(
    traj: &Trajectory,
    boost: &BoostSpec,
    t_prime: f64,
    gammas: &GammaSet,
) -> Result<VquInvarianceReport> {
    let interp = FrameInterpolator::new(&traj.frames)?;
    let dtp = traj.frame_interval() / boost.gamma;
    let slices = [
        boost_slice(&interp, boost, t_prime - dtp)?,
        boost_slice(&interp, boost, t_prime)?,
        boost_slice(&interp, boost, t_prime + dtp)?,
    ];
    let sp = Spectral::new(&slices[1].grid);
    let primed_frames: Vec<HydroFrame> = slices
        .iter()
        .map(|s| HydroFrame::from_spinor(s, gammas, &sp))
        .collect::<Result<_>>()?;
    let qp_primed = quantum_potential(&primed_frames[0], &primed_frames[1], &primed_frames[2])?;

    // original-frame bracket fields on the recorded frames
    let hydro: Vec<HydroFrame> = traj
        .frames
        .iter()
        .map(|f| HydroFrame::from_spinor(f, gammas, &sp))
        .collect::<Result<_>>()?;
    let n = slices[1].n_points();
    let grid = slices[1].grid;
    let mut mean_dev = [0.0_f64; 4];
    let mut max_dev = [0.0_f64; 4];
    let mut counts = [0usize; 4];
    let mut scale = [0.0_f64; 4];
    let mut deviations = Vec::new();
    let mut overlap = 0usize;
    for j in 0..n {
        let (t, z) = boost.event_preimage(t_prime, grid.z(j));
        // bracket of the original frame at the preimage event: evaluate on
        // the nearest interior recorded frame triple, linear blend in time
        let s = (t - hydro[0].time_stamp) / traj.frame_interval();
        let i = (s.floor() as usize).clamp(1, hydro.len() - 3);
        let frac = (s - i as f64).clamp(0.0, 1.0);
        let qp_a = quantum_potential(&hydro[i - 1], &hydro[i], &hydro[i + 1])?;
        let qp_b = quantum_potential(&hydro[i], &hydro[i + 1], &hydro[i + 2])?;
        let jz = ((z / grid.dx).round() as i64).rem_euclid(n as i64) as usize;
        let mut point_ok = false;
        for a in 0..4 {
            let ok = qp_primed.mask[a][j] && qp_a.mask[a][jz] && qp_b.mask[a][jz];
            if !ok {
                continue;
            }
            point_ok = true;
            let original = (1.0 - frac) * qp_a.b[a][jz] + frac * qp_b.b[a][jz];
            let dev = (qp_primed.b[a][j] - original).abs();
            mean_dev[a] += dev;
            max_dev[a] = max_dev[a].max(dev);
            scale[a] = scale[a].max(qp_primed.b[a][j].abs()).max(original.abs());
            counts[a] += 1;
            if a == 0 {
                deviations.push(qp_primed.b[a][j] - original);
            }
        }
        if point_ok {
            overlap += 1;
        }
    }
    for a in 0..4 {
        if counts[a] > 0 {
            mean_dev[a] /= counts[a] as f64;
        }
        let s = scale[a].max(f64::MIN_POSITIVE);
        mean_dev[a] /= s;
        max_dev[a] /= s;
    }
    let mask_overlap = overlap as f64 / n as f64;
    Ok(VquInvarianceReport {
        beta: boost.beta,
        t_prime,
        mean_rel_deviation: mean_dev,
        max_rel_deviation: max_dev,
        mask_overlap,
        overlap_warning: mask_overlap < 0.5,
        deviations,
    })
}

/// Relativistic velocity addition.
pub fn add_velocities(b1: f64, b2: f64) -> f64 {
    (b1 + b2) / (1.0 + b1 * b2)
}

/// Interpolation-error floor: boost an analytic plane-wave trajectory and
/// compare with the closed-form boosted wave. Used to calibrate reported
/// deviations.
pub fn interpolation_floor_probe(
    grid: GridSpec,
    m: f64,
    boost: &BoostSpec,
    gammas: &GammaSet,
) -> Result<f64> {
    use crate::em::EMFieldSet;
    use crate::evolve::{evolve, EvolveConfig};
    use crate::field::{dispersion, free_eigenspinor, spin_up, EnergyBranch};
    let em = EMFieldSet::free(grid, m);
    let u = free_eigenspinor(0.0, m, EnergyBranch::Positive, spin_up());
    let mut psi0 = SpinorField::zeros(grid);
    for j in 0..grid.n_points {
        psi0.set_value(j, u);
    }
    psi0.normalize();
    let t_span = boost.gamma * boost.beta.abs() * grid.length() + 4.0;
    let steps = (t_span / grid.dt).ceil() as usize;
    let config = EvolveConfig::new(grid.dt, steps, 1);
    let traj = evolve(&psi0, &em, gammas, &config)?;
    let interp = FrameInterpolator::new(&traj.frames)?;
    // the preimage of the slice spans [gamma t', gamma t' + gamma beta L];
    // anchor it just inside the covered window
    let t_prime = 2.0 / boost.gamma;
    let slice = boost_slice(&interp, boost, t_prime)?;
    // closed form: rest wave boosted to momentum -gamma beta m
    let kp = -boost.gamma * boost.beta * m;
    let ep = dispersion(kp, m);
    let up = free_eigenspinor(kp, m, EnergyBranch::Positive, spin_up());
    // the boosted density is gamma rho (length contraction), so the
    // amplitude carries sqrt(gamma)
    let amp = (psi0.rho()[0]).sqrt() * boost.gamma.sqrt();
    let mut worst = 0.0_f64;
    for j in 0..grid.n_points {
        let phase = C64::new(0.0, kp * grid.z(j) - ep * t_prime).exp();
        let v = slice.value_at(j);
        for a in 0..4 {
            worst = worst.max((v[a] - up[a] * phase * amp).norm());
        }
    }
    Ok(worst / amp)
}
