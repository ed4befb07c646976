//! Nonrelativistic comparator: the block-diagonal Pauli Hamiltonian with
//! the mass phase factored out, spinor-angle decomposition, the continuity
//! velocity including the spin term, the spinless Madelung potential and
//! force law, and the Dirac-vs-Pauli closeness harness.
//!
//! Angle conventions: theta comes from the moduli split
//! |xi_1| = A cos(theta/2), |xi_2| = A sin(theta/2); phi is the phase
//! difference arg xi_1 - arg xi_2 and S_cl the common phase. With these
//! definitions v = (grad S_cl - eA)/m + (hbar/2m) cos(theta) grad(phi) is
//! exactly the probability flux velocity.

use crate::algebra::{spin_rotation, C64, ZERO};
use crate::em::EMFieldSet;
use crate::error::{QhdError, Result};
use crate::evolve::EvolveConfig;
use crate::field::{mean_z_of_density, width_of_density, SpinorField};
use crate::gamma::GammaSet;
use crate::grid::GridSpec;
use crate::hydro::{HydroFrame, NODE_EPS_REL};
use crate::phase::unwrap_1d;
use crate::spectral::Spectral;

/// Two-component Pauli state with the mass phase already factored out.
#[derive(Debug, Clone)]
pub struct PauliState {
    pub grid: GridSpec,
    pub time_stamp: f64,
    pub xi: [Vec<C64>; 2],
    /// Uniform external magnetic vector.
    pub b_ext: [f64; 3],
    /// Magnetic-moment coefficient of the mu sigma.B term; default e/2m
    /// (hbar = 1).
    pub mu: f64,
}

impl PauliState {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.n_points;
        Self {
            grid,
            time_stamp: grid.t0,
            xi: [vec![ZERO; n], vec![ZERO; n]],
            b_ext: [0.0; 3],
            mu: 0.5,
        }
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points
    }

    pub fn rho(&self) -> Vec<f64> {
        (0..self.n_points())
            .map(|j| self.xi[0][j].norm_sqr() + self.xi[1][j].norm_sqr())
            .collect()
    }

    pub fn norm2(&self) -> f64 {
        self.rho().iter().sum::<f64>() * self.grid.dx
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm2().sqrt();
        for comp in self.xi.iter_mut() {
            for v in comp.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.xi
            .iter()
            .all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    pub fn mean_z(&self) -> f64 {
        mean_z_of_density(&self.rho(), &self.grid)
    }

    pub fn width(&self) -> f64 {
        width_of_density(&self.rho(), &self.grid)
    }

    /// Normalized spin expectations (<sigma_x>, <sigma_y>, <sigma_z>).
    pub fn spin_expectation(&self) -> [f64; 3] {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sz = 0.0;
        for j in 0..self.n_points() {
            let (a, b) = (self.xi[0][j], self.xi[1][j]);
            let cross = a.conj() * b;
            sx += 2.0 * cross.re;
            sy += 2.0 * cross.im;
            sz += a.norm_sqr() - b.norm_sqr();
        }
        let n = self.norm2() / self.grid.dx;
        [sx / n, sy / n, sz / n]
    }

    pub fn l2_distance(&self, other: &PauliState) -> Result<f64> {
        self.grid.check_same_layout(&other.grid)?;
        let mut acc = 0.0;
        for c in 0..2 {
            for (x, y) in self.xi[c].iter().zip(other.xi[c].iter()) {
                acc += (x - y).norm_sqr();
            }
        }
        Ok((acc * self.grid.dx).sqrt())
    }
}

/// Spinor-angle decomposition of a Pauli state.
#[derive(Debug, Clone)]
pub struct PauliAngles {
    pub amplitude: Vec<f64>,
    /// Unwrapped common phase (the re-defined classical action, hbar = 1).
    pub action: Vec<f64>,
    pub theta: Vec<f64>,
    /// Unwrapped phase difference arg xi_1 - arg xi_2.
    pub phi: Vec<f64>,
    pub mask: Vec<bool>,
    /// True where both spin components clear the node floor, so theta and
    /// phi are jointly meaningful.
    pub spin_mask: Vec<bool>,
}

impl PauliAngles {
    /// Rebuild the spinor field from the stored angles.
    pub fn reconstruct(&self, grid: GridSpec) -> PauliState {
        let mut out = PauliState::zeros(grid);
        for j in 0..grid.n_points {
            let a = self.amplitude[j];
            let half = 0.5 * self.theta[j];
            let g = self.action[j];
            let p = 0.5 * self.phi[j];
            out.xi[0][j] = C64::new(0.0, g + p).exp() * (a * half.cos());
            out.xi[1][j] = C64::new(0.0, g - p).exp() * (a * half.sin());
        }
        out
    }
}

pub fn decompose_angles(state: &PauliState) -> PauliAngles {
    let n = state.n_points();
    let r0: Vec<f64> = state.xi[0].iter().map(|v| v.norm()).collect();
    let r1: Vec<f64> = state.xi[1].iter().map(|v| v.norm()).collect();
    let amplitude: Vec<f64> = (0..n)
        .map(|j| (r0[j] * r0[j] + r1[j] * r1[j]).sqrt())
        .collect();
    let amax = amplitude.iter().cloned().fold(0.0_f64, f64::max);
    let floor = NODE_EPS_REL * amax;
    let mask: Vec<bool> = amplitude.iter().map(|&a| amax > 0.0 && a >= floor).collect();
    let spin_mask: Vec<bool> = (0..n)
        .map(|j| mask[j] && r0[j] >= floor && r1[j] >= floor)
        .collect();
    let theta: Vec<f64> = (0..n).map(|j| 2.0 * r1[j].atan2(r0[j])).collect();
    let phi_raw: Vec<f64> = (0..n)
        .map(|j| (state.xi[0][j] * state.xi[1][j].conj()).arg())
        .collect();
    let phi = unwrap_1d(&phi_raw, &spin_mask).values;
    // common phase from the product xi_1 xi_2 = A^2 cos sin e^{2ig}; the
    // half-angle sign is fixed against the actual spinor pointwise
    let mut action = vec![0.0; n];
    let two_g_raw: Vec<f64> = (0..n)
        .map(|j| (state.xi[0][j] * state.xi[1][j]).arg())
        .collect();
    let two_g = unwrap_1d(&two_g_raw, &spin_mask).values;
    for j in 0..n {
        if !mask[j] {
            continue;
        }
        let mut g = if spin_mask[j] {
            0.5 * two_g[j]
        } else if r0[j] >= floor {
            state.xi[0][j].arg()
        } else {
            state.xi[1][j].arg()
        };
        // resolve the pi ambiguity of the half angle
        let probe = if r0[j] >= r1[j] {
            state.xi[0][j] * C64::new(0.0, -(g + 0.5 * phi[j])).exp()
        } else {
            state.xi[1][j] * C64::new(0.0, -(g - 0.5 * phi[j])).exp()
        };
        if probe.re < 0.0 {
            g += std::f64::consts::PI;
        }
        action[j] = g;
    }
    PauliAngles {
        amplitude,
        action,
        theta,
        phi,
        mask,
        spin_mask,
    }
}

/// Pointwise spin direction n = xi^dag sigma xi / xi^dag xi.
pub fn spin_direction(state: &PauliState, j: usize) -> [f64; 3] {
    let (a, b) = (state.xi[0][j], state.xi[1][j]);
    let norm = a.norm_sqr() + b.norm_sqr();
    let cross = a.conj() * b;
    [
        2.0 * cross.re / norm,
        2.0 * cross.im / norm,
        (a.norm_sqr() - b.norm_sqr()) / norm,
    ]
}

/// Cached split factors of the Pauli Hamiltonian
/// H = (1/2m)(p - eA)^2 + eW + mu sigma.B.
pub struct PauliPropagator {
    pub sp: Spectral,
    dt: f64,
    half_pot: Vec<C64>,
    half_spin: crate::algebra::Mat2,
    kinetic: Vec<C64>,
}

impl PauliPropagator {
    pub fn new(state: &PauliState, em: &EMFieldSet, dt: f64) -> Result<Self> {
        state.grid.check_same_layout(&em.grid)?;
        if !em.a_is_uniform() {
            return Err(QhdError::NonUniformVectorPotential);
        }
        let sp = Spectral::new(&state.grid);
        let ea = em.e * em.a[0];
        let half_pot: Vec<C64> = em
            .w
            .iter()
            .map(|&w| C64::new(0.0, -em.e * w * dt / 2.0).exp())
            .collect();
        let b = em.b_ext;
        let half_spin = spin_rotation(
            [state.mu * b[0], state.mu * b[1], state.mu * b[2]],
            dt / 2.0,
        );
        let kinetic: Vec<C64> = sp
            .wavenumbers()
            .iter()
            .map(|&k| {
                let kk = k - ea;
                C64::new(0.0, -kk * kk * dt / (2.0 * em.m)).exp()
            })
            .collect();
        Ok(Self {
            sp,
            dt,
            half_pot,
            half_spin,
            kinetic,
        })
    }

    fn apply_half(&self, state: &mut PauliState) {
        for j in 0..state.n_points() {
            let v = self
                .half_spin
                .apply(&[state.xi[0][j], state.xi[1][j]]);
            let p = self.half_pot[j];
            state.xi[0][j] = v[0] * p;
            state.xi[1][j] = v[1] * p;
        }
    }

    pub fn step(&self, state: &PauliState) -> PauliState {
        let mut out = state.clone();
        self.apply_half(&mut out);
        for c in 0..2 {
            let mut hat = self.sp.forward(&out.xi[c]);
            for (v, k) in hat.iter_mut().zip(self.kinetic.iter()) {
                *v *= k;
            }
            out.xi[c] = self.sp.inverse(&hat);
        }
        self.apply_half(&mut out);
        out.time_stamp = state.time_stamp + self.dt;
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PauliObsRow {
    pub t: f64,
    pub norm: f64,
    pub mean_z: f64,
    pub width: f64,
    pub spin: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct PauliTrajectory {
    pub frames: Vec<PauliState>,
    pub series: Vec<PauliObsRow>,
    pub dt: f64,
    pub record_every: usize,
}

pub fn pauli_step(state: &PauliState, em: &EMFieldSet, dt: f64) -> Result<PauliState> {
    let prop = PauliPropagator::new(state, em, dt)?;
    let out = prop.step(state);
    if !out.is_finite() {
        return Err(QhdError::NanDetected { step: 0 });
    }
    Ok(out)
}

pub fn evolve_pauli(
    state0: &PauliState,
    em: &EMFieldSet,
    config: &EvolveConfig,
) -> Result<PauliTrajectory> {
    let prop = PauliPropagator::new(state0, em, config.dt)?;
    let record_every = config.record_every.max(1);
    let observe = |s: &PauliState| PauliObsRow {
        t: s.time_stamp,
        norm: s.norm2(),
        mean_z: s.mean_z(),
        width: s.width(),
        spin: s.spin_expectation(),
    };
    let mut state = state0.clone();
    let mut frames = vec![state.clone()];
    let mut series = vec![observe(&state)];
    for step_idx in 1..=config.n_steps {
        state = prop.step(&state);
        if !state.is_finite() {
            return Err(QhdError::NanDetected { step: step_idx });
        }
        series.push(observe(&state));
        if step_idx % record_every == 0 {
            frames.push(state.clone());
        }
    }
    Ok(PauliTrajectory {
        frames,
        series,
        dt: config.dt,
        record_every,
    })
}

/// Continuity velocity split into its gradient and spin parts. The total is
/// computed from the exact flux bilinear and equals grad + spin wherever
/// both spin components are valid.
#[derive(Debug, Clone)]
pub struct ContinuityVelocity {
    pub total: Vec<f64>,
    pub grad_part: Vec<f64>,
    pub spin_part: Vec<f64>,
    pub mask: Vec<bool>,
}

pub fn continuity_velocity(
    state: &PauliState,
    em: &EMFieldSet,
    sp: &Spectral,
) -> ContinuityVelocity {
    let n = state.n_points();
    let rho = state.rho();
    let amax = rho.iter().cloned().fold(0.0_f64, f64::max).sqrt();
    let floor2 = (NODE_EPS_REL * amax) * (NODE_EPS_REL * amax);
    let d0 = sp.derivative(&state.xi[0]);
    let d1 = sp.derivative(&state.xi[1]);
    let mut total = vec![0.0; n];
    let mut grad_part = vec![0.0; n];
    let mut spin_part = vec![0.0; n];
    let mut mask = vec![false; n];
    let comp_floor = NODE_EPS_REL
        * state
            .xi
            .iter()
            .flat_map(|c| c.iter().map(|v| v.norm()))
            .fold(0.0_f64, f64::max);
    for j in 0..n {
        if rho[j] < floor2 || rho[j] == 0.0 {
            continue;
        }
        mask[j] = true;
        let flux =
            (state.xi[0][j].conj() * d0[j] + state.xi[1][j].conj() * d1[j]).im;
        total[j] = (flux / rho[j] - em.e * em.a[j]) / em.m;
        let (r0, r1) = (state.xi[0][j].norm(), state.xi[1][j].norm());
        if r0 >= comp_floor && r1 >= comp_floor {
            let s0 = (state.xi[0][j].conj() * d0[j]).im / (r0 * r0);
            let s1 = (state.xi[1][j].conj() * d1[j]).im / (r1 * r1);
            let grad_s = 0.5 * (s0 + s1);
            let grad_phi = s0 - s1;
            let cos_theta = (r0 * r0 - r1 * r1) / (r0 * r0 + r1 * r1);
            grad_part[j] = (grad_s - em.e * em.a[j]) / em.m;
            spin_part[j] = 0.5 * cos_theta * grad_phi / em.m;
        } else {
            // single populated component: all flux is the gradient part
            grad_part[j] = total[j];
        }
    }
    ContinuityVelocity {
        total,
        grad_part,
        spin_part,
        mask,
    }
}

/// Spinless Madelung potential V_q = -(hbar^2/2m) lap(sqrt rho)/sqrt rho.
pub fn madelung_potential(rho: &[f64], m: f64, sp: &Spectral) -> (Vec<f64>, Vec<bool>) {
    let sqrt_rho: Vec<f64> = rho.iter().map(|&r| r.max(0.0).sqrt()).collect();
    let lap = sp.laplacian_real(&sqrt_rho);
    let smax = sqrt_rho.iter().cloned().fold(0.0_f64, f64::max);
    let floor = NODE_EPS_REL * smax;
    let mut out = vec![0.0; rho.len()];
    let mut mask = vec![false; rho.len()];
    for j in 0..rho.len() {
        if smax > 0.0 && sqrt_rho[j] >= floor {
            mask[j] = true;
            out[j] = -lap[j] / (2.0 * m * sqrt_rho[j]);
        }
    }
    (out, mask)
}

#[derive(Debug, Clone)]
pub struct MadelungForceReport {
    pub l2_residual: f64,
    pub max_residual: f64,
    pub per_frame: Vec<(f64, f64)>,
}

/// Residual of the spinless classical force law
/// dv/dt = -(e/m)(grad W + dA/dt) - (1/m) grad V_q
/// with v from [`continuity_velocity`] and material derivatives over the
/// recorded frames. The electric force is assembled from the potentials.
pub fn classical_force_check(
    traj: &PauliTrajectory,
    em: &EMFieldSet,
) -> Result<MadelungForceReport> {
    if traj.frames.len() < 3 {
        return Err(QhdError::InsufficientFrames {
            needed: 3,
            got: traj.frames.len(),
        });
    }
    let grid = traj.frames[0].grid;
    let sp = Spectral::new(&grid);
    let grad_w = em.grad_w(&sp);
    let mut per_frame = Vec::new();
    let mut agg_l2 = 0.0_f64;
    let mut agg_max = 0.0_f64;
    for i in 1..traj.frames.len() - 1 {
        let (prev, cur, next) = (&traj.frames[i - 1], &traj.frames[i], &traj.frames[i + 1]);
        let dt2 = next.time_stamp - prev.time_stamp;
        let vp = continuity_velocity(prev, em, &sp);
        let vc = continuity_velocity(cur, em, &sp);
        let vn = continuity_velocity(next, em, &sp);
        let rho = cur.rho();
        let (vq, vq_mask) = madelung_potential(&rho, em.m, &sp);
        // bulk mask: quantities divided by rho need headroom over the node
        // floor before derivatives are meaningful
        let rmax = rho.iter().cloned().fold(0.0_f64, f64::max);
        let bulk: Vec<bool> = (0..grid.n_points)
            .map(|j| {
                vc.mask[j] && vp.mask[j] && vn.mask[j] && vq_mask[j] && rho[j] >= 1e-8 * rmax
            })
            .collect();
        let dv = fd4_periodic(&vc.total, grid.dx);
        let dvq = fd4_periodic(&vq, grid.dx);
        let mut sumsq = 0.0;
        let mut count = 0usize;
        let mut fmax = 0.0_f64;
        for j in 0..grid.n_points {
            let ok = bulk[j]
                && stencil_ok(&bulk, j, grid.n_points);
            if !ok {
                continue;
            }
            let lhs = (vn.total[j] - vp.total[j]) / dt2 + vc.total[j] * dv[j];
            let rhs = -(em.e / em.m) * (grad_w[j] + em.a_dot[j]) - dvq[j] / em.m;
            let res = lhs - rhs;
            sumsq += res * res;
            count += 1;
            fmax = fmax.max(res.abs());
        }
        let l2 = if count > 0 { (sumsq * grid.dx).sqrt() } else { 0.0 };
        per_frame.push((cur.time_stamp, l2));
        agg_l2 = agg_l2.max(l2);
        agg_max = agg_max.max(fmax);
    }
    Ok(MadelungForceReport {
        l2_residual: agg_l2,
        max_residual: agg_max,
        per_frame,
    })
}

fn fd4_periodic(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|j| {
            let idx = |off: i64| -> usize { ((j as i64 + off).rem_euclid(n as i64)) as usize };
            (values[idx(-2)] - 8.0 * values[idx(-1)] + 8.0 * values[idx(1)] - values[idx(2)])
                / (12.0 * dx)
        })
        .collect()
}

fn stencil_ok(mask: &[bool], j: usize, n: usize) -> bool {
    (-2i64..=2).all(|off| mask[((j as i64 + off).rem_euclid(n as i64)) as usize])
}

/// Gaussian Pauli packet with density std sigma, carrier k0 and spin
/// content xi_spin.
pub fn pauli_packet(
    grid: GridSpec,
    center: f64,
    sigma: f64,
    k0: f64,
    xi_spin: [C64; 2],
) -> PauliState {
    let env = crate::field::gaussian_envelope(&grid, center, sigma, k0);
    let mut out = PauliState::zeros(grid);
    for j in 0..grid.n_points {
        out.xi[0][j] = xi_spin[0] * env[j];
        out.xi[1][j] = xi_spin[1] * env[j];
    }
    out.normalize();
    out
}

/// Embed a Pauli state into the chiral Dirac layout on the positive-energy
/// branch. Returns the projected spinor field and the discarded
/// negative-energy weight.
pub fn dirac_from_pauli(
    state: &PauliState,
    m: f64,
    gammas: &GammaSet,
    sp: &Spectral,
) -> Result<(SpinorField, f64)> {
    let mut naive = SpinorField::zeros(state.grid);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..state.n_points() {
        let (a, b) = (state.xi[0][j], state.xi[1][j]);
        naive.set_value(j, [a * half, b * half, a * half, b * half]);
    }
    let (psi, w_neg) = crate::field::project_positive_branch(&naive, m, 0.0, gammas, sp);
    if w_neg > 1e-3 {
        return Err(QhdError::BranchProjection { weight: w_neg });
    }
    Ok((psi, w_neg))
}

#[derive(Debug, Clone)]
pub struct DiracPauliComparison {
    pub v_over_c: f64,
    pub t_final: f64,
    pub rho_distance: f64,
    pub velocity_distance: f64,
    pub negative_weight: f64,
}

/// Evolve a matched Dirac/Pauli pair at packet velocity v (v/c small) and
/// report L2 distances between the densities and velocity fields at the
/// final time. The Dirac side runs with the mass phase present; densities
/// and velocity fields are phase-insensitive so no explicit removal is
/// needed beyond the Pauli Hamiltonian already lacking the mc^2 term.
pub fn dirac_vs_pauli(
    grid: GridSpec,
    m: f64,
    sigma: f64,
    v_over_c: f64,
    t_final: f64,
    dt: f64,
    gammas: &GammaSet,
) -> Result<DiracPauliComparison> {
    let sp = Spectral::new(&grid);
    let center = grid.length() / 2.0;
    let k0 = m * v_over_c / (1.0 - v_over_c * v_over_c).sqrt();
    let xi_spin = [C64::new(1.0, 0.0), ZERO];
    let pauli0 = pauli_packet(grid, center, sigma, k0, xi_spin);
    let (dirac0, w_neg) = dirac_from_pauli(&pauli0, m, gammas, &sp)?;
    let em = EMFieldSet::free(grid, m);
    let steps = (t_final / dt).round() as usize;
    let config = EvolveConfig::new(dt, steps, steps.max(1));
    let dirac_traj = crate::evolve::evolve(&dirac0, &em, gammas, &config)?;
    let pauli_traj = evolve_pauli(&pauli0, &em, &config)?;
    let dirac_last = dirac_traj.frames.last().unwrap();
    let pauli_last = pauli_traj.frames.last().unwrap();
    let frame = HydroFrame::from_spinor(dirac_last, gammas, &sp)?;
    let rho_d = frame.rho.clone();
    let rho_p = pauli_last.rho();
    let rho_distance = rho_l2_distance(&rho_d, &rho_p, grid.dx);
    let vp = continuity_velocity(pauli_last, &em, &sp);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..grid.n_points {
        if frame.vel_mask[j] && vp.mask[j] && rho_p[j] > 1e-6 * rho_p.iter().cloned().fold(0.0, f64::max) {
            let w = rho_p[j];
            num += w * (frame.qdot[j] - vp.total[j]).powi(2);
            den += w;
        }
    }
    let velocity_distance = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    Ok(DiracPauliComparison {
        v_over_c,
        t_final,
        rho_distance,
        velocity_distance,
        negative_weight: w_neg,
    })
}

pub fn rho_l2_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    (a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        * dx)
        .sqrt()
}
