//! Extraction of the hydrodynamic variables from spinor slices and the
//! derived conservation / force-balance diagnostics.
//!
//! The polar decomposition pairs component a with its chi^0 partner
//! (1<->3, 2<->4). Spatial derivatives of log-amplitude and action are
//! never taken on the unwrapped fields (branch seams would ring); they use
//! the exact bilinear forms
//!
//!   d(ln R_a)/dz = Re[conj(Psi_a) Psi_a'] / R_a^2
//!   d(S_a)/dz    = Im[conj(Psi_a) Psi_a'] / R_a^2
//!   d2(S_a)/dz2  = Im[conj(Psi_a) Psi_a''] / R_a^2 - 2 d(lnR_a) d(S_a)
//!
//! with Psi', Psi'' spectral. Time derivatives come from central
//! differences over recorded frames.

use crate::algebra::C64;
use crate::em::EMFieldSet;
use crate::error::{QhdError, Result};
use crate::field::SpinorField;
use crate::gamma::{partner, GammaSet, Representation};
use crate::grid::GridSpec;
use crate::phase::unwrap_1d;
use crate::spectral::Spectral;

/// Relative amplitude threshold below which a component is node-masked.
pub const NODE_EPS_REL: f64 = 1e-8;

/// One time slice of extracted hydrodynamic fields.
#[derive(Debug, Clone)]
pub struct HydroFrame {
    pub grid: GridSpec,
    pub time_stamp: f64,
    /// Amplitudes R_a = |Psi_a|.
    pub r: [Vec<f64>; 4],
    /// Unwrapped actions S_a = hbar arg Psi_a (diagnostic; derivatives use
    /// the bilinear fields below).
    pub s: [Vec<f64>; 4],
    /// Branch seams recorded by the unwrapper, per component.
    pub seams: [Vec<usize>; 4],
    pub winding: [i64; 4],
    /// Per-component node mask: R_a >= NODE_EPS_REL * max R_a.
    pub mask: [Vec<bool>; 4],
    /// rho = sum_a R_a^2.
    pub rho: Vec<f64>,
    /// J^0 = c rho.
    pub j0: Vec<f64>,
    /// J^3 = c Psi^dag alpha^3 Psi.
    pub j3: Vec<f64>,
    /// q-dot = J^3 / rho on the velocity mask.
    pub qdot: Vec<f64>,
    pub vel_mask: Vec<bool>,
    /// ln(R_a / R_abar) where both pair members are valid.
    pub logratio: [Vec<f64>; 4],
    /// Pair masks, pairs (1,3) and (2,4) stored as indices 0 and 1.
    pub pair_mask: [Vec<bool>; 2],
    /// Pair momenta p = (grad S_a + grad S_abar)/2.
    pub p_pair: [Vec<f64>; 2],
    /// d/dz of the pair momenta.
    pub grad_p_pair: [Vec<f64>; 2],
    /// Exact spatial derivatives per component.
    pub grad_ln_r: [Vec<f64>; 4],
    pub grad_s: [Vec<f64>; 4],
    pub grad2_s: [Vec<f64>; 4],
    pub grad_rho: Vec<f64>,
    pub grad_j3: Vec<f64>,
    /// Psi^dag chi^0 Psi / rho.
    pub chi0_sandwich: Vec<f64>,
    /// cos((S_a - S_abar)/hbar) per pair, from the bilinear.
    pub pair_cos: [Vec<f64>; 2],
    /// Diagonal of alpha^3, fixing the pair sign conventions.
    alpha_diag: [f64; 4],
}

/// Representative component index of each pair.
pub const PAIR_LEAD: [usize; 2] = [0, 1];

impl HydroFrame {
    /// Extract every single-slice hydrodynamic field from a spinor slice.
    /// The pairing structure presumes the chiral block form.
    pub fn from_spinor(psi: &SpinorField, gammas: &GammaSet, sp: &Spectral) -> Result<Self> {
        gammas.require(Representation::ChiralAsPaper, "hydrodynamic extraction")?;
        let n = psi.n_points();
        let grid = psi.grid;

        let alpha3 = gammas.alpha3();
        let mut alpha_diag = [0.0; 4];
        for (a, d) in alpha_diag.iter_mut().enumerate() {
            *d = alpha3.m[a][a].re;
        }

        let dpsi: [Vec<C64>; 4] = std::array::from_fn(|a| sp.derivative(&psi.comps[a]));
        let d2psi: [Vec<C64>; 4] = std::array::from_fn(|a| sp.second_derivative(&psi.comps[a]));

        // amplitudes, masks, unwrapped actions
        let r: [Vec<f64>; 4] =
            std::array::from_fn(|a| psi.comps[a].iter().map(|v| v.norm()).collect());
        let mut mask: [Vec<bool>; 4] = std::array::from_fn(|_| vec![false; n]);
        for a in 0..4 {
            let rmax = r[a].iter().cloned().fold(0.0_f64, f64::max);
            let floor = NODE_EPS_REL * rmax;
            for j in 0..n {
                mask[a][j] = rmax > 0.0 && r[a][j] >= floor;
            }
        }
        let mut s: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        let mut seams: [Vec<usize>; 4] = std::array::from_fn(|_| Vec::new());
        let mut winding = [0i64; 4];
        for a in 0..4 {
            let phases: Vec<f64> = psi.comps[a].iter().map(|v| v.arg()).collect();
            let unwrapped = unwrap_1d(&phases, &mask[a]);
            s[a] = unwrapped.values; // hbar = 1: S = phase
            seams[a] = unwrapped.seams;
            winding[a] = unwrapped.winding;
        }

        // densities and currents
        let rho = psi.rho();
        let rho_max = rho.iter().cloned().fold(0.0_f64, f64::max);
        let amax = r
            .iter()
            .flat_map(|c| c.iter().cloned())
            .fold(0.0_f64, f64::max);
        let rho_floor = (NODE_EPS_REL * amax) * (NODE_EPS_REL * amax);
        let j0 = rho.clone();
        let mut j3 = vec![0.0; n];
        for a in 0..4 {
            for j in 0..n {
                j3[j] += alpha_diag[a] * r[a][j] * r[a][j];
            }
        }
        let mut qdot = vec![0.0; n];
        let mut vel_mask = vec![false; n];
        for j in 0..n {
            if rho_max > 0.0 && rho[j] >= rho_floor {
                vel_mask[j] = true;
                qdot[j] = j3[j] / rho[j];
            }
        }

        // bilinear derivatives
        let mut grad_ln_r: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        let mut grad_s: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        let mut grad2_s: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        for a in 0..4 {
            for j in 0..n {
                if !mask[a][j] {
                    continue;
                }
                let v = psi.comps[a][j];
                let dv = dpsi[a][j];
                let ddv = d2psi[a][j];
                let r2 = r[a][j] * r[a][j];
                let bil = v.conj() * dv;
                grad_ln_r[a][j] = bil.re / r2;
                grad_s[a][j] = bil.im / r2;
                grad2_s[a][j] =
                    (v.conj() * ddv).im / r2 - 2.0 * grad_ln_r[a][j] * grad_s[a][j];
            }
        }
        let mut grad_rho = vec![0.0; n];
        let mut grad_j3 = vec![0.0; n];
        for a in 0..4 {
            for j in 0..n {
                let d = 2.0 * (psi.comps[a][j].conj() * dpsi[a][j]).re;
                grad_rho[j] += d;
                grad_j3[j] += alpha_diag[a] * d;
            }
        }

        // pair structure
        let mut logratio: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        let mut pair_mask: [Vec<bool>; 2] = std::array::from_fn(|_| vec![false; n]);
        let mut p_pair: [Vec<f64>; 2] = std::array::from_fn(|_| vec![0.0; n]);
        let mut grad_p_pair: [Vec<f64>; 2] = std::array::from_fn(|_| vec![0.0; n]);
        let mut pair_cos: [Vec<f64>; 2] = std::array::from_fn(|_| vec![0.0; n]);
        for a in 0..4 {
            let b = partner(a);
            for j in 0..n {
                if mask[a][j] && mask[b][j] {
                    // ln R_a - ln R_b: the partner value is the exact
                    // negation in f64, keeping the antisymmetry sharp
                    logratio[a][j] = r[a][j].ln() - r[b][j].ln();
                }
            }
        }
        for (pair, &a) in PAIR_LEAD.iter().enumerate() {
            let b = partner(a);
            for j in 0..n {
                let valid = mask[a][j] && mask[b][j];
                pair_mask[pair][j] = valid;
                if valid {
                    p_pair[pair][j] = 0.5 * (grad_s[a][j] + grad_s[b][j]);
                    grad_p_pair[pair][j] = 0.5 * (grad2_s[a][j] + grad2_s[b][j]);
                    let cross = psi.comps[a][j] * psi.comps[b][j].conj();
                    pair_cos[pair][j] = cross.re / (r[a][j] * r[b][j]);
                }
            }
        }

        let mut chi0_sandwich = vec![0.0; n];
        for j in 0..n {
            if vel_mask[j] {
                let cross = psi.comps[0][j].conj() * psi.comps[2][j]
                    + psi.comps[1][j].conj() * psi.comps[3][j];
                chi0_sandwich[j] = 2.0 * cross.re / rho[j];
            }
        }

        Ok(Self {
            grid,
            time_stamp: psi.time_stamp,
            r,
            s,
            seams,
            winding,
            mask,
            rho,
            j0,
            j3,
            qdot,
            vel_mask,
            logratio,
            pair_mask,
            p_pair,
            grad_p_pair,
            grad_ln_r,
            grad_s,
            grad2_s,
            grad_rho,
            grad_j3,
            chi0_sandwich,
            pair_cos,
            alpha_diag,
        })
    }

    pub fn charge(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.dx
    }

    /// grad logratio_a = grad ln R_a - grad ln R_abar on the pair mask.
    pub fn grad_logratio(&self, a: usize) -> Vec<f64> {
        let b = partner(a);
        let pm = &self.pair_mask[a % 2];
        (0..self.rho.len())
            .map(|j| {
                if pm[j] {
                    self.grad_ln_r[a][j] - self.grad_ln_r[b][j]
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// True where every component clears its node threshold.
    pub fn full_mask(&self) -> Vec<bool> {
        (0..self.rho.len())
            .map(|j| (0..4).all(|a| self.mask[a][j]))
            .collect()
    }

    /// Fraction of grid points where either pair is node-masked.
    pub fn masked_fraction(&self) -> f64 {
        let n = self.rho.len();
        let bad = (0..n)
            .filter(|&j| !(self.pair_mask[0][j] || self.pair_mask[1][j]))
            .count();
        bad as f64 / n as f64
    }

    /// Pair quantum potential of the force law: the single-slice field whose
    /// gradient closes the hydrodynamic force balance,
    ///   V = (c/2) d/dz (alpha_a S_a + alpha_b S_b) + m c^2 cos(dS) cosh(lnratio)
    ///       - qdot (p - eA).
    /// Derived from the exact phase-sector equations of the pair.
    pub fn pair_quantum_potential(&self, pair: usize, em: &EMFieldSet) -> Vec<f64> {
        let a = PAIR_LEAD[pair];
        let b = partner(a);
        let n = self.rho.len();
        let mut out = vec![0.0; n];
        for j in 0..n {
            if !(self.pair_mask[pair][j] && self.vel_mask[j]) {
                continue;
            }
            let grad_alpha_s =
                self.alpha_diag[a] * self.grad_s[a][j] + self.alpha_diag[b] * self.grad_s[b][j];
            let cosh_l = 0.5
                * (self.r[a][j] / self.r[b][j] + self.r[b][j] / self.r[a][j]);
            let mass_term = em.m * self.pair_cos[pair][j] * cosh_l;
            out[j] = 0.5 * grad_alpha_s + mass_term
                - self.qdot[j] * (self.p_pair[pair][j] - em.e * em.a[j]);
        }
        out
    }
}

/// Polar decomposition alone: (R, S, mask) per component.
pub fn decompose(psi: &SpinorField) -> ([Vec<f64>; 4], [Vec<f64>; 4], [Vec<bool>; 4]) {
    let n = psi.n_points();
    let r: [Vec<f64>; 4] =
        std::array::from_fn(|a| psi.comps[a].iter().map(|v| v.norm()).collect());
    let mut mask: [Vec<bool>; 4] = std::array::from_fn(|_| vec![false; n]);
    let mut s: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    for a in 0..4 {
        let rmax = r[a].iter().cloned().fold(0.0_f64, f64::max);
        let floor = NODE_EPS_REL * rmax;
        for j in 0..n {
            mask[a][j] = rmax > 0.0 && r[a][j] >= floor;
        }
        let phases: Vec<f64> = psi.comps[a].iter().map(|v| v.arg()).collect();
        s[a] = unwrap_1d(&phases, &mask[a]).values;
    }
    (r, s, mask)
}

/// Convention bookkeeping for the quantum-potential bracket: the source
/// formula carries a 1/i in front of the real bracket; the stored field is
/// the real -(hbar/2) B form, and the complex form is reconstructed where a
/// Hamiltonian term needs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VquConvention {
    RealHalfHbar,
}

/// The bracket fields B_a = qdot grad(logratio_a) + d/dt logratio_a and the
/// derived quantum-potential fields.
#[derive(Debug, Clone)]
pub struct QuantumPotential {
    pub b: [Vec<f64>; 4],
    /// V_qu,a = -(hbar/2) B_a under the stored convention.
    pub vqu: [Vec<f64>; 4],
    /// I-contraction sum_a B_a (a numerical null by pair antisymmetry).
    pub contraction: Vec<f64>,
    pub mask: [Vec<bool>; 4],
    pub convention: VquConvention,
}

/// Central-difference bracket from three consecutive frames.
pub fn quantum_potential(
    prev: &HydroFrame,
    cur: &HydroFrame,
    next: &HydroFrame,
) -> Result<QuantumPotential> {
    let n = cur.rho.len();
    if prev.rho.len() != n || next.rho.len() != n {
        return Err(QhdError::GridMismatch {
            left: format!("{n} points"),
            right: format!("{} / {} points", prev.rho.len(), next.rho.len()),
        });
    }
    let dt2 = next.time_stamp - prev.time_stamp;
    if !(dt2 > 0.0) {
        return Err(QhdError::InsufficientFrames { needed: 3, got: 1 });
    }
    let mut b: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    let mut mask: [Vec<bool>; 4] = std::array::from_fn(|_| vec![false; n]);
    for a in 0..4 {
        let pair = a % 2;
        let grad_lr = cur.grad_logratio(a);
        for j in 0..n {
            let valid = cur.pair_mask[pair][j]
                && prev.pair_mask[pair][j]
                && next.pair_mask[pair][j]
                && cur.vel_mask[j];
            mask[a][j] = valid;
            if valid {
                let ddt = (next.logratio[a][j] - prev.logratio[a][j]) / dt2;
                b[a][j] = cur.qdot[j] * grad_lr[j] + ddt;
            }
        }
    }
    let vqu: [Vec<f64>; 4] =
        std::array::from_fn(|a| b[a].iter().map(|&v| -0.5 * v).collect());
    let mut contraction = vec![0.0; n];
    for j in 0..n {
        if (0..4).all(|a| mask[a][j]) {
            contraction[j] = b[0][j] + b[1][j] + b[2][j] + b[3][j];
        }
    }
    Ok(QuantumPotential {
        b,
        vqu,
        contraction,
        mask,
        convention: VquConvention::RealHalfHbar,
    })
}

/// The bracket term applied to the spinor under the source 1/i convention,
/// -(hbar/2i) B_a Psi_a = +(i/2) B_a Psi_a. The nonlinear variant negates
/// this term to subtract the quantum potential.
pub fn bracket_applied(qp: &QuantumPotential, psi: &SpinorField) -> [Vec<C64>; 4] {
    std::array::from_fn(|a| {
        psi.comps[a]
            .iter()
            .zip(qp.b[a].iter())
            .map(|(v, &bb)| C64::new(0.0, 0.5 * bb) * v)
            .collect()
    })
}

/// Discrete continuity residual d rho/dt + d J^3/dz on three frames.
pub fn continuity_residual(
    prev: &HydroFrame,
    cur: &HydroFrame,
    next: &HydroFrame,
) -> Vec<f64> {
    let dt2 = next.time_stamp - prev.time_stamp;
    (0..cur.rho.len())
        .map(|j| (next.rho[j] - prev.rho[j]) / dt2 + cur.grad_j3[j])
        .collect()
}

/// Pointwise hydrodynamic Hamiltonian density
/// qdot (p - eA) + (Psi^dag chi^0 Psi / rho) m c^2 + eW, with the pair
/// momenta combined rho-weighted.
pub fn hamiltonian_density(frame: &HydroFrame, em: &EMFieldSet) -> Vec<f64> {
    let n = frame.rho.len();
    let mut out = vec![0.0; n];
    for j in 0..n {
        if !frame.vel_mask[j] {
            continue;
        }
        let rho13 = frame.r[0][j] * frame.r[0][j] + frame.r[2][j] * frame.r[2][j];
        let rho24 = frame.r[1][j] * frame.r[1][j] + frame.r[3][j] * frame.r[3][j];
        let mut p = 0.0;
        let mut wsum = 0.0;
        if frame.pair_mask[0][j] {
            p += rho13 * frame.p_pair[0][j];
            wsum += rho13;
        }
        if frame.pair_mask[1][j] {
            p += rho24 * frame.p_pair[1][j];
            wsum += rho24;
        }
        if wsum > 0.0 {
            p /= wsum;
        }
        out[j] = frame.qdot[j] * (p - em.e * em.a[j])
            + frame.chi0_sandwich[j] * em.m
            + em.e * em.w[j];
    }
    out
}

/// 4th-order centered first derivative restricted to fully valid stencils.
fn fd4_masked(values: &[f64], valid: &[bool], dx: f64) -> (Vec<f64>, Vec<bool>) {
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut ok = vec![false; n];
    for j in 0..n {
        let idx = |off: i64| -> usize { ((j as i64 + off).rem_euclid(n as i64)) as usize };
        let stencil = [idx(-2), idx(-1), idx(1), idx(2)];
        if valid[j] && stencil.iter().all(|&i| valid[i]) {
            out[j] = (values[stencil[0]] - 8.0 * values[stencil[1]] + 8.0 * values[stencil[2]]
                - values[stencil[3]])
                / (12.0 * dx);
            ok[j] = true;
        }
    }
    (out, ok)
}

#[derive(Debug, Clone)]
pub struct ForceBalanceRow {
    pub t: f64,
    pub l2_residual: [f64; 2],
    pub max_residual: [f64; 2],
}

/// Residual report of the hydrodynamic force law and the cross-check of the
/// quantum-force route against the assembled left-hand side.
#[derive(Debug, Clone)]
pub struct ForceBalanceReport {
    pub per_frame: Vec<ForceBalanceRow>,
    /// Aggregate L2 residual per pair over all interior frames.
    pub l2_residual: [f64; 2],
    pub max_residual: [f64; 2],
    /// Relative agreement between (lhs - em force - convective) and the
    /// -grad V_qu route, per pair.
    pub qforce_match_rel: [f64; 2],
}

/// Check d(p - eA)/dt = -e (grad W + dA/dt) - (grad qdot)(p - eA) - grad V
/// per pair over the interior recorded frames. The electric-force term is
/// assembled from the potentials; with E = -grad W - dA/dt this is +eE.
pub fn force_balance(frames: &[HydroFrame], em: &EMFieldSet) -> Result<ForceBalanceReport> {
    if frames.len() < 3 {
        return Err(QhdError::InsufficientFrames {
            needed: 3,
            got: frames.len(),
        });
    }
    let grid = frames[0].grid;
    let sp = Spectral::new(&grid);
    let grad_w = em.grad_w(&sp);
    let grad_a = em.grad_a(&sp);
    let dx = grid.dx;
    let mut per_frame = Vec::new();
    let mut agg_l2 = [0.0_f64; 2];
    let mut agg_max = [0.0_f64; 2];
    let mut match_num = [0.0_f64; 2];
    let mut match_den = [0.0_f64; 2];
    for i in 1..frames.len() - 1 {
        let (prev, cur, next) = (&frames[i - 1], &frames[i], &frames[i + 1]);
        let dt2 = next.time_stamp - prev.time_stamp;
        let mut row = ForceBalanceRow {
            t: cur.time_stamp,
            l2_residual: [0.0; 2],
            max_residual: [0.0; 2],
        };
        for pair in 0..2 {
            let v = cur.pair_quantum_potential(pair, em);
            let valid: Vec<bool> = (0..cur.rho.len())
                .map(|j| {
                    cur.pair_mask[pair][j]
                        && prev.pair_mask[pair][j]
                        && next.pair_mask[pair][j]
                        && cur.vel_mask[j]
                })
                .collect();
            let (grad_v, grad_ok) = fd4_masked(&v, &valid, dx);
            let (grad_u, _) = fd4_masked(&cur.qdot, &cur.vel_mask, dx);
            let mut sumsq = 0.0;
            let mut count = 0usize;
            for j in 0..cur.rho.len() {
                if !(valid[j] && grad_ok[j]) {
                    continue;
                }
                let kin = cur.p_pair[pair][j] - em.e * em.a[j];
                let dpdt = (next.p_pair[pair][j] - prev.p_pair[pair][j]) / dt2
                    - em.e * em.a_dot[j];
                let lhs = dpdt
                    + cur.qdot[j] * (cur.grad_p_pair[pair][j] - em.e * grad_a[j]);
                let em_force = -em.e * (grad_w[j] + em.a_dot[j]);
                let convective = -grad_u[j] * kin;
                let residual = lhs - em_force - convective + grad_v[j];
                sumsq += residual * residual;
                count += 1;
                row.max_residual[pair] = row.max_residual[pair].max(residual.abs());
                let qforce_lhs = lhs - em_force - convective;
                match_num[pair] += (qforce_lhs + grad_v[j]).powi(2);
                match_den[pair] += grad_v[j] * grad_v[j];
            }
            if count > 0 {
                row.l2_residual[pair] = (sumsq * dx).sqrt();
            }
            agg_l2[pair] = agg_l2[pair].max(row.l2_residual[pair]);
            agg_max[pair] = agg_max[pair].max(row.max_residual[pair]);
        }
        per_frame.push(row);
    }
    let qforce_match_rel = [0, 1].map(|p| {
        if match_den[p] > 0.0 {
            (match_num[p] / match_den[p]).sqrt()
        } else {
            0.0
        }
    });
    Ok(ForceBalanceReport {
        per_frame,
        l2_residual: agg_l2,
        max_residual: agg_max,
        qforce_match_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::EMFieldSet;
    use crate::evolve::{evolve, EvolveConfig};
    use crate::field::{
        dispersion, free_eigenspinor, packet_with_spinor, positive_branch_packet, spin_up,
        EnergyBranch, SpinorField,
    };
    use crate::gamma::build_gammas;
    use crate::grid::GridSpec;

    fn setup(n: usize, dx: f64, dt: f64) -> (GridSpec, EMFieldSet, GammaSet, Spectral) {
        let grid = GridSpec::new(n, dx, dt).unwrap();
        let em = EMFieldSet::free(grid, 1.0);
        let gammas = build_gammas(Representation::ChiralAsPaper);
        let sp = Spectral::new(&grid);
        (grid, em, gammas, sp)
    }

    fn lattice_k(grid: &GridSpec, modes: i64) -> f64 {
        2.0 * std::f64::consts::PI / grid.length() * modes as f64
    }

    fn plane_wave(grid: GridSpec, k: f64, m: f64) -> SpinorField {
        let u = free_eigenspinor(k, m, EnergyBranch::Positive, spin_up());
        let mut psi = SpinorField::zeros(grid);
        for j in 0..grid.n_points {
            let phase = C64::new(0.0, k * grid.z(j)).exp();
            psi.set_value(j, [u[0] * phase, u[1] * phase, u[2] * phase, u[3] * phase]);
        }
        psi.normalize();
        psi
    }

    #[test]
    fn uniform_phase_decomposes_cleanly() {
        let (grid, ..) = setup(64, 0.5, 0.05);
        let mut psi = SpinorField::zeros(grid);
        let val = C64::new(0.3, 0.0) * C64::new(0.0, 0.77).exp();
        for j in 0..grid.n_points {
            psi.set_value(j, [val, val, val, val]);
        }
        let (r, s, mask) = decompose(&psi);
        for a in 0..4 {
            for j in 0..grid.n_points {
                assert!(mask[a][j]);
                assert!((r[a][j] - 0.3).abs() < 1e-14);
                assert!((s[a][j] - 0.77).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_component_is_fully_masked_without_nans() {
        let (grid, _, gammas, sp) = setup(64, 0.5, 0.05);
        let mut psi = SpinorField::zeros(grid);
        for j in 0..grid.n_points {
            let g = (-((grid.z(j) - 16.0) / 3.0).powi(2)).exp();
            psi.set_value(j, [C64::new(g, 0.0), C64::new(0.0, 0.0), C64::new(g, 0.0), C64::new(0.0, 0.0)]);
        }
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        assert!(frame.mask[1].iter().all(|&m| !m));
        assert!(frame.mask[3].iter().all(|&m| !m));
        for field in [&frame.s[1], &frame.logratio[1], &frame.grad_s[1]] {
            assert!(field.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn winding_plane_wave_spans_kl_with_one_seam() {
        // derived oracle: unwrapped S equals the cumulative integral of the
        // spectral phase gradient
        let (grid, _, gammas, sp) = setup(128, 0.5, 0.05);
        let k = lattice_k(&grid, 3);
        let psi = plane_wave(grid, k, 1.0);
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        assert_eq!(frame.winding[0], 3);
        assert_eq!(frame.seams[0], vec![0]);
        let span = frame.s[0][grid.n_points - 1] - frame.s[0][0];
        let expected = k * (grid.length() - grid.dx);
        assert!((span - expected).abs() < 1e-9, "span {span} vs {expected}");
        // cumulative integral of grad S (trapezoid) reproduces the unwrap
        let mut acc = frame.s[0][0];
        for j in 1..grid.n_points {
            acc += 0.5 * (frame.grad_s[0][j - 1] + frame.grad_s[0][j]) * grid.dx;
            assert!((acc - frame.s[0][j]).abs() < 1e-8, "at {j}");
        }
    }

    #[test]
    fn current_of_plane_wave_matches_group_velocity() {
        let (grid, _, gammas, sp) = setup(128, 0.5, 0.05);
        let k = lattice_k(&grid, 5);
        let psi = plane_wave(grid, k, 1.0);
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        let expected = k / dispersion(k, 1.0);
        for j in (0..grid.n_points).step_by(17) {
            assert!((frame.qdot[j] - expected).abs() < 1e-12);
            assert!((frame.j0[j] - frame.rho[j]).abs() == 0.0);
        }
    }

    #[test]
    fn rest_spinor_has_zero_current() {
        let (grid, _, gammas, sp) = setup(64, 0.5, 0.05);
        let psi = plane_wave(grid, 0.0, 1.0);
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        for j in 0..grid.n_points {
            assert!(frame.j3[j].abs() < 1e-14);
            assert!(frame.qdot[j].abs() < 1e-14);
        }
    }

    #[test]
    fn rho_equals_sum_of_squared_amplitudes() {
        let (grid, _, gammas, sp) = setup(128, 0.5, 0.05);
        let psi = packet_with_spinor(
            grid,
            30.0,
            4.0,
            0.4,
            free_eigenspinor(0.3, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        for j in 0..grid.n_points {
            let sum: f64 = (0..4).map(|a| frame.r[a][j] * frame.r[a][j]).sum();
            assert!((frame.rho[j] - sum).abs() < 1e-14);
        }
    }

    #[test]
    fn plane_wave_momentum_is_carrier_in_both_pairs() {
        let (grid, _, gammas, sp) = setup(128, 0.5, 0.05);
        let k = lattice_k(&grid, 4);
        // populate all four components with the same carrier
        let mut psi = SpinorField::zeros(grid);
        for j in 0..grid.n_points {
            let phase = C64::new(0.0, k * grid.z(j)).exp();
            psi.set_value(
                j,
                [
                    phase * C64::new(0.5, 0.0),
                    phase * C64::new(0.4, 0.0),
                    phase * C64::new(0.6, 0.0),
                    phase * C64::new(0.3, 0.0),
                ],
            );
        }
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        for pair in 0..2 {
            for j in (0..grid.n_points).step_by(13) {
                assert!((frame.p_pair[pair][j] - k).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn momentum_ignores_constant_phase_offsets() {
        // gauge property: adding constants to each S_a leaves p unchanged
        let (grid, _, gammas, sp) = setup(128, 0.5, 0.05);
        let psi = packet_with_spinor(
            grid,
            30.0,
            4.0,
            0.5,
            free_eigenspinor(0.5, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let mut shifted = psi.clone();
        let offsets = [0.3, -0.9, 1.7, 0.2];
        for a in 0..4 {
            let ph = C64::new(0.0, offsets[a]).exp();
            for v in shifted.comps[a].iter_mut() {
                *v *= ph;
            }
        }
        let f0 = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        let f1 = HydroFrame::from_spinor(&shifted, &gammas, &sp).unwrap();
        // compare on the packet bulk; below ~1e-3 of the peak the amplitude
        // division amplifies f64 noise past any fixed tolerance
        for pair in 0..2 {
            let a = PAIR_LEAD[pair];
            let b = partner(a);
            let rmax =
                f0.r[a].iter().chain(f0.r[b].iter()).cloned().fold(0.0_f64, f64::max);
            for j in 0..grid.n_points {
                if f0.r[a][j] > 1e-3 * rmax && f0.r[b][j] > 1e-3 * rmax {
                    assert!((f0.p_pair[pair][j] - f1.p_pair[pair][j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn packet_momentum_matches_relativistic_centroid_momentum() {
        // oracle: track the packet centroid over the run; the momentum
        // field at the packet center must equal m v / sqrt(1 - v^2) of the
        // measured centroid velocity within 2% at v = 0.3 c
        let (grid, em, gammas, sp) = setup(512, 0.25, 0.0125);
        let v_target = 0.3_f64;
        let k0 = v_target / (1.0 - v_target * v_target).sqrt();
        let psi = positive_branch_packet(
            grid,
            1.0,
            grid.length() / 4.0,
            6.0,
            k0,
            spin_up(),
            &gammas,
            &sp,
        )
        .unwrap();
        let t_final = 20.0;
        let steps = (t_final / grid.dt).round() as usize;
        let config = EvolveConfig::new(grid.dt, steps, steps);
        let traj = evolve(&psi, &em, &gammas, &config).unwrap();
        let times: Vec<f64> = traj.series.iter().map(|r| r.t).collect();
        let zs: Vec<f64> = traj.series.iter().map(|r| r.mean_z).collect();
        let zs = crate::analysis::unwrap_periodic_series(&zs, grid.length());
        let (v_meas, _) = crate::analysis::linear_fit(&times, &zs);
        let frame = HydroFrame::from_spinor(traj.frames.last().unwrap(), &gammas, &sp).unwrap();
        let jc = (frame.rho
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap())
        .0;
        let p_center = frame.p_pair[0][jc];
        let p_expected = em.m * v_meas / (1.0 - v_meas * v_meas).sqrt();
        assert!(
            ((p_center - p_expected) / p_expected).abs() < 0.02,
            "p at centroid {p_center} vs relativistic m gamma v {p_expected}"
        );
    }

    #[test]
    fn logratio_pairs_are_exactly_antisymmetric() {
        let (grid, _, gammas, sp) = setup(128, 0.5, 0.05);
        let psi = packet_with_spinor(
            grid,
            30.0,
            4.0,
            0.5,
            free_eigenspinor(0.4, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        for j in 0..grid.n_points {
            assert_eq!(frame.logratio[0][j], -frame.logratio[2][j]);
            assert_eq!(frame.logratio[1][j], -frame.logratio[3][j]);
        }
    }

    #[test]
    fn velocity_is_subluminal_on_valid_mask() {
        let (grid, em, gammas, sp) = setup(256, 0.25, 0.02);
        let psi = positive_branch_packet(grid, 1.0, 32.0, 3.0, 0.8, spin_up(), &gammas, &sp)
            .unwrap();
        let config = EvolveConfig::new(grid.dt, 200, 50);
        let traj = evolve(&psi, &em, &gammas, &config).unwrap();
        for f in &traj.frames {
            let frame = HydroFrame::from_spinor(f, &gammas, &sp).unwrap();
            for j in 0..grid.n_points {
                if frame.vel_mask[j] {
                    assert!(frame.qdot[j].abs() <= 1.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn quantum_potential_vanishes_for_plane_wave_and_contracts_to_null() {
        let (grid, em, gammas, sp) = setup(128, 0.5, 0.02);
        let k = lattice_k(&grid, 4);
        let psi = plane_wave(grid, k, 1.0);
        let config = EvolveConfig::new(grid.dt, 2, 1);
        let traj = evolve(&psi, &em, &gammas, &config).unwrap();
        let frames: Vec<_> = traj
            .frames
            .iter()
            .map(|f| HydroFrame::from_spinor(f, &gammas, &sp).unwrap())
            .collect();
        let qp = quantum_potential(&frames[0], &frames[1], &frames[2]).unwrap();
        for a in 0..4 {
            for j in 0..grid.n_points {
                assert!(qp.b[a][j].abs() < 1e-10, "B[{a}][{j}] = {}", qp.b[a][j]);
                assert!((qp.vqu[a][j] + 0.5 * qp.b[a][j]).abs() == 0.0);
            }
        }
        assert!(qp.contraction.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn contraction_is_exact_null_on_gaussian_trajectory() {
        let (grid, em, gammas, sp) = setup(128, 0.5, 0.05);
        let psi = packet_with_spinor(
            grid,
            32.0,
            4.0,
            0.3,
            free_eigenspinor(0.3, 1.0, EnergyBranch::Positive, spin_up()),
        );
        let config = EvolveConfig::new(grid.dt, 2, 1);
        let traj = evolve(&psi, &em, &gammas, &config).unwrap();
        let frames: Vec<_> = traj
            .frames
            .iter()
            .map(|f| HydroFrame::from_spinor(f, &gammas, &sp).unwrap())
            .collect();
        let qp = quantum_potential(&frames[0], &frames[1], &frames[2]).unwrap();
        let max_b = qp
            .b
            .iter()
            .flat_map(|c| c.iter().map(|v| v.abs()))
            .fold(0.0_f64, f64::max);
        let max_contraction = qp
            .contraction
            .iter()
            .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
        assert!(max_contraction <= 1e-9 * max_b.max(1e-30));
    }

    #[test]
    fn hamiltonian_density_matches_dispersion() {
        let (grid, em, gammas, sp) = setup(128, 0.5, 0.05);
        let k = lattice_k(&grid, 6);
        let psi = plane_wave(grid, k, 1.0);
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        let h = hamiltonian_density(&frame, &em);
        let expected = dispersion(k, 1.0);
        for j in (0..grid.n_points).step_by(7) {
            assert!((h[j] - expected).abs() < 1e-6, "{} vs {expected}", h[j]);
        }
    }

    #[test]
    fn hamiltonian_density_of_rest_spinor_is_mass() {
        let (grid, em, gammas, sp) = setup(64, 0.5, 0.05);
        let psi = plane_wave(grid, 0.0, 1.0);
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        let h = hamiltonian_density(&frame, &em);
        for j in 0..grid.n_points {
            assert!((h[j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_density_shifts_by_uniform_potential() {
        let (grid, mut em, gammas, sp) = setup(64, 0.5, 0.05);
        let psi = plane_wave(grid, lattice_k(&grid, 2), 1.0);
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        let h0 = hamiltonian_density(&frame, &em);
        em.w = vec![0.4; grid.n_points];
        let h1 = hamiltonian_density(&frame, &em);
        for j in 0..grid.n_points {
            assert!((h1[j] - h0[j] - 0.4).abs() < 1e-13);
        }
    }

    #[test]
    fn charge_is_conserved_along_trajectory() {
        let (grid, em, gammas, sp) = setup(256, 0.25, 0.025);
        let psi = positive_branch_packet(grid, 1.0, 32.0, 3.0, 0.5, spin_up(), &gammas, &sp)
            .unwrap();
        let config = EvolveConfig::new(grid.dt, 500, 100);
        let traj = evolve(&psi, &em, &gammas, &config).unwrap();
        let charges: Vec<f64> = traj
            .frames
            .iter()
            .map(|f| {
                HydroFrame::from_spinor(f, &gammas, &sp)
                    .unwrap()
                    .charge()
            })
            .collect();
        for c in &charges {
            assert!((c - charges[0]).abs() / charges[0] < 1e-10);
        }
    }

    #[test]
    fn continuity_residual_halves_at_second_order() {
        let (grid, em, gammas, sp) = setup(256, 0.25, 0.02);
        let run = |dt: f64| -> f64 {
            let psi =
                positive_branch_packet(grid, 1.0, 32.0, 3.0, 0.4, spin_up(), &gammas, &sp)
                    .unwrap();
            let steps = (1.0 / dt).round() as usize;
            let config = EvolveConfig::new(dt, steps, 1);
            let traj = evolve(&psi, &em, &gammas, &config).unwrap();
            let i = traj.frames.len() / 2;
            let fp = HydroFrame::from_spinor(&traj.frames[i - 1], &gammas, &sp).unwrap();
            let fc = HydroFrame::from_spinor(&traj.frames[i], &gammas, &sp).unwrap();
            let fn_ = HydroFrame::from_spinor(&traj.frames[i + 1], &gammas, &sp).unwrap();
            let res = continuity_residual(&fp, &fc, &fn_);
            crate::analysis::l2_norm(&res, grid.dx)
        };
        let coarse = run(0.02);
        let fine = run(0.01);
        assert!(
            coarse / fine > 3.5,
            "continuity residual should drop ~4x: {coarse} -> {fine}"
        );
    }

    #[test]
    fn force_balance_plane_wave_is_null() {
        let (grid, em, gammas, sp) = setup(128, 0.5, 0.02);
        let psi = plane_wave(grid, lattice_k(&grid, 4), 1.0);
        let config = EvolveConfig::new(grid.dt, 2, 1);
        let traj = evolve(&psi, &em, &gammas, &config).unwrap();
        let frames: Vec<_> = traj
            .frames
            .iter()
            .map(|f| HydroFrame::from_spinor(f, &gammas, &sp).unwrap())
            .collect();
        let report = force_balance(&frames, &em).unwrap();
        for pair in 0..2 {
            assert!(
                report.max_residual[pair] < 1e-10,
                "pair {pair}: {}",
                report.max_residual[pair]
            );
        }
    }

    #[test]
    fn force_balance_residual_converges_under_refinement() {
        let run = |n: usize, dx: f64, dt: f64| -> f64 {
            let (grid, em, gammas, sp) = setup(n, dx, dt);
            let psi =
                positive_branch_packet(grid, 1.0, grid.length() / 2.0, 3.0, 0.3, spin_up(), &gammas, &sp)
                    .unwrap();
            let steps = (0.6 / dt).round() as usize;
            // fixed record_every so the frame interval scales with dt
            let config = EvolveConfig::new(dt, steps, 4);
            let traj = evolve(&psi, &em, &gammas, &config).unwrap();
            let frames: Vec<_> = traj
                .frames
                .iter()
                .map(|f| HydroFrame::from_spinor(f, &gammas, &sp).unwrap())
                .collect();
            force_balance(&frames, &em).unwrap().l2_residual[0]
        };
        let coarse = run(256, 0.25, 0.02);
        let fine = run(512, 0.125, 0.01);
        assert!(
            coarse / fine >= 3.5,
            "force residual should drop >= 3.5x: {coarse} -> {fine}"
        );
    }

    #[test]
    fn quantum_force_route_matches_assembled_residual() {
        let (grid, em, gammas, sp) = setup(512, 0.125, 0.005);
        let psi = positive_branch_packet(grid, 1.0, grid.length() / 2.0, 3.0, 0.3, spin_up(), &gammas, &sp)
            .unwrap();
        let steps = 60;
        let config = EvolveConfig::new(grid.dt, steps, steps / 3);
        let traj = evolve(&psi, &em, &gammas, &config).unwrap();
        let frames: Vec<_> = traj
            .frames
            .iter()
            .map(|f| HydroFrame::from_spinor(f, &gammas, &sp).unwrap())
            .collect();
        let report = force_balance(&frames, &em).unwrap();
        assert!(
            report.qforce_match_rel[0] < 0.02,
            "quantum-force mismatch {}",
            report.qforce_match_rel[0]
        );
    }

    #[test]
    fn too_few_frames_is_an_error() {
        let (grid, em, gammas, sp) = setup(64, 0.5, 0.05);
        let psi = plane_wave(grid, 0.0, 1.0);
        let frame = HydroFrame::from_spinor(&psi, &gammas, &sp).unwrap();
        assert!(matches!(
            force_balance(&[frame.clone(), frame], &em),
            Err(QhdError::InsufficientFrames { .. })
        ));
    }

    #[test]
    fn dirac_representation_is_rejected() {
        let (grid, _, _, sp) = setup(64, 0.5, 0.05);
        let gammas_d = build_gammas(Representation::Dirac);
        let psi = plane_wave(grid, 0.0, 1.0);
        assert!(HydroFrame::from_spinor(&psi, &gammas_d, &sp).is_err());
    }
}
