//! Four-component spinor fields on the lattice: storage, inner products,
//! the minimally-coupled Dirac Hamiltonian, initial-condition builders and
//! packet observables.

use crate::algebra::{C64, Mat4, Spinor4, ONE, ZERO};
use crate::em::EMFieldSet;
use crate::error::{QhdError, Result};
use crate::gamma::{build_gammas, chiral_to_dirac_unitary, GammaSet, Representation};
use crate::grid::GridSpec;
use crate::spectral::Spectral;

/// One time slice of the spinor field Psi.
#[derive(Debug, Clone)]
pub struct SpinorField {
    pub grid: GridSpec,
    pub time_stamp: f64,
    /// Component-major storage: comps[a][j] = Psi_{a+1}(z_j).
    pub comps: [Vec<C64>; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyBranch {
    Positive,
    Negative,
}

impl SpinorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.n_points;
        Self {
            grid,
            time_stamp: grid.t0,
            comps: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
        }
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points
    }

    pub fn value_at(&self, j: usize) -> Spinor4 {
        [
            self.comps[0][j],
            self.comps[1][j],
            self.comps[2][j],
            self.comps[3][j],
        ]
    }

    pub fn set_value(&mut self, j: usize, v: Spinor4) {
        for a in 0..4 {
            self.comps[a][j] = v[a];
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    /// rho(z_j) = sum_a |Psi_a|^2.
    pub fn rho(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_points()];
        for comp in &self.comps {
            for (o, v) in out.iter_mut().zip(comp.iter()) {
                *o += v.norm_sqr();
            }
        }
        out
    }

    /// Integral of rho over the box (Riemann sum, exact for the periodic
    /// trapezoid rule with uniform weights).
    pub fn norm2(&self) -> f64 {
        self.rho().iter().sum::<f64>() * self.grid.dx
    }

    pub fn normalize(&mut self) {
        let n = self.norm2();
        assert!(n > 0.0, "cannot normalize the zero field");
        let s = 1.0 / n.sqrt();
        for comp in self.comps.iter_mut() {
            for v in comp.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for comp in self.comps.iter_mut() {
            for v in comp.iter_mut() {
                *v *= s;
            }
        }
    }

    /// <self, other> = integral of self^dagger other.
    pub fn inner(&self, other: &SpinorField) -> Result<C64> {
        self.grid.check_same_layout(&other.grid)?;
        let mut acc = ZERO;
        for a in 0..4 {
            for (x, y) in self.comps[a].iter().zip(other.comps[a].iter()) {
                acc += x.conj() * y;
            }
        }
        Ok(acc * self.grid.dx)
    }

    pub fn l2_distance(&self, other: &SpinorField) -> Result<f64> {
        self.grid.check_same_layout(&other.grid)?;
        let mut acc = 0.0;
        for a in 0..4 {
            for (x, y) in self.comps[a].iter().zip(other.comps[a].iter()) {
                acc += (x - y).norm_sqr();
            }
        }
        Ok((acc * self.grid.dx).sqrt())
    }

    /// Change of representation: psi' = U psi pointwise.
    pub fn to_representation(&self, target: Representation, current: Representation) -> Self {
        if target == current {
            return self.clone();
        }
        let u = match (current, target) {
            (Representation::ChiralAsPaper, Representation::Dirac) => chiral_to_dirac_unitary(),
            (Representation::Dirac, Representation::ChiralAsPaper) => {
                chiral_to_dirac_unitary().adjoint()
            }
            _ => unreachable!(),
        };
        let mut out = self.clone();
        for j in 0..self.n_points() {
            out.set_value(j, u.apply(&self.value_at(j)));
        }
        out
    }

    /// Density centroid via the circular mean, robust to packets crossing
    /// the periodic seam. Result in [0, L).
    pub fn mean_z(&self) -> f64 {
        mean_z_of_density(&self.rho(), &self.grid)
    }

    /// Density standard deviation about the (circular) centroid, using
    /// minimum-image displacements.
    pub fn width(&self) -> f64 {
        width_of_density(&self.rho(), &self.grid)
    }

    /// <p> = Re integral of psi^dagger (-i d/dz) psi, divided by the norm.
    pub fn mean_momentum(&self, sp: &Spectral) -> f64 {
        let mut acc = 0.0;
        for comp in &self.comps {
            let d = sp.derivative(comp);
            for (v, dv) in comp.iter().zip(d.iter()) {
                acc += (v.conj() * C64::new(0.0, -1.0) * dv).re;
            }
        }
        acc * self.grid.dx / self.norm2()
    }
}

pub fn mean_z_of_density(rho: &[f64], grid: &GridSpec) -> f64 {
    let l = grid.length();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut c = C64::new(0.0, 0.0);
    for (j, &r) in rho.iter().enumerate() {
        let phase = two_pi * grid.z(j) / l;
        c += C64::new(r * phase.cos(), r * phase.sin());
    }
    let mut z = c.arg() * l / two_pi;
    if z < 0.0 {
        z += l;
    }
    z
}

pub fn width_of_density(rho: &[f64], grid: &GridSpec) -> f64 {
    let center = mean_z_of_density(rho, grid);
    let l = grid.length();
    let mut m0 = 0.0;
    let mut m2 = 0.0;
    for (j, &r) in rho.iter().enumerate() {
        let mut d = grid.z(j) - center;
        if d > l / 2.0 {
            d -= l;
        } else if d < -l / 2.0 {
            d += l;
        }
        m0 += r;
        m2 += r * d * d;
    }
    (m2 / m0).sqrt()
}

/// H_D psi = c alpha . ((hbar/i) d/dz - e A) psi + chi^0 m c^2 psi + e W psi,
/// with the spatial derivative taken spectrally on the periodic grid.
pub fn apply_dirac_hamiltonian(
    psi: &SpinorField,
    em: &EMFieldSet,
    gammas: &GammaSet,
    sp: &Spectral,
) -> Result<SpinorField> {
    psi.grid.check_same_layout(&em.grid)?;
    let alpha3 = gammas.alpha3();
    let chi0 = gammas.chi0();
    let deriv: [Vec<C64>; 4] = [
        sp.derivative(&psi.comps[0]),
        sp.derivative(&psi.comps[1]),
        sp.derivative(&psi.comps[2]),
        sp.derivative(&psi.comps[3]),
    ];
    let mut out = SpinorField::zeros(psi.grid);
    out.time_stamp = psi.time_stamp;
    for j in 0..psi.n_points() {
        let v = psi.value_at(j);
        let dv = [deriv[0][j], deriv[1][j], deriv[2][j], deriv[3][j]];
        // (hbar/i) d/dz - eA, per component
        let kin: Spinor4 = [
            C64::new(0.0, -1.0) * dv[0] - em.e * em.a[j] * v[0],
            C64::new(0.0, -1.0) * dv[1] - em.e * em.a[j] * v[1],
            C64::new(0.0, -1.0) * dv[2] - em.e * em.a[j] * v[2],
            C64::new(0.0, -1.0) * dv[3] - em.e * em.a[j] * v[3],
        ];
        let kin = alpha3.apply(&kin);
        let mass = chi0.apply(&v);
        let mut res = [ZERO; 4];
        for a in 0..4 {
            res[a] = kin[a] + em.m * mass[a] + em.e * em.w[j] * v[a];
        }
        out.set_value(j, res);
    }
    Ok(out)
}

/// <psi, H psi> / <psi, psi>.
pub fn mean_energy(
    psi: &SpinorField,
    em: &EMFieldSet,
    gammas: &GammaSet,
    sp: &Spectral,
) -> Result<f64> {
    let hpsi = apply_dirac_hamiltonian(psi, em, gammas, sp)?;
    Ok(psi.inner(&hpsi)?.re / psi.norm2())
}

/// Free-particle dispersion E(k) = sqrt(k^2 + m^2) in natural units.
pub fn dispersion(k: f64, m: f64) -> f64 {
    (k * k + m * m).sqrt()
}

/// Group velocity k c^2 / E(k).
pub fn group_velocity(k: f64, m: f64) -> f64 {
    k / dispersion(k, m)
}

/// k-space free Hamiltonian h(k) = alpha^3 (k - eA) + chi^0 m for a uniform
/// vector potential.
pub fn kspace_hamiltonian(k: f64, m: f64, ea: f64, gammas: &GammaSet) -> Mat4 {
    gammas
        .alpha3()
        .scale(C64::new(k - ea, 0.0))
        .add(&gammas.chi0().scale(C64::new(m, 0.0)))
}

/// Normalized eigenspinor of the free Hamiltonian at wavenumber k for the
/// requested branch, seeded from a Pauli 2-spinor. Paper-chiral layout.
pub fn free_eigenspinor(k: f64, m: f64, branch: EnergyBranch, spin: [C64; 2]) -> Spinor4 {
    let gammas = build_gammas(Representation::ChiralAsPaper);
    let sign = match branch {
        EnergyBranch::Positive => 1.0,
        EnergyBranch::Negative => -1.0,
    };
    // chi^0 eigenvector with eigenvalue `sign`, carrying the spin content
    let seed: Spinor4 = [spin[0], spin[1], sign * spin[0], sign * spin[1]]
        .map(|v| v * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    if k == 0.0 {
        return seed;
    }
    let h = kspace_hamiltonian(k, m, 0.0, &gammas);
    let energy = dispersion(k, m);
    // branch projector (1 + sign h/E)/2
    let proj = Mat4::identity()
        .add(&h.scale(C64::new(sign / energy, 0.0)))
        .scale(C64::new(0.5, 0.0));
    let mut u = proj.apply(&seed);
    let norm: f64 = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    assert!(norm > 0.0, "projector annihilated the seed spinor");
    for v in u.iter_mut() {
        *v /= norm;
    }
    u
}

/// Gaussian envelope with *density* standard deviation `sigma`, carrier k0.
/// The displacement from `center` is taken minimum-image so packets may sit
/// anywhere on the periodic box.
pub fn gaussian_envelope(grid: &GridSpec, center: f64, sigma: f64, k0: f64) -> Vec<C64> {
    let l = grid.length();
    grid.coords()
        .iter()
        .map(|&z| {
            let mut d = z - center;
            if d > l / 2.0 {
                d -= l;
            } else if d < -l / 2.0 {
                d += l;
            }
            let mag = (-d * d / (4.0 * sigma * sigma)).exp();
            mag * C64::new((k0 * z).cos(), (k0 * z).sin())
        })
        .collect()
}

/// Gaussian packet carried by a fixed spinor, normalized to unit charge.
pub fn packet_with_spinor(
    grid: GridSpec,
    center: f64,
    sigma: f64,
    k0: f64,
    spinor: Spinor4,
) -> SpinorField {
    let env = gaussian_envelope(&grid, center, sigma, k0);
    let mut psi = SpinorField::zeros(grid);
    for j in 0..grid.n_points {
        let mut v = [ZERO; 4];
        for a in 0..4 {
            v[a] = spinor[a] * env[j];
        }
        psi.set_value(j, v);
    }
    psi.normalize();
    psi
}

/// Project onto the positive-energy branch mode by mode (free dispersion,
/// uniform eA) and renormalize. Returns the projected field and the weight
/// that was removed.
pub fn project_positive_branch(
    psi: &SpinorField,
    m: f64,
    ea_uniform: f64,
    gammas: &GammaSet,
    sp: &Spectral,
) -> (SpinorField, f64) {
    let hats: [Vec<C64>; 4] = [
        sp.forward(&psi.comps[0]),
        sp.forward(&psi.comps[1]),
        sp.forward(&psi.comps[2]),
        sp.forward(&psi.comps[3]),
    ];
    let n = psi.n_points();
    let mut proj_hats: [Vec<C64>; 4] = [
        vec![ZERO; n],
        vec![ZERO; n],
        vec![ZERO; n],
        vec![ZERO; n],
    ];
    let mut total = 0.0;
    let mut kept = 0.0;
    for (mode, &k) in sp.wavenumbers().iter().enumerate() {
        let h = kspace_hamiltonian(k, m, ea_uniform, gammas);
        let energy = dispersion(k - ea_uniform, m);
        let proj = Mat4::identity()
            .add(&h.scale(C64::new(1.0 / energy, 0.0)))
            .scale(C64::new(0.5, 0.0));
        let v = [hats[0][mode], hats[1][mode], hats[2][mode], hats[3][mode]];
        let pv = proj.apply(&v);
        total += v.iter().map(|x| x.norm_sqr()).sum::<f64>();
        kept += pv.iter().map(|x| x.norm_sqr()).sum::<f64>();
        for a in 0..4 {
            proj_hats[a][mode] = pv[a];
        }
    }
    let mut out = psi.clone();
    for a in 0..4 {
        out.comps[a] = sp.inverse(&proj_hats[a]);
    }
    if out.norm2() > 0.0 {
        out.normalize();
    }
    let negative_weight = if total > 0.0 { 1.0 - kept / total } else { 0.0 };
    (out, negative_weight)
}

/// Gaussian packet built on the positive-energy branch: the naive packet is
/// projected mode by mode so no antiparticle content contaminates packet
/// observables.
pub fn positive_branch_packet(
    grid: GridSpec,
    m: f64,
    center: f64,
    sigma: f64,
    k0: f64,
    spin: [C64; 2],
    gammas: &GammaSet,
    sp: &Spectral,
) -> Result<SpinorField> {
    let seed = free_eigenspinor(0.0, m, EnergyBranch::Positive, spin);
    let naive = packet_with_spinor(grid, center, sigma, k0, seed);
    let (psi, w_neg) = project_positive_branch(&naive, m, 0.0, gammas, sp);
    if w_neg > 0.5 {
        return Err(QhdError::BranchProjection { weight: w_neg });
    }
    Ok(psi)
}

/// Equal superposition of +/- energy rest spinors: an upper-chirality state
/// carrying maximal Zitterbewegung.
pub fn rest_superposition_packet(
    grid: GridSpec,
    center: f64,
    sigma: f64,
    spin: [C64; 2],
) -> SpinorField {
    let spinor: Spinor4 = [spin[0], spin[1], ZERO, ZERO];
    packet_with_spinor(grid, center, sigma, 0.0, spinor)
}

pub fn spin_up() -> [C64; 2] {
    [ONE, ZERO]
}

pub fn spin_down() -> [C64; 2] {
    [ZERO, ONE]
}
