//! Gamma matrices in the two representations the toolkit uses, plus the
//! unitary change of basis between them.
//!
//! The chiral set has off-diagonal identity blocks in chi^0 and spatial
//! matrices chi^i = [[0, -sigma_i], [sigma_i, 0]]. Entries are exact
//! integers or +/-i, so the anticommutation relations hold with zero
//! tolerance in f64. The Dirac set is the hand-reduced conjugate by
//! U = (1/sqrt2) [[I, I], [I, -I]] and is likewise exact.

use crate::algebra::{pauli, Mat2, Mat4, C64, ONE, ZERO};
use crate::error::{QhdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// Block form with identity off-diagonal chi^0 (the native set here).
    ChiralAsPaper,
    /// chi^0 = diag(1, 1, -1, -1).
    Dirac,
}

/// The four chi matrices plus the precomputed products alpha^i = chi^0 chi^i.
#[derive(Debug, Clone)]
pub struct GammaSet {
    pub chi: [Mat4; 4],
    pub alpha: [Mat4; 3],
    pub representation: Representation,
}

/// Minkowski metric diag(+,-,-,-).
pub fn metric(mu: usize, nu: usize) -> f64 {
    if mu != nu {
        0.0
    } else if mu == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn build_gammas(representation: Representation) -> GammaSet {
    let s = pauli();
    let zero2 = Mat2::new([[ZERO; 2]; 2]);
    let id2 = Mat2::identity();
    let chi = match representation {
        Representation::ChiralAsPaper => {
            let chi0 = Mat4::from_blocks(zero2, id2, id2, zero2);
            let spatial = |sig: Mat2| Mat4::from_blocks(zero2, sig.scale(-ONE), sig, zero2);
            [chi0, spatial(s[0]), spatial(s[1]), spatial(s[2])]
        }
        Representation::Dirac => {
            let chi0 = Mat4::from_blocks(id2, zero2, zero2, id2.scale(-ONE));
            let spatial = |sig: Mat2| Mat4::from_blocks(zero2, sig, sig.scale(-ONE), zero2);
            [chi0, spatial(s[0]), spatial(s[1]), spatial(s[2])]
        }
    };
    let alpha = [
        chi[0].mul(&chi[1]),
        chi[0].mul(&chi[2]),
        chi[0].mul(&chi[3]),
    ];
    GammaSet {
        chi,
        alpha,
        representation,
    }
}

impl GammaSet {
    pub fn chi0(&self) -> &Mat4 {
        &self.chi[0]
    }

    /// alpha^3 = chi^0 chi^3, the kinetic matrix of the 1D Hamiltonian.
    pub fn alpha3(&self) -> &Mat4 {
        &self.alpha[2]
    }

    pub fn require(&self, rep: Representation, what: &str) -> Result<()> {
        if self.representation == rep {
            Ok(())
        } else {
            Err(QhdError::Representation(format!(
                "{what} requires {rep:?}, gamma set is {:?}",
                self.representation
            )))
        }
    }
}

/// Index swapped by chi^0 in the chiral representation: 0<->2, 1<->3.
pub fn partner(component: usize) -> usize {
    (component + 2) % 4
}

/// Unitary taking chiral-representation spinors to Dirac-representation
/// spinors: psi_dirac = U psi_chiral.
pub fn chiral_to_dirac_unitary() -> Mat4 {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let id2 = Mat2::identity().scale(h);
    Mat4::from_blocks(id2, id2, id2, id2.scale(-ONE))
}
