//! Relativistic quantum hydrodynamics on a 1+1D periodic lattice.
//!
//! The crate evolves the Dirac equation with a spectral split-operator
//! scheme, extracts the hydrodynamic variables (amplitudes, actions,
//! currents, velocity, momentum, quantum potential), and exercises three
//! derived regimes: the nonrelativistic Pauli/Madelung limit, a nonlinear
//! variant with the quantum-potential term subtracted, and a stochastic
//! variant driven by a spatially correlated Gaussian noise field. A boost
//! module checks Lorentz covariance of the extracted fields.
//!
//! Units are natural throughout: hbar = c = 1 and the reference mass is 1.
//! SI conversions live in [`units`] and never enter the stepping loops.

pub mod algebra;
pub mod analysis;
pub mod boost;
pub mod em;
pub mod error;
pub mod evolve;
pub mod field;
pub mod gamma;
pub mod grid;
pub mod hydro;
pub mod noise;
pub mod nonlinear;
pub mod pauli;
pub mod phase;
pub mod qhd1;
pub mod report;
pub mod spectral;
pub mod units;

pub use algebra::{C64, Mat2, Mat4, Spinor4};
pub use em::EMFieldSet;
pub use error::{QhdError, Result};
pub use field::{EnergyBranch, SpinorField};
pub use gamma::{build_gammas, GammaSet, Representation};
pub use grid::{Boundary, GridSpec};
pub use spectral::Spectral;
