//! Electromagnetic potentials and the couplings of the minimally-coupled
//! Hamiltonian: scalar W, longitudinal A_z on the 1D grid, and a uniform
//! external B used only by the Pauli module.
//!
//! Linear or quadratic W are not periodic; they enter the evolution only as
//! pointwise phase factors, and their gradients are stored analytically so
//! the wrap seam never passes through a derivative. Test packets stay away
//! from the seam.

use crate::error::Result;
use crate::grid::GridSpec;
use crate::spectral::Spectral;

#[derive(Debug, Clone)]
pub struct EMFieldSet {
    pub grid: GridSpec,
    /// Scalar potential samples W(z_j).
    pub w: Vec<f64>,
    /// Analytic dW/dz when the builder knows it; spectral fallback otherwise.
    grad_w: Option<Vec<f64>>,
    /// Longitudinal vector potential A_z(z_j).
    pub a: Vec<f64>,
    grad_a: Option<Vec<f64>>,
    /// Stored dA/dt; zero for static fields.
    pub a_dot: Vec<f64>,
    /// Uniform external magnetic 3-vector (Pauli module only).
    pub b_ext: [f64; 3],
    /// Charge coupling of the eW and eA terms.
    pub e: f64,
    /// Particle mass.
    pub m: f64,
}

impl EMFieldSet {
    pub fn free(grid: GridSpec, m: f64) -> Self {
        let n = grid.n_points;
        Self {
            grid,
            w: vec![0.0; n],
            grad_w: Some(vec![0.0; n]),
            a: vec![0.0; n],
            grad_a: Some(vec![0.0; n]),
            a_dot: vec![0.0; n],
            b_ext: [0.0; 3],
            e: 1.0,
            m,
        }
    }

    /// W = -E0 (z - L/2): a uniform electric field E_z = E0 around the box
    /// center (the potential has a wrap seam at z = 0).
    pub fn uniform_electric(grid: GridSpec, m: f64, e: f64, e0: f64) -> Self {
        let half = grid.length() / 2.0;
        let w: Vec<f64> = grid.coords().iter().map(|&z| -e0 * (z - half)).collect();
        let mut out = Self::free(grid, m);
        out.e = e;
        out.w = w;
        out.grad_w = Some(vec![-e0; grid.n_points]);
        out
    }

    /// eW = (1/2) m omega^2 (z - L/2)^2, a harmonic trap centered in the box.
    pub fn harmonic(grid: GridSpec, m: f64, e: f64, omega: f64) -> Self {
        let half = grid.length() / 2.0;
        let w: Vec<f64> = grid
            .coords()
            .iter()
            .map(|&z| 0.5 * m * omega * omega * (z - half) * (z - half) / e)
            .collect();
        let gw: Vec<f64> = grid
            .coords()
            .iter()
            .map(|&z| m * omega * omega * (z - half) / e)
            .collect();
        let mut out = Self::free(grid, m);
        out.e = e;
        out.w = w;
        out.grad_w = Some(gw);
        out
    }

    pub fn with_uniform_b(mut self, b: [f64; 3]) -> Self {
        self.b_ext = b;
        self
    }

    pub fn with_uniform_a(mut self, a0: f64) -> Self {
        self.a = vec![a0; self.grid.n_points];
        self.grad_a = Some(vec![0.0; self.grid.n_points]);
        self
    }

    pub fn with_tabulated_w(mut self, w: Vec<f64>) -> Result<Self> {
        assert_eq!(w.len(), self.grid.n_points);
        self.w = w;
        self.grad_w = None;
        Ok(self)
    }

    pub fn with_tabulated_a(mut self, a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), self.grid.n_points);
        self.a = a;
        self.grad_a = None;
        Ok(self)
    }

    pub fn a_is_uniform(&self) -> bool {
        let first = self.a[0];
        self.a.iter().all(|&v| v == first)
    }

    /// dW/dz: analytic where known, spectral otherwise.
    pub fn grad_w(&self, sp: &Spectral) -> Vec<f64> {
        match &self.grad_w {
            Some(g) => g.clone(),
            None => sp.derivative_real(&self.w),
        }
    }

    pub fn grad_a(&self, sp: &Spectral) -> Vec<f64> {
        match &self.grad_a {
            Some(g) => g.clone(),
            None => sp.derivative_real(&self.a),
        }
    }

    /// E_z = -dW/dz - dA/dt.
    pub fn electric_field(&self, sp: &Spectral) -> Vec<f64> {
        self.grad_w(sp)
            .iter()
            .zip(self.a_dot.iter())
            .map(|(&gw, &ad)| -gw - ad)
            .collect()
    }

    /// B = curl A (identically zero on the 1D grid) plus the uniform B_ext.
    pub fn magnetic_field(&self) -> [f64; 3] {
        self.b_ext
    }
}
