//! FFT plans, wavenumbers and spectral derivatives on the periodic grid.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::algebra::{C64, ZERO};
use crate::grid::GridSpec;

/// Cached forward/inverse plans plus the signed wavenumber ladder for one
/// grid size. Cheap to clone (plans are Arc-shared).
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    dx: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("n", &self.n)
            .field("dx", &self.dx)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        Self::with_size(grid.n_points, grid.dx)
    }

    pub fn with_size(n: usize, dx: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * dx);
        // Signed ladder 0, 1, ..., n/2-1, -n/2, ..., -1. The Nyquist bin is
        // assigned the negative wavenumber; first derivatives zero it out to
        // keep real fields real.
        let k = (0..n)
            .map(|m| {
                let m = m as i64;
                let signed = if m <= (n as i64) / 2 - 1 {
                    m
                } else {
                    m - n as i64
                };
                signed as f64 * dk
            })
            .collect();
        Self { n, dx, fwd, inv, k }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Forward DFT, unnormalized (matches the usual convention: the inverse
    /// carries the 1/N).
    pub fn forward(&self, f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn inverse(&self, fhat: &[C64]) -> Vec<C64> {
        let mut buf = fhat.to_vec();
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        buf
    }

    /// d/dz of a complex field. Exact to rounding for band-limited input.
    pub fn derivative(&self, f: &[C64]) -> Vec<C64> {
        let mut fhat = self.forward(f);
        for (m, v) in fhat.iter_mut().enumerate() {
            if m == self.n / 2 {
                *v = ZERO; // Nyquist has no well-defined first derivative
            } else {
                *v *= C64::new(0.0, self.k[m]);
            }
        }
        self.inverse(&fhat)
    }

    pub fn second_derivative(&self, f: &[C64]) -> Vec<C64> {
        let mut fhat = self.forward(f);
        for (m, v) in fhat.iter_mut().enumerate() {
            *v *= C64::new(-self.k[m] * self.k[m], 0.0);
        }
        self.inverse(&fhat)
    }

    pub fn derivative_real(&self, f: &[f64]) -> Vec<f64> {
        let buf: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.derivative(&buf).iter().map(|v| v.re).collect()
    }

    /// 1D divergence of a z-directed vector field: d f_z / dz.
    pub fn divergence_real(&self, f_z: &[f64]) -> Vec<f64> {
        self.derivative_real(f_z)
    }

    pub fn laplacian_real(&self, f: &[f64]) -> Vec<f64> {
        let buf: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.second_derivative(&buf).iter().map(|v| v.re).collect()
    }

    /// Evaluate the trigonometric interpolant of `fhat` (an unnormalized
    /// forward transform) at an arbitrary coordinate. Used by the boost
    /// module to sample fields off-lattice.
    pub fn eval_interpolant(&self, fhat: &[C64], z: f64) -> C64 {
        let mut acc = ZERO;
        for (m, &coeff) in fhat.iter().enumerate() {
            let phase = self.k[m] * z;
            acc += coeff * C64::new(phase.cos(), phase.sin());
        }
        acc / self.n as f64
    }
}
