//! Uniform periodic 1D lattice description.

use crate::error::{QhdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
}

/// Spatial/temporal discretization shared by every field in a run.
///
/// Natural units throughout the crate: hbar = c = 1 and the reference mass
/// is 1. SI conversions live in [`crate::units`] and stay at the I/O edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_points: usize,
    pub dx: f64,
    pub dt: f64,
    pub boundary: Boundary,
    pub t0: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, dx: f64, dt: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(QhdError::InvalidGrid(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        if !(dx > 0.0) {
            return Err(QhdError::InvalidGrid(format!("dx must be > 0, got {dx}")));
        }
        if !(dt > 0.0) {
            return Err(QhdError::InvalidGrid(format!("dt must be > 0, got {dt}")));
        }
        Ok(Self {
            n_points,
            dx,
            dt,
            boundary: Boundary::Periodic,
            t0: 0.0,
        })
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Default step resolves the mc^2 phase rotation at desk-scale masses.
    pub fn with_default_dt(n_points: usize, dx: f64) -> Result<Self> {
        Self::new(n_points, dx, 0.1 * dx)
    }

    pub fn length(&self) -> f64 {
        self.n_points as f64 * self.dx
    }

    /// Courant ratio c dt / dx, recorded in run manifests and reports.
    pub fn cfl_ratio(&self) -> f64 {
        self.dt / self.dx
    }

    /// Coordinate of grid point `j`, domain [0, L).
    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.z(j)).collect()
    }

    pub fn same_layout(&self, other: &GridSpec) -> bool {
        self.n_points == other.n_points && self.dx == other.dx
    }

    pub fn check_same_layout(&self, other: &GridSpec) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(QhdError::GridMismatch {
                left: format!("n={}, dx={}", self.n_points, self.dx),
                right: format!("n={}, dx={}", other.n_points, other.dx),
            })
        }
    }
}
