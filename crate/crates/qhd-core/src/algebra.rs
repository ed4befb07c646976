//! Small dense complex matrices and 4-spinor kernels.
//!
//! Everything here is fixed-size (2x2 or 4x4), stack-allocated and exact:
//! no tolerance is hidden in the algebra itself.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// One grid-point value of a four-component spinor.
pub type Spinor4 = [C64; 4];

/// Dense complex 4x4 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4 {
    pub m: [[C64; 4]; 4],
}

impl Mat4 {
    pub const fn new(m: [[C64; 4]; 4]) -> Self {
        Self { m }
    }

    pub fn zeros() -> Self {
        Self { m: [[ZERO; 4]; 4] }
    }

    pub fn identity() -> Self {
        let mut out = Self::zeros();
        for i in 0..4 {
            out.m[i][i] = ONE;
        }
        out
    }

    /// Build from 2x2 blocks: [[a, b], [c, d]].
    pub fn from_blocks(a: Mat2, b: Mat2, c: Mat2, d: Mat2) -> Self {
        let mut out = Self::zeros();
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = a.m[i][j];
                out.m[i][j + 2] = b.m[i][j];
                out.m[i + 2][j] = c.m[i][j];
                out.m[i + 2][j + 2] = d.m[i][j];
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Mat4) -> Mat4 {
        let mut out = Mat4::zeros();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.m[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    out.m[i][j] += a * rhs.m[k][j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat4) -> Mat4 {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.m[i][j] += rhs.m[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Mat4 {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn adjoint(&self) -> Mat4 {
        let mut out = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                out.m[i][j] = self.m[j][i].conj();
            }
        }
        out
    }

    pub fn apply(&self, v: &Spinor4) -> Spinor4 {
        let mut out = [ZERO; 4];
        for (i, row) in self.m.iter().enumerate() {
            out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
        }
        out
    }

    /// {A, B} = AB + BA.
    pub fn anticommutator(&self, rhs: &Mat4) -> Mat4 {
        self.mul(rhs).add(&rhs.mul(self))
    }

    pub fn max_abs_diff(&self, rhs: &Mat4) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.m[i][j] - rhs.m[i][j]).norm());
            }
        }
        worst
    }

    /// Inverse via Gauss-Jordan with partial pivoting. Panics on a singular
    /// matrix; callers only invert unitary-like boost matrices.
    pub fn inverse(&self) -> Mat4 {
        let mut a = self.m;
        let mut inv = Mat4::identity().m;
        for col in 0..4 {
            let pivot = (col..4)
                .max_by(|&r, &s| a[r][col].norm().total_cmp(&a[s][col].norm()))
                .unwrap();
            assert!(a[pivot][col].norm() > 0.0, "singular 4x4 matrix");
            a.swap(col, pivot);
            inv.swap(col, pivot);
            let scale = ONE / a[col][col];
            for j in 0..4 {
                a[col][j] *= scale;
                inv[col][j] *= scale;
            }
            for row in 0..4 {
                if row == col {
                    continue;
                }
                let factor = a[row][col];
                if factor == ZERO {
                    continue;
                }
                for j in 0..4 {
                    let (acj, icj) = (a[col][j], inv[col][j]);
                    a[row][j] -= factor * acj;
                    inv[row][j] -= factor * icj;
                }
            }
        }
        Mat4::new(inv)
    }
}

/// Dense complex 2x2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[C64; 2]; 2],
}

impl Mat2 {
    pub const fn new(m: [[C64; 2]; 2]) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self::new([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat2) -> Mat2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] += rhs.m[i][j];
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64; 2]) -> [C64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }
}

/// Pauli matrices sigma_1, sigma_2, sigma_3.
pub fn pauli() -> [Mat2; 3] {
    [
        Mat2::new([[ZERO, ONE], [ONE, ZERO]]),
        Mat2::new([[ZERO, -I], [I, ZERO]]),
        Mat2::new([[ONE, ZERO], [ZERO, -ONE]]),
    ]
}

/// exp(-i t n.sigma) for a real 3-vector n, via the closed form
/// cos(|n| t) I - i sin(|n| t) (n.sigma)/|n|.
pub fn spin_rotation(n: [f64; 3], t: f64) -> Mat2 {
    let mag = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if mag == 0.0 {
        return Mat2::identity();
    }
    let s = pauli();
    let mut ndots = Mat2::new([[ZERO; 2]; 2]);
    for (k, sk) in s.iter().enumerate() {
        ndots = ndots.add(&sk.scale(C64::new(n[k] / mag, 0.0)));
    }
    let theta = mag * t;
    Mat2::identity()
        .scale(C64::new(theta.cos(), 0.0))
        .add(&ndots.scale(C64::new(0.0, -theta.sin())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_diagonal_scaling() {
        let mut a = Mat4::identity();
        a.m[0][0] = C64::new(2.0, 0.0);
        a.m[3][3] = C64::new(0.0, 0.5);
        let inv = a.inverse();
        let prod = a.mul(&inv);
        assert!(prod.max_abs_diff(&Mat4::identity()) < 1e-14);
    }

    #[test]
    fn pauli_algebra() {
        let s = pauli();
        // sigma_1 sigma_2 = i sigma_3
        let p = Mat2::new([[ZERO; 2]; 2]).add(&s[0]).apply(&[ONE, ZERO]);
        assert_eq!(p, [ZERO, ONE]);
        for k in 0..3 {
            let sq = [
                s[k].apply(&[ONE, ZERO]),
                s[k].apply(&[ZERO, ONE]),
            ];
            let again = [s[k].apply(&sq[0]), s[k].apply(&sq[1])];
            assert_eq!(again[0], [ONE, ZERO]);
            assert_eq!(again[1], [ZERO, ONE]);
        }
    }

    #[test]
    fn spin_rotation_is_unitary_and_periodic() {
        let u = spin_rotation([0.0, 0.0, 1.0], std::f64::consts::PI);
        // exp(-i pi sigma_z) = -i sigma_z diag phases: (e^{-i pi}, e^{i pi}) = (-1, -1)
        assert!((u.m[0][0] + ONE).norm() < 1e-15);
        assert!((u.m[1][1] + ONE).norm() < 1e-15);
    }
}
