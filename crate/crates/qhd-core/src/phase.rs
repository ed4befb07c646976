//! 1D phase unwrapping with branch-seam bookkeeping.
//!
//! Unwrapping walks the grid once from the leftmost valid point, removing
//! 2*pi jumps above the threshold pi. Masked points inherit the running
//! correction so downstream differencing never sees a spurious jump. The
//! periodic closure is checked separately: a nonzero winding number means
//! the continuous phase cannot close around the box, and the wrap index is
//! recorded as a branch seam.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct UnwrapResult {
    pub values: Vec<f64>,
    /// Grid indices where a branch seam was recorded (the periodic closure
    /// jump lives between index n-1 and 0 and is recorded as index 0).
    pub seams: Vec<usize>,
    /// Net winding number of the phase around the box.
    pub winding: i64,
}

fn wrap_to_pi(x: f64) -> f64 {
    let mut p = x % (2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    } else if p < -PI {
        p += 2.0 * PI;
    }
    p
}

/// Unwrap `phases` (values in any 2*pi representative) along the grid,
/// starting at the leftmost valid point. Invalid points are carried through
/// without contributing jumps.
pub fn unwrap_1d(phases: &[f64], valid: &[bool]) -> UnwrapResult {
    assert_eq!(phases.len(), valid.len());
    let n = phases.len();
    let mut values = vec![0.0; n];
    let Some(first_valid) = valid.iter().position(|&v| v) else {
        return UnwrapResult {
            values,
            seams: Vec::new(),
            winding: 0,
        };
    };
    let mut correction = 0.0;
    let mut prev = phases[first_valid];
    for j in 0..n {
        if j > first_valid && valid[j] {
            let diff = phases[j] - prev;
            if diff > PI {
                correction -= 2.0 * PI;
            } else if diff < -PI {
                correction += 2.0 * PI;
            }
            prev = phases[j];
        }
        values[j] = phases[j] + correction;
    }
    // periodic closure: sum of wrapped increments around the loop
    let mut winding_angle = 0.0;
    let mut last = phases[first_valid];
    for step in 1..=n {
        let j = (first_valid + step) % n;
        if valid[j] {
            winding_angle += wrap_to_pi(phases[j] - last);
            last = phases[j];
        }
    }
    let winding = (winding_angle / (2.0 * PI)).round() as i64;
    let seams = if winding != 0 { vec![0] } else { Vec::new() };
    UnwrapResult {
        values,
        seams,
        winding,
    }
}
