//! Small numerical utilities shared by diagnostics and tests: dominant
//! frequency extraction, least-squares fits, periodic series unwrapping.

use crate::algebra::C64;
use crate::spectral::Spectral;

/// Dominant angular frequency of a real time series sampled at `dt`, via a
/// Hann-windowed periodogram with parabolic peak interpolation. The mean is
/// removed first so the DC bin never wins.
pub fn dominant_angular_frequency(series: &[f64], dt: f64) -> f64 {
    let n = series.len().next_power_of_two();
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut buf: Vec<C64> = Vec::with_capacity(n);
    for (j, &v) in series.iter().enumerate() {
        let w = 0.5
            * (1.0
                - (2.0 * std::f64::consts::PI * j as f64 / (series.len() - 1) as f64).cos());
        buf.push(C64::new((v - mean) * w, 0.0));
    }
    buf.resize(n, C64::new(0.0, 0.0));
    let sp = Spectral::with_size(n, dt);
    let hat = sp.forward(&buf);
    let half = n / 2;
    let power: Vec<f64> = hat[..half].iter().map(|v| v.norm_sqr()).collect();
    let (peak, _) = power
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("series too short");
    // parabolic interpolation on log power around the peak bin
    let offset = if peak > 1 && peak + 1 < half {
        let (lm, lc, lp) = (
            power[peak - 1].max(1e-300).ln(),
            power[peak].max(1e-300).ln(),
            power[peak + 1].max(1e-300).ln(),
        );
        let denom = lm - 2.0 * lc + lp;
        if denom.abs() > 1e-12 {
            0.5 * (lm - lp) / denom
        } else {
            0.0
        }
    } else {
        0.0
    };
    let dom = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    (peak as f64 + offset) * dom
}

/// Ordinary least squares y = a x + b; returns (a, b).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Remove period jumps from a time series living on a circle of the given
/// period (e.g. packet centroids on the periodic box).
pub fn unwrap_periodic_series(values: &[f64], period: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut correction = 0.0;
    for (j, &v) in values.iter().enumerate() {
        if j > 0 {
            let diff = v - values[j - 1];
            if diff > period / 2.0 {
                correction -= period;
            } else if diff < -period / 2.0 {
                correction += period;
            }
        }
        out.push(v + correction);
    }
    out
}

/// L2 norm of a sampled field with measure dx.
pub fn l2_norm(values: &[f64], dx: f64) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() * dx).sqrt()
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}
