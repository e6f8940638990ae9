use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::wavelet::{DogKernel, SUPPORT};
use crate::error::{Error, Result};

/// Amplitude prefactor of the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `1/tau`; coefficients scale as `tau^h` for a Hölder-`h` signal.
    #[default]
    L1,
    /// `1/sqrt(tau)`; exponents shift by +1/2.
    L2,
}

impl Normalization {
    fn factor(self, scale: f64) -> f64 {
        match self {
            Normalization::L1 => 1.0,
            Normalization::L2 => scale.sqrt(),
        }
    }
}

/// Continuous wavelet transform of a series on a grid of scales.
#[derive(Debug, Clone, PartialEq)]
pub struct CwtPlane {
    pub order: u32,
    pub normalization: Normalization,
    /// Increasing.
    pub scales: Vec<f64>,
    /// `coeffs[i][b]` at scale `scales[i]` and position `b`.
    pub coeffs: Vec<Vec<f64>>,
    /// Per scale, the inclusive range of positions whose wavelet support lies
    /// inside the series; `None` when no such position exists.
    pub interior: Vec<Option<(usize, usize)>>,
}

impl CwtPlane {
    pub fn len(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest `|T|` over interior positions.
    pub fn max_modulus(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.interior)
            .filter_map(|(row, r)| r.map(|(lo, hi)| &row[lo..=hi]))
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Default analysis scales: 32 log-spaced in `[4, len/32]`.
pub fn default_scales(len: usize) -> Vec<f64> {
    let hi = (len as f64 / 32.0).max(4.0);
    crate::fit::log_space(4.0, hi, 32)
}

/// `T(tau, b) = (1/tau) sum_t Y(t) psi((t - b)/tau)` at every integer `b`.
///
/// Evaluated by zero-padded FFT correlation; positions closer than `8 tau`
/// to either end are computed but marked outside [`CwtPlane::interior`].
pub fn cwt(
    y: &[f64],
    scales: &[f64],
    order: u32,
    normalization: Normalization,
) -> Result<CwtPlane> {
    if scales.is_empty() {
        return Err(Error::InsufficientData("no scales".into()));
    }
    if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::OutOfRange(format!("scales must be > 0, got {s}")));
    }
    if order == 0 {
        return Err(Error::OutOfRange("wavelet order must be >= 1".into()));
    }
    let mut scales = scales.to_vec();
    scales.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scales.dedup();
    let max_scale = *scales.last().unwrap();
    let n = y.len();
    if (n as f64) < SUPPORT * max_scale {
        return Err(Error::InsufficientData(format!(
            "series of length {n} too short for scale {max_scale} (need >= {})",
            (SUPPORT * max_scale).ceil()
        )));
    }

    let max_half = (SUPPORT * max_scale).floor() as usize;
    let fft_len = (n + 2 * max_half + 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);

    let mut signal: Vec<Complex<f64>> = (0..fft_len)
        .map(|i| Complex::new(if i < n { y[i] } else { 0.0 }, 0.0))
        .collect();
    forward.process(&mut signal);

    let rows: Vec<(Vec<f64>, Option<(usize, usize)>)> = scales
        .par_iter()
        .map(|&scale| {
            let kern = DogKernel::new(order, scale);
            let row = correlate(&signal, &kern, n, &forward, &inverse);
            let factor = normalization.factor(scale);
            let row: Vec<f64> = row.into_iter().map(|v| v * factor).collect();
            let hw = kern.half_width;
            let interior = if n > 2 * hw {
                Some((hw, n - 1 - hw))
            } else {
                None
            };
            (row, interior)
        })
        .collect();
    let (coeffs, interior) = rows.into_iter().unzip();
    Ok(CwtPlane {
        order,
        normalization,
        scales,
        coeffs,
        interior,
    })
}

fn correlate(
    signal_hat: &[Complex<f64>],
    kern: &DogKernel,
    n: usize,
    forward: &Arc<dyn Fft<f64>>,
    inverse: &Arc<dyn Fft<f64>>,
) -> Vec<f64> {
    let len = signal_hat.len();
    let hw = kern.half_width as isize;
    // T(b) = sum_k Y(b + k) w_k, a convolution with v(m) = w(-m)
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for k in -hw..=hw {
        let m = (-k).rem_euclid(len as isize) as usize;
        buf[m].re = kern.tap(k);
    }
    forward.process(&mut buf);
    for (b, s) in buf.iter_mut().zip(signal_hat) {
        *b *= s;
    }
    inverse.process(&mut buf);
    let scale = 1.0 / len as f64;
    buf[..n].iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wtmm::wavelet::dog_wavelet;

    /// Literal evaluation of the transform sum, no FFT, no moment correction.
    fn direct(y: &[f64], scale: f64, order: u32, b: usize) -> f64 {
        let hw = (SUPPORT * scale).floor() as isize;
        let mut s = 0.0;
        for k in -hw..=hw {
            let t = b as isize + k;
            if t >= 0 && (t as usize) < y.len() {
                s += y[t as usize] * dog_wavelet(order, k as f64 / scale);
            }
        }
        s / scale
    }

    #[test]
    fn fft_matches_direct_sum() {
        let y: Vec<f64> = (0..600)
            .map(|t| ((t as f64) * 0.37).sin() + (t % 7) as f64)
            .collect();
        let scales = [4.0, 9.5, 30.0];
        let plane = cwt(&y, &scales, 4, Normalization::L1).unwrap();
        for (i, &s) in plane.scales.iter().enumerate() {
            for b in [0, 17, 250, 599] {
                let d = direct(&y, s, 4, b);
                assert!((plane.coeffs[i][b] - d).abs() < 1e-9, "scale {s} b {b}");
            }
        }
    }

    #[test]
    fn cubic_trend_is_invisible() {
        let y: Vec<f64> = (0..512)
            .map(|t| {
                let t = t as f64;
                1e-6 * t.powi(3) - 2e-3 * t * t + 0.5 * t + 2.0
            })
            .collect();
        let plane = cwt(&y, &[1.0, 2.0, 4.0, 8.0, 16.0], 4, Normalization::L1).unwrap();
        for (row, range) in plane.coeffs.iter().zip(&plane.interior) {
            let (lo, hi) = range.unwrap();
            for &c in &row[lo..=hi] {
                assert!(c.abs() < 1e-8, "{c}");
            }
        }
    }

    #[test]
    fn zero_signal_zero_plane() {
        let plane = cwt(&[0.0; 256], &[2.0, 4.0], 4, Normalization::L1).unwrap();
        assert!(plane.coeffs.iter().flatten().all(|&c| c == 0.0));
        assert_eq!(plane.max_modulus(), 0.0);
    }

    #[test]
    fn step_ridge_converges_to_the_jump() {
        let t0 = 1000;
        let y: Vec<f64> = (0..2048).map(|t| if t >= t0 { 1.0 } else { 0.0 }).collect();
        let scales = [2.0, 4.0, 8.0, 16.0, 32.0];
        let plane = cwt(&y, &scales, 4, Normalization::L1).unwrap();
        let mut offsets = Vec::new();
        for (row, range) in plane.coeffs.iter().zip(&plane.interior) {
            let (lo, hi) = range.unwrap();
            let arg = (lo..=hi)
                .max_by(|&a, &b| row[a].abs().partial_cmp(&row[b].abs()).unwrap())
                .unwrap();
            offsets.push((arg as f64 - (t0 as f64 - 0.5)).abs());
        }
        // the strongest response sits within a fixed fraction of the scale
        for (off, s) in offsets.iter().zip(&scales) {
            assert!(*off <= 1.0 * s, "offset {off} at scale {s}");
        }
        assert!(offsets[0] <= 2.0);
        assert!(offsets.windows(2).all(|w| w[0] <= w[1] + 0.5));
    }

    #[test]
    fn rejects_short_series_and_bad_scales() {
        assert!(cwt(&[0.0; 100], &[20.0], 4, Normalization::L1).is_err());
        assert!(cwt(&[0.0; 100], &[0.0], 4, Normalization::L1).is_err());
        assert!(cwt(&[0.0; 100], &[], 4, Normalization::L1).is_err());
    }

    #[test]
    fn l2_rescales_by_sqrt_scale() {
        let y: Vec<f64> = (0..400).map(|t| ((t * t) % 13) as f64).collect();
        let a = cwt(&y, &[5.0], 4, Normalization::L1).unwrap();
        let b = cwt(&y, &[5.0], 4, Normalization::L2).unwrap();
        for (x, z) in a.coeffs[0].iter().zip(&b.coeffs[0]) {
            assert!((x * 5f64.sqrt() - z).abs() < 1e-9);
        }
    }
}
