//! Structure functions `S_q(tau) = <|Y(t + tau) - Y(t)|^q>` and their scaling.
//!
//! The average runs over every overlapping pair `(t, t + tau)` of the series.
//! Fitted exponents are `zeta(q) = q h(q)`; a signal whose `h(q)` does not
//! depend on `q` is fractal, otherwise multifractal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{linear_fit, log_lags, slope_through_origin};

pub const DEFAULT_SLOPE_TOL: f64 = 0.05;
pub const DEFAULT_LINEARITY_TOL: f64 = 0.05;
pub const DEFAULT_SCALING_RANGE: (usize, usize) = (6, 100);

/// Moment orders 1.0, 1.5, ..., 6.5.
pub fn default_q_values() -> Vec<f64> {
    (0..12).map(|i| 1.0 + 0.5 * i as f64).collect()
}

/// 24 log-spaced lags in `[1, 1000]`.
pub fn default_tau_values() -> Vec<usize> {
    log_lags(1, 1000, 24)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub range: (usize, usize),
    /// `q h(q)` per moment order.
    pub zeta: Vec<f64>,
    pub r2: Vec<f64>,
}

impl ScalingFit {
    pub fn h(&self, q_values: &[f64]) -> Vec<f64> {
        self.zeta.iter().zip(q_values).map(|(z, q)| z / q).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfResult {
    pub q_values: Vec<f64>,
    pub tau_values: Vec<usize>,
    /// `sf[i][j] = S_{q_i}(tau_j)`
    pub sf: Vec<Vec<f64>>,
    pub fit: Option<ScalingFit>,
}

fn validate_grids(len: usize, q_values: &[f64], tau_values: &[usize]) -> Result<()> {
    if q_values.is_empty() || tau_values.is_empty() {
        return Err(Error::InsufficientData("empty q or tau grid".into()));
    }
    if let Some(q) = q_values.iter().find(|q| !(q.is_finite() && **q > 0.0)) {
        return Err(Error::OutOfRange(format!(
            "structure functions need q > 0 (got {q}); use WTMM for negative moments"
        )));
    }
    if let Some(tau) = tau_values.iter().find(|&&t| t == 0 || 2 * t >= len) {
        return Err(Error::OutOfRange(format!(
            "lag {tau} outside [1, length/2) for length {len}"
        )));
    }
    Ok(())
}

fn moment(abs_inc: &[f64], q: f64) -> f64 {
    let n = abs_inc.len() as f64;
    if q == 1.0 {
        abs_inc.iter().sum::<f64>() / n
    } else if q.fract() == 0.0 && q <= 16.0 {
        let k = q as i32;
        abs_inc.iter().map(|d| d.powi(k)).sum::<f64>() / n
    } else {
        abs_inc.iter().map(|d| d.powf(q)).sum::<f64>() / n
    }
}

/// Unfitted structure functions of `y` on the given grids.
pub fn structure_function(y: &[f64], q_values: &[f64], tau_values: &[usize]) -> Result<SfResult> {
    validate_grids(y.len(), q_values, tau_values)?;
    let by_tau: Vec<Vec<f64>> = tau_values
        .par_iter()
        .map(|&tau| {
            let abs_inc: Vec<f64> = y.windows(tau + 1).map(|w| (w[tau] - w[0]).abs()).collect();
            q_values.iter().map(|&q| moment(&abs_inc, q)).collect()
        })
        .collect();
    let sf = (0..q_values.len())
        .map(|i| by_tau.iter().map(|row| row[i]).collect())
        .collect();
    Ok(SfResult {
        q_values: q_values.to_vec(),
        tau_values: tau_values.to_vec(),
        sf,
        fit: None,
    })
}

/// Normalized log-log slopes of the structure functions of a return series.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub q_values: Vec<f64>,
    /// `(1/q) d ln S_q / d ln tau` over the whole lag grid.
    pub slopes: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

/// Flatness check of `S_q(tau)` computed on the returns themselves.
///
/// The reported slope is the exponent `h(q)` in `S_q ~ tau^(q h(q))`, so a
/// linear trend scores 1 for every `q` and a stationary series scores 0.
/// Lags with `S_q = 0` are skipped; a series that is zero everywhere is flat.
pub fn stationarity_check(
    a: &[f64],
    q_values: &[f64],
    tau_values: &[usize],
    slope_tol: f64,
) -> Result<StationarityReport> {
    let res = structure_function(a, q_values, tau_values)?;
    let slopes: Vec<f64> = res
        .sf
        .iter()
        .zip(q_values)
        .map(|(row, &q)| {
            let (x, y): (Vec<f64>, Vec<f64>) = res
                .tau_values
                .iter()
                .zip(row)
                .filter(|(_, &s)| s > 0.0)
                .map(|(&t, &s)| ((t as f64).ln(), s.ln()))
                .unzip();
            linear_fit(&x, &y).map_or(0.0, |f| f.slope / q)
        })
        .collect();
    let pass = slopes.iter().all(|s| s.abs() <= slope_tol);
    Ok(StationarityReport {
        q_values: q_values.to_vec(),
        slopes,
        tol: slope_tol,
        pass,
    })
}

/// Least-squares `ln S_q` against `ln tau` restricted to `range` (inclusive).
pub fn fit_scaling(result: &SfResult, range: (usize, usize)) -> Result<SfResult> {
    let (lo, hi) = range;
    let idx: Vec<usize> = result
        .tau_values
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= lo && t <= hi)
        .map(|(j, _)| j)
        .collect();
    if idx.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "scaling range [{lo}, {hi}] holds {} lags, need at least 4",
            idx.len()
        )));
    }
    let x: Vec<f64> = idx
        .iter()
        .map(|&j| (result.tau_values[j] as f64).ln())
        .collect();
    let mut zeta = Vec::with_capacity(result.q_values.len());
    let mut r2 = Vec::with_capacity(result.q_values.len());
    for (row, q) in result.sf.iter().zip(&result.q_values) {
        let y: Vec<f64> = idx.iter().map(|&j| row[j]).collect();
        if y.iter().any(|&s| s <= 0.0) {
            return Err(Error::Degenerate(format!(
                "S_q vanishes inside the scaling range at q={q}"
            )));
        }
        let ly: Vec<f64> = y.iter().map(|s| s.ln()).collect();
        let f = linear_fit(&x, &ly).expect("distinct lags");
        zeta.push(f.slope);
        r2.push(f.r2);
    }
    let mut out = result.clone();
    out.fit = Some(ScalingFit { range, zeta, r2 });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Fractal,
    Multifractal,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Fractal => "fractal",
            Regime::Multifractal => "multifractal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub regime: Regime,
    /// `h(2)`, the Hurst exponent.
    pub hurst: f64,
    /// Slope of the best line `zeta(q) = H q` through the origin.
    pub global_h: f64,
    /// `max_q |h(q) - h(2)|`
    pub max_deviation: f64,
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if let Some(i) = xs.iter().position(|&v| v == x) {
        return ys[i];
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let first = order[0];
    let last = order[order.len() - 1];
    if x <= xs[first] {
        return ys[first];
    }
    if x >= xs[last] {
        return ys[last];
    }
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if xs[a] <= x && x <= xs[b] {
            let f = (x - xs[a]) / (xs[b] - xs[a]);
            return ys[a] + f * (ys[b] - ys[a]);
        }
    }
    unreachable!()
}

/// Fractal iff every `h(q)` stays within `linearity_tol` of `h(2)`.
///
/// `h(2)` is interpolated linearly in `q` when 2 is not on the grid.
pub fn classify(result: &SfResult, linearity_tol: f64) -> Result<Classification> {
    let fit = result
        .fit
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("structure functions not fitted".into()))?;
    let h = fit.h(&result.q_values);
    let hurst = interpolate(&result.q_values, &h, 2.0);
    let max_deviation = h.iter().map(|v| (v - hurst).abs()).fold(0.0, f64::max);
    let global_h = slope_through_origin(&result.q_values, &fit.zeta).unwrap_or(f64::NAN);
    let regime = if max_deviation > linearity_tol {
        Regime::Multifractal
    } else {
        Regime::Fractal
    };
    Ok(Classification {
        regime,
        hurst,
        global_h,
        max_deviation,
    })
}
