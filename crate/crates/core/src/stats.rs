//! Phase-diagram statistics and scale-dependent increment PDFs.

use serde::{Deserialize, Serialize};

use crate::engine::MarketSeries;
use crate::error::{Error, Result};

/// Minimum number of increments accepted by [`increment_pdf`].
pub const MIN_INCREMENTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub alpha: f64,
    pub sigma2: f64,
    /// Predictability `H`.
    pub h_pred: f64,
    /// Excess kurtosis of `A`.
    pub kurtosis: f64,
}

impl PhasePoint {
    pub fn from_series(alpha: f64, p_states: usize, series: &MarketSeries) -> Result<Self> {
        let a = series.returns();
        Ok(PhasePoint {
            alpha,
            sigma2: variance(&a)?,
            h_pred: predictability(&a, &series.mu_indices(), p_states)?,
            kurtosis: kurtosis(&a)?,
        })
    }
}

fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

fn central_moment(a: &[f64], m: f64, k: i32) -> f64 {
    a.iter().map(|x| (x - m).powi(k)).sum::<f64>() / a.len() as f64
}

/// Population variance.
pub fn variance(a: &[f64]) -> Result<f64> {
    if a.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "variance needs at least 2 samples, got {}",
            a.len()
        )));
    }
    Ok(central_moment(a, mean(a), 2))
}

/// `H = (1/P) sum_mu <A|mu>^2`; states never visited contribute zero.
pub fn predictability(a: &[f64], mu: &[usize], p_states: usize) -> Result<f64> {
    if a.len() != mu.len() {
        return Err(Error::InsufficientData(format!(
            "series lengths differ ({} vs {})",
            a.len(),
            mu.len()
        )));
    }
    if p_states == 0 {
        return Err(Error::OutOfRange("P must be >= 1".into()));
    }
    let mut sum = vec![0.0; p_states];
    let mut count = vec![0usize; p_states];
    for (&x, &m) in a.iter().zip(mu) {
        if m >= p_states {
            return Err(Error::OutOfRange(format!(
                "information state {m} outside [0, {p_states})"
            )));
        }
        sum[m] += x;
        count[m] += 1;
    }
    let total: f64 = sum
        .iter()
        .zip(&count)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| (s / c as f64).powi(2))
        .sum();
    Ok(total / p_states as f64)
}

/// Excess kurtosis `m4 / m2^2 - 3`.
pub fn kurtosis(a: &[f64]) -> Result<f64> {
    if a.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "kurtosis needs at least 4 samples, got {}",
            a.len()
        )));
    }
    let m = mean(a);
    let m2 = central_moment(a, m, 2);
    if m2 <= 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok(central_moment(a, m, 4) / (m2 * m2) - 3.0)
}

/// Bin-width rule for [`increment_pdf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
#[derive(Default)]
pub enum Binning {
    #[default]
    FreedmanDiaconis,
    Count {
        bins: usize,
    },
}

/// Histogram of `Y(t + tau) - Y(t)` in standardized units.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementHistogram {
    pub tau: usize,
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    pub counts: Vec<usize>,
    /// Number of (overlapping) increments.
    pub samples: usize,
    /// Raw increment mean and standard deviation used for standardization.
    pub mean: f64,
    pub std: f64,
    /// Set when increments sit on an integer lattice and the bins were aligned to it.
    pub lattice: bool,
}

impl IncrementHistogram {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

pub fn increments(y: &[f64], tau: usize) -> Vec<f64> {
    y.windows(tau + 1).map(|w| w[tau] - w[0]).collect()
}

/// Increments at lag `tau` standardized to zero mean and unit variance.
pub fn standardized_increments(y: &[f64], tau: usize) -> Result<Vec<f64>> {
    let (d, m, s) = checked_increments(y, tau)?;
    Ok(d.into_iter().map(|x| (x - m) / s).collect())
}

fn checked_increments(y: &[f64], tau: usize) -> Result<(Vec<f64>, f64, f64)> {
    if tau == 0 {
        return Err(Error::OutOfRange("tau must be >= 1".into()));
    }
    if tau >= y.len() || y.len() - tau < MIN_INCREMENTS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_INCREMENTS} increments at tau={tau}, series length {}",
            y.len()
        )));
    }
    let d = increments(y, tau);
    let m = mean(&d);
    let var = central_moment(&d, m, 2);
    if var <= 0.0 {
        return Err(Error::Degenerate(format!(
            "increments at tau={tau} have zero variance"
        )));
    }
    Ok((d, m, var.sqrt()))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Density-normalized histogram of standardized increments at lag `tau`.
///
/// Integer-valued increments (engine output) get bin widths that are whole
/// multiples of the lattice spacing, with edges halfway between lattice
/// points, so every bin holds the same number of lattice sites.
pub fn increment_pdf(y: &[f64], tau: usize, binning: Binning) -> Result<IncrementHistogram> {
    let (d, m, s) = checked_increments(y, tau)?;
    let mut sorted = d.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite increments"));
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let n = d.len();
    let lattice = d.iter().all(|x| x.fract() == 0.0);

    let raw_width = match binning {
        Binning::FreedmanDiaconis => {
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let w = 2.0 * iqr / (n as f64).cbrt();
            if w > 0.0 {
                w
            } else {
                (hi - lo) / (n as f64).sqrt().ceil()
            }
        }
        Binning::Count { bins } => {
            if bins == 0 {
                return Err(Error::OutOfRange("bin count must be >= 1".into()));
            }
            (hi - lo) / bins as f64
        }
    };
    let (start, width, nbins) = if lattice {
        let w = raw_width.round().max(1.0);
        let start = lo - 0.5;
        let nbins = (((hi + 0.5) - start) / w).ceil().max(1.0) as usize;
        (start, w, nbins)
    } else {
        let nbins = (((hi - lo) / raw_width).ceil() as usize).max(1);
        (lo, (hi - lo) / nbins as f64, nbins)
    };

    let mut counts = vec![0usize; nbins];
    for &x in &d {
        let k = (((x - start) / width).floor() as usize).min(nbins - 1);
        counts[k] += 1;
    }
    let std_width = width / s;
    let bin_edges: Vec<f64> = (0..=nbins)
        .map(|k| (start + k as f64 * width - m) / s)
        .collect();
    let density = counts
        .iter()
        .map(|&c| c as f64 / (n as f64 * std_width))
        .collect();
    Ok(IncrementHistogram {
        tau,
        bin_edges,
        density,
        counts,
        samples: n,
        mean: m,
        std: s,
        lattice,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Bin-by-bin comparison of a standardized histogram with the standard Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianAgreement {
    pub bins_checked: usize,
    pub bins_within: usize,
}

impl GaussianAgreement {
    pub fn fraction(&self) -> f64 {
        if self.bins_checked == 0 {
            0.0
        } else {
            self.bins_within as f64 / self.bins_checked as f64
        }
    }
}

/// Count bins whose probability mass lies within `z` binomial standard errors
/// of the Gaussian mass, using `n_eff` independent samples. Bins with fewer
/// than `min_expected` expected samples are skipped.
pub fn gaussian_agreement(
    hist: &IncrementHistogram,
    n_eff: usize,
    z: f64,
    min_expected: f64,
) -> GaussianAgreement {
    let n = n_eff as f64;
    let mut out = GaussianAgreement {
        bins_checked: 0,
        bins_within: 0,
    };
    for (k, w) in hist.bin_edges.windows(2).enumerate() {
        let p = normal_cdf(w[1]) - normal_cdf(w[0]);
        if p * n < min_expected {
            continue;
        }
        let observed = hist.counts[k] as f64 / hist.samples as f64;
        let se = (p * (1.0 - p) / n).sqrt();
        out.bins_checked += 1;
        if (observed - p).abs() <= z * se {
            out.bins_within += 1;
        }
    }
    out
}

/// Fraction of standardized increments at or beyond `|x| >= k`.
pub fn tail_fraction(standardized: &[f64], k: f64) -> f64 {
    standardized.iter().filter(|x| x.abs() >= k).count() as f64 / standardized.len() as f64
}
