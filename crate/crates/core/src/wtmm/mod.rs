//! Wavelet Transform Modulus Maxima.
//!
//! The series is transformed with a derivative-of-Gaussian wavelet, the
//! modulus maxima are collected scale by scale, and the canonical partition
//! sums `Z(q; tau)` and `Z*(q; tau)` are regressed on `ln tau` to give the
//! Hölder exponents `h(q)` and the singularity spectrum `D(h(q))`.

mod cwt;
mod maxima;
mod partition;
mod spectrum;
mod wavelet;

use serde::{Deserialize, Serialize};

pub use cwt::{cwt, default_scales, CwtPlane, Normalization};
pub use maxima::{chain_maxima, find_maxima, row_maxima, MaximaSet, ScaleMaxima, MODULUS_FLOOR};
pub use partition::{partition_at, partition_functions, weights, PartitionFunctions};
pub use spectrum::{fit_spectrum, select_fit_band, spectrum_extrema, Extrema, SingularitySpectrum};
pub use wavelet::{dog_wavelet, hermite, DogKernel, SUPPORT};

use crate::error::Result;

/// `q` from -5 to 5 in steps of 0.25.
pub fn default_q_values() -> Vec<f64> {
    (0..=40).map(|i| -5.0 + 0.25 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WtmmConfig {
    /// Derivative order of the analyzing wavelet.
    pub order: u32,
    pub normalization: Normalization,
    pub n_scales: usize,
    pub min_scale: f64,
    /// Defaults to `len / 32`.
    pub max_scale: Option<f64>,
    pub q_values: Vec<f64>,
    /// Explicit fit band. Overrides `auto_band`.
    pub fit_range: Option<(f64, f64)>,
    /// Search for the widest straight band instead of using the interior band.
    pub auto_band: bool,
    /// Tolerated relative spread of local slopes inside an automatic band.
    pub band_tol: f64,
    /// Link maxima into lines and use the supremum along each line.
    pub chained: bool,
}

impl Default for WtmmConfig {
    fn default() -> Self {
        WtmmConfig {
            order: 4,
            normalization: Normalization::L1,
            n_scales: 32,
            min_scale: 4.0,
            max_scale: None,
            q_values: default_q_values(),
            fit_range: None,
            auto_band: false,
            band_tol: 0.15,
            chained: true,
        }
    }
}

impl WtmmConfig {
    pub fn scales(&self, len: usize) -> Vec<f64> {
        let hi = self
            .max_scale
            .unwrap_or(len as f64 / 32.0)
            .max(self.min_scale);
        crate::fit::log_space(self.min_scale, hi, self.n_scales)
    }

    /// Default fit band: from twice the finest scale up to `len / 128`,
    /// clear of the discretisation regime at the bottom and of the boundary
    /// depletion at the top.
    pub fn interior_band(&self, len: usize) -> (f64, f64) {
        let hi = self
            .max_scale
            .unwrap_or(len as f64 / 32.0)
            .max(self.min_scale);
        let lo = 2.0 * self.min_scale;
        (lo, (len as f64 / 128.0).min(hi).max(lo))
    }
}

/// How the fit band of a [`WtmmResult`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSource {
    Explicit,
    Interior,
    Auto,
    /// Automatic search found nothing; the interior band was used.
    AutoFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WtmmResult {
    pub partition: PartitionFunctions,
    pub spectrum: SingularitySpectrum,
    pub band: BandSource,
}

/// Full pipeline: transform, maxima, partition sums, spectrum.
pub fn analyze(y: &[f64], config: &WtmmConfig) -> Result<WtmmResult> {
    let plane = cwt(
        y,
        &config.scales(y.len()),
        config.order,
        config.normalization,
    )?;
    let mut maxima = find_maxima(&plane);
    if config.chained {
        maxima = chain_maxima(&maxima);
    }
    let partition = partition_functions(&maxima, &config.q_values)?;
    let interior = config.interior_band(y.len());
    let (range, band) = match (config.fit_range, config.auto_band) {
        (Some(r), _) => (r, BandSource::Explicit),
        (None, false) => (interior, BandSource::Interior),
        (None, true) => match select_fit_band(&partition, config.band_tol, 4) {
            Some(r) => (r, BandSource::Auto),
            None => (interior, BandSource::AutoFallback),
        },
    };
    let spectrum = fit_spectrum(&partition, range)?;
    Ok(WtmmResult {
        partition,
        spectrum,
        band,
    })
}
