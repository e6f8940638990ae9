//! Reference signals with known scaling: white noise, fractional Brownian
//! motion and the deterministic binomial cascade.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OracleKind {
    WhiteNoise,
    Fbm { hurst: f64 },
    Cascade { weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    #[serde(flatten)]
    pub kind: OracleKind,
    pub length: usize,
    pub seed: u64,
}

impl OracleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::config("length", "must be >= 2"));
        }
        match self.kind {
            OracleKind::WhiteNoise => {}
            OracleKind::Fbm { hurst } => {
                if !(hurst > 0.0 && hurst < 1.0) {
                    return Err(Error::config(
                        "hurst",
                        format!("must lie in (0, 1), got {hurst}"),
                    ));
                }
            }
            OracleKind::Cascade { weight } => {
                if !(0.5..1.0).contains(&weight) {
                    return Err(Error::config(
                        "weight",
                        format!("must lie in [0.5, 1), got {weight}"),
                    ));
                }
                if !self.length.is_power_of_two() {
                    return Err(Error::config(
                        "length",
                        format!("must be a power of two for a cascade, got {}", self.length),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A generated reference path `y` and its first differences.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSeries {
    pub spec: OracleSpec,
    pub y: Vec<f64>,
    /// `a[0] = y[0]`, `a[t] = y[t] - y[t-1]`.
    pub a: Vec<f64>,
    /// Set when the exact fBm embedding failed and negative eigenvalues were clipped.
    pub approximate: bool,
}

pub fn generate(spec: &OracleSpec) -> Result<OracleSeries> {
    spec.validate()?;
    let (a, approximate) = match spec.kind {
        OracleKind::WhiteNoise => (gen_white_noise(spec.length, spec.seed), false),
        OracleKind::Fbm { hurst } => {
            let f = gen_fgn(spec.length, hurst, spec.seed);
            (f.noise, f.approximate)
        }
        OracleKind::Cascade { weight } => {
            let depth = spec.length.trailing_zeros();
            let (mass, y) = integrated_cascade(weight, depth);
            return Ok(OracleSeries {
                spec: *spec,
                y,
                a: mass,
                approximate: false,
            });
        }
    };
    let y = cumulative(&a);
    Ok(OracleSeries {
        spec: *spec,
        y,
        a,
        approximate,
    })
}

/// Kahan-compensated running sum.
pub fn cumulative(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in a {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
        out.push(sum);
    }
    out
}

/// I.i.d. standard Gaussian samples.
pub fn gen_white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    let e = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Eigenvalues of the minimal circulant embedding (size `2n`) of the fGn covariance.
pub fn circulant_eigenvalues(n: usize, hurst: f64) -> Vec<f64> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(fgn_autocovariance(hurst, lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    row.into_iter().map(|c| c.re).collect()
}

pub struct Fgn {
    pub noise: Vec<f64>,
    pub approximate: bool,
}

/// Fractional Gaussian noise by circulant embedding.
pub fn gen_fgn(n: usize, hurst: f64, seed: u64) -> Fgn {
    let mut eig = circulant_eigenvalues(n, hurst);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    // rounding leaves eigenvalues of order -1e-16 for valid embeddings
    let approximate = min < -1e-10;
    for v in eig.iter_mut() {
        *v = v.max(0.0);
    }
    if approximate {
        log::warn!("circulant embedding not nonnegative (min eigenvalue {min:e}); clipped, output approximate");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
    Fgn {
        noise: fgn_from_normals(&eig, &z),
        approximate,
    }
}

/// Map `2n` standard normals to `n` fGn samples using the embedding eigenvalues.
///
/// The map is linear in `z`; feeding unit vectors recovers the covariance exactly.
pub fn fgn_from_normals(eig: &[f64], z: &[f64]) -> Vec<f64> {
    let m = eig.len();
    let n = m / 2;
    assert_eq!(z.len(), m);
    let mut w = vec![Complex::new(0.0, 0.0); m];
    let mf = m as f64;
    w[0] = Complex::new((eig[0] / mf).sqrt() * z[0], 0.0);
    w[n] = Complex::new((eig[n] / mf).sqrt() * z[1], 0.0);
    for k in 1..n {
        let s = (eig[k] / (2.0 * mf)).sqrt();
        let v = Complex::new(s * z[2 * k], s * z[2 * k + 1]);
        w[k] = v;
        w[m - k] = v.conj();
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut w);
    w[..n].iter().map(|c| c.re).collect()
}

/// Fractional Brownian motion path of length `n` (running sum of fGn).
pub fn gen_fbm(n: usize, hurst: f64, seed: u64) -> Result<OracleSeries> {
    generate(&OracleSpec {
        kind: OracleKind::Fbm { hurst },
        length: n,
        seed,
    })
}

/// Binomial measure on `2^depth` cells: each split sends `weight` to the left
/// half and `1 - weight` to the right.
pub fn cascade_measure(weight: f64, depth: u32) -> Vec<f64> {
    let mut mass = vec![1.0];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(mass.len() * 2);
        for m in mass {
            next.push(m * weight);
            next.push(m * (1.0 - weight));
        }
        mass = next;
    }
    mass
}

/// Integrated binomial cascade (its devil's staircase), length `2^depth`.
/// Cell masses and the integrated measure at each cell's right edge.
///
/// The integral is refined top-down: a child block's right edge either
/// inherits its parent's value or adds the left child's mass to the parent's
/// start, so every dyadic boundary carries its exact parent value and the
/// final value is exactly 1.
fn integrated_cascade(weight: f64, depth: u32) -> (Vec<f64>, Vec<f64>) {
    let mut mass = vec![1.0];
    let mut ends = vec![1.0];
    for _ in 0..depth {
        let mut next_mass = Vec::with_capacity(mass.len() * 2);
        let mut next_ends = Vec::with_capacity(ends.len() * 2);
        let mut start = 0.0;
        for (&m, &end) in mass.iter().zip(&ends) {
            let left = m * weight;
            next_mass.push(left);
            next_mass.push(m * (1.0 - weight));
            next_ends.push(start + left);
            next_ends.push(end);
            start = end;
        }
        mass = next_mass;
        ends = next_ends;
    }
    (mass, ends)
}

pub fn gen_cascade(weight: f64, depth: u32) -> Result<OracleSeries> {
    generate(&OracleSpec {
        kind: OracleKind::Cascade { weight },
        length: 1usize << depth,
        seed: 0,
    })
}

/// Mass exponent `tau(q) = -log2(p^q + (1-p)^q)` of the binomial cascade.
pub fn cascade_tau(weight: f64, q: f64) -> f64 {
    -(weight.powf(q) + (1.0 - weight).powf(q)).log2()
}

/// Hölder exponent `h(q) = tau'(q)` of the binomial cascade.
pub fn cascade_h(weight: f64, q: f64) -> f64 {
    let (a, b) = (weight.powf(q), (1.0 - weight).powf(q));
    -(a * weight.log2() + b * (1.0 - weight).log2()) / (a + b)
}

/// `D(h(q)) = q h(q) - tau(q)`.
pub fn cascade_d(weight: f64, q: f64) -> f64 {
    q * cascade_h(weight, q) - cascade_tau(weight, q)
}
