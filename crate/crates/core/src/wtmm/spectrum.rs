use serde::{Deserialize, Serialize};

use super::partition::PartitionFunctions;
use crate::error::{Error, Result};
use crate::fit::linear_fit;

/// Spectrum extrema: `h_l = h(q_max)`, `h_0 = h(0)`, `h_r = h(q_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub h_l: f64,
    pub h_0: f64,
    pub h_r: f64,
    /// `D(h_0)`, the top of the spectrum.
    pub d_top: f64,
}

impl Extrema {
    pub fn width(&self) -> f64 {
        self.h_r - self.h_l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularitySpectrum {
    pub q_values: Vec<f64>,
    pub h: Vec<f64>,
    pub d: Vec<f64>,
    pub r2_h: Vec<f64>,
    pub r2_d: Vec<f64>,
    /// Inclusive scale band used for the fits.
    pub fit_range: (f64, f64),
    pub extrema: Extrema,
}

fn interpolate_at(q: &[f64], v: &[f64], x: f64) -> f64 {
    if let Some(i) = q.iter().position(|&a| a == x) {
        return v[i];
    }
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| q[a].partial_cmp(&q[b]).unwrap());
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        if q[a] <= x && x <= q[b] {
            return v[a] + (x - q[a]) / (q[b] - q[a]) * (v[b] - v[a]);
        }
    }
    // outside the grid: nearest end
    let nearest = idx
        .iter()
        .min_by(|&&a, &&b| (q[a] - x).abs().partial_cmp(&(q[b] - x).abs()).unwrap())
        .copied()
        .unwrap();
    v[nearest]
}

fn band_indices(pf: &PartitionFunctions, range: (f64, f64)) -> Vec<usize> {
    let tol = 1e-9 * range.1.abs().max(1.0);
    pf.scales
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= range.0 - tol && s <= range.1 + tol)
        .map(|(j, _)| j)
        .collect()
}

/// Slopes of `Z` and `Z*` against `ln tau` over `fit_range`.
pub fn fit_spectrum(pf: &PartitionFunctions, fit_range: (f64, f64)) -> Result<SingularitySpectrum> {
    let idx = band_indices(pf, fit_range);
    if idx.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "fit range [{}, {}] holds {} usable scales, need at least 4",
            fit_range.0,
            fit_range.1,
            idx.len()
        )));
    }
    let x: Vec<f64> = idx.iter().map(|&j| pf.scales[j].ln()).collect();
    let nq = pf.q_values.len();
    let (mut h, mut d, mut r2_h, mut r2_d) = (
        Vec::with_capacity(nq),
        Vec::with_capacity(nq),
        Vec::with_capacity(nq),
        Vec::with_capacity(nq),
    );
    for i in 0..nq {
        let zy: Vec<f64> = idx.iter().map(|&j| pf.z[i][j]).collect();
        let sy: Vec<f64> = idx.iter().map(|&j| pf.zstar[i][j]).collect();
        let fz = linear_fit(&x, &zy).expect("distinct scales");
        let fs = linear_fit(&x, &sy).expect("distinct scales");
        h.push(fz.slope);
        r2_h.push(fz.r2);
        d.push(fs.slope);
        r2_d.push(fs.r2);
    }
    let mut spec = SingularitySpectrum {
        q_values: pf.q_values.clone(),
        h,
        d,
        r2_h,
        r2_d,
        fit_range: (pf.scales[idx[0]], pf.scales[*idx.last().unwrap()]),
        extrema: Extrema {
            h_l: f64::NAN,
            h_0: f64::NAN,
            h_r: f64::NAN,
            d_top: f64::NAN,
        },
    };
    spec.extrema = spectrum_extrema(&spec);
    Ok(spec)
}

pub fn spectrum_extrema(spec: &SingularitySpectrum) -> Extrema {
    let q = &spec.q_values;
    let imax = (0..q.len())
        .max_by(|&a, &b| q[a].partial_cmp(&q[b]).unwrap())
        .unwrap();
    let imin = (0..q.len())
        .min_by(|&a, &b| q[a].partial_cmp(&q[b]).unwrap())
        .unwrap();
    Extrema {
        h_l: spec.h[imax],
        h_0: interpolate_at(q, &spec.h, 0.0),
        h_r: spec.h[imin],
        d_top: interpolate_at(q, &spec.d, 0.0),
    }
}

/// Widest contiguous band of scales (at least `min_points`) over which every
/// `Z(q; .)` curve is straight: the local slopes between neighbouring scales
/// spread by less than `rel_tol` of their mean magnitude. Ties in width go to
/// the band with the smallest worst-case spread. `None` when no band qualifies.
pub fn select_fit_band(
    pf: &PartitionFunctions,
    rel_tol: f64,
    min_points: usize,
) -> Option<(f64, f64)> {
    let n = pf.scales.len();
    let min_points = min_points.max(3);
    if n < min_points {
        return None;
    }
    let ln: Vec<f64> = pf.scales.iter().map(|s| s.ln()).collect();
    let local: Vec<Vec<f64>> =
        pf.z.iter()
            .map(|row| {
                (0..n - 1)
                    .map(|j| (row[j + 1] - row[j]) / (ln[j + 1] - ln[j]))
                    .collect()
            })
            .collect();
    let spread = |a: usize, b: usize| -> f64 {
        // slopes a..b-1 cover scales a..=b
        local
            .iter()
            .map(|s| {
                let w = &s[a..b];
                let mean = w.iter().sum::<f64>() / w.len() as f64;
                let (lo, hi) = w
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                        (l.min(v), h.max(v))
                    });
                (hi - lo) / mean.abs().max(1e-3)
            })
            .fold(0.0, f64::max)
    };
    let mut best: Option<(usize, usize, f64)> = None;
    for width in (min_points..=n).rev() {
        for a in 0..=n - width {
            let b = a + width - 1;
            let s = spread(a, b);
            if s < rel_tol && best.is_none_or(|(_, _, bs)| s < bs) {
                best = Some((a, b, s));
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.map(|(a, b, _)| (pf.scales[a], pf.scales[b]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(h: impl Fn(f64) -> f64, d: impl Fn(f64) -> f64) -> PartitionFunctions {
        let q_values: Vec<f64> = (-4..=4).map(|i| i as f64).collect();
        let scales: Vec<f64> = (0..10).map(|i| 4.0 * 1.5f64.powi(i)).collect();
        let z = q_values
            .iter()
            .map(|&q| scales.iter().map(|s| h(q) * s.ln() + 0.3 * q).collect())
            .collect();
        let zstar = q_values
            .iter()
            .map(|&q| scales.iter().map(|s| d(q) * s.ln() - 2.0).collect())
            .collect();
        PartitionFunctions {
            counts: vec![10; scales.len()],
            q_values,
            scales,
            z,
            zstar,
            dropped: vec![],
        }
    }

    #[test]
    fn recovers_linear_partition_slopes() {
        let pf = synthetic(|q| 0.7 - 0.05 * q, |q| 1.0 - 0.01 * q * q);
        let spec = fit_spectrum(&pf, (4.0, 200.0)).unwrap();
        for (i, &q) in spec.q_values.iter().enumerate() {
            assert!((spec.h[i] - (0.7 - 0.05 * q)).abs() < 1e-12);
            assert!((spec.d[i] - (1.0 - 0.01 * q * q)).abs() < 1e-12);
        }
        let e = spec.extrema;
        assert!((e.h_l - 0.5).abs() < 1e-12);
        assert!((e.h_r - 0.9).abs() < 1e-12);
        assert!((e.h_0 - 0.7).abs() < 1e-12);
        assert!((e.d_top - 1.0).abs() < 1e-12);
        assert!((e.width() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn too_few_scales_in_range() {
        let pf = synthetic(|_| 0.5, |_| 1.0);
        assert!(fit_spectrum(&pf, (4.0, 10.0)).is_err());
    }

    #[test]
    fn band_selection_finds_the_straight_part() {
        // straight up to scale index 6, then saturates
        let mut pf = synthetic(|_| 0.5, |_| 1.0);
        for row in pf.z.iter_mut() {
            let knee = row[6];
            for v in row.iter_mut().skip(7) {
                *v = knee;
            }
        }
        let (lo, hi) = select_fit_band(&pf, 0.15, 4).unwrap();
        assert_eq!(lo, pf.scales[0]);
        assert_eq!(hi, pf.scales[6]);
    }

    #[test]
    fn band_selection_gives_up_on_curved_partitions() {
        let mut pf = synthetic(|_| 0.5, |_| 1.0);
        for row in pf.z.iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (j as f64).powi(2);
            }
        }
        assert_eq!(select_fit_band(&pf, 0.15, 4), None);
    }
}
