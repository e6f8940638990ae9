use serde::{Deserialize, Serialize};

use super::cwt::CwtPlane;

/// Maxima below this fraction of the plane's largest modulus are discarded.
pub const MODULUS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleMaxima {
    pub scale: f64,
    /// Positions of strict local maxima of `|T|`; plateaus report their midpoint.
    pub positions: Vec<f64>,
    pub moduli: Vec<f64>,
}

impl ScaleMaxima {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximaSet {
    /// One entry per plane scale, in increasing scale order.
    pub rows: Vec<ScaleMaxima>,
}

impl MaximaSet {
    pub fn counts(&self) -> Vec<usize> {
        self.rows.iter().map(ScaleMaxima::len).collect()
    }
}

/// Strict local maxima of `|row|` within `lo..=hi`.
///
/// A run of equal values counts once, at its midpoint, when both neighbours
/// are strictly smaller; runs touching the ends of the range are skipped.
pub fn row_maxima(row: &[f64], lo: usize, hi: usize, floor: f64) -> (Vec<f64>, Vec<f64>) {
    let mut positions = Vec::new();
    let mut moduli = Vec::new();
    let mut i = lo + 1;
    while i < hi {
        let v = row[i].abs();
        let mut j = i;
        while j < hi && row[j + 1].abs() == v {
            j += 1;
        }
        if j >= hi {
            break;
        }
        let left = row[i - 1].abs();
        let right = row[j + 1].abs();
        if v > left && v > right && v >= floor && v > 0.0 {
            positions.push(0.5 * (i + j) as f64);
            moduli.push(v);
        }
        i = j + 1;
    }
    (positions, moduli)
}

/// Per-scale modulus maxima over interior positions of the plane.
pub fn find_maxima(plane: &CwtPlane) -> MaximaSet {
    let floor = MODULUS_FLOOR * plane.max_modulus();
    let rows = plane
        .scales
        .iter()
        .zip(&plane.coeffs)
        .zip(&plane.interior)
        .map(|((&scale, row), range)| {
            let (positions, moduli) = match range {
                &Some((lo, hi)) if hi > lo + 1 => row_maxima(row, lo, hi, floor),
                _ => (Vec::new(), Vec::new()),
            };
            ScaleMaxima {
                scale,
                positions,
                moduli,
            }
        })
        .collect();
    MaximaSet { rows }
}

/// Keep only maxima connected to the finest scale through a chain of maxima
/// and replace each modulus by the supremum along its chain at finer scales.
///
/// A maximum at scale `s` links to the nearest maximum one scale finer if it
/// lies within `s` positions.
pub fn chain_maxima(set: &MaximaSet) -> MaximaSet {
    let mut rows: Vec<ScaleMaxima> = Vec::with_capacity(set.rows.len());
    let mut prev: Option<&ScaleMaxima> = None;
    let mut prev_sup: Vec<f64> = Vec::new();
    let mut prev_alive: Vec<bool> = Vec::new();
    for row in &set.rows {
        let (alive, sup): (Vec<bool>, Vec<f64>) = match prev {
            None => (vec![true; row.len()], row.moduli.clone()),
            Some(p) => row
                .positions
                .iter()
                .zip(&row.moduli)
                .map(|(&b, &m)| match nearest(&p.positions, b) {
                    Some(k) if (p.positions[k] - b).abs() <= row.scale && prev_alive[k] => {
                        (true, m.max(prev_sup[k]))
                    }
                    _ => (false, m),
                })
                .unzip(),
        };
        let mut kept = ScaleMaxima {
            scale: row.scale,
            positions: Vec::new(),
            moduli: Vec::new(),
        };
        for ((&b, &s), &a) in row.positions.iter().zip(&sup).zip(&alive) {
            if a {
                kept.positions.push(b);
                kept.moduli.push(s);
            }
        }
        rows.push(kept);
        prev = Some(row);
        prev_sup = sup;
        prev_alive = alive;
    }
    MaximaSet { rows }
}

fn nearest(sorted: &[f64], x: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let i = sorted.partition_point(|&v| v < x);
    let mut best = None;
    let mut dist = f64::INFINITY;
    for k in [i.wrapping_sub(1), i] {
        if let Some(&v) = sorted.get(k) {
            if (v - x).abs() < dist {
                dist = (v - x).abs();
                best = Some(k);
            }
        }
    }
    best
}
