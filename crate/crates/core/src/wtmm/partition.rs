use serde::{Deserialize, Serialize};

use super::maxima::MaximaSet;
use crate::error::{Error, Result};

/// Partition sums over the modulus maxima at each retained scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFunctions {
    pub q_values: Vec<f64>,
    /// Scales with at least two maxima, increasing.
    pub scales: Vec<f64>,
    /// Number of maxima `M(tau)` at each retained scale.
    pub counts: Vec<usize>,
    /// `z[i][j] = Z(q_i; tau_j) = sum_k T̂_k ln|T_k|`
    pub z: Vec<Vec<f64>>,
    /// `zstar[i][j] = Z*(q_i; tau_j) = sum_k T̂_k ln T̂_k`
    pub zstar: Vec<Vec<f64>>,
    /// Scales left out for having fewer than two maxima.
    pub dropped: Vec<f64>,
}

/// `T̂_k = |T_k|^q / sum_j |T_j|^q`, evaluated in log space.
pub fn weights(moduli: &[f64], q: f64) -> Vec<f64> {
    if moduli.is_empty() {
        return Vec::new();
    }
    if q == 0.0 {
        return vec![1.0 / moduli.len() as f64; moduli.len()];
    }
    let logs: Vec<f64> = moduli.iter().map(|m| q * m.ln()).collect();
    let lse = log_sum_exp(&logs);
    logs.iter().map(|l| (l - lse).exp()).collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `(Z(q; tau), Z*(q; tau))` for one scale.
pub fn partition_at(moduli: &[f64], q: f64) -> (f64, f64) {
    let logs: Vec<f64> = moduli.iter().map(|m| m.ln()).collect();
    if q == 0.0 {
        let n = moduli.len() as f64;
        let z = logs.iter().sum::<f64>() / n;
        return (z, -n.ln());
    }
    let ql: Vec<f64> = logs.iter().map(|l| q * l).collect();
    let lse = log_sum_exp(&ql);
    let mut z = 0.0;
    let mut zs = 0.0;
    for (l, qlk) in logs.iter().zip(&ql) {
        let log_w = qlk - lse;
        let w = log_w.exp();
        z += w * l;
        zs += w * log_w;
    }
    (z, zs)
}

pub fn partition_functions(set: &MaximaSet, q_values: &[f64]) -> Result<PartitionFunctions> {
    if q_values.is_empty() {
        return Err(Error::InsufficientData("empty q grid".into()));
    }
    let mut scales = Vec::new();
    let mut counts = Vec::new();
    let mut dropped = Vec::new();
    let mut z = vec![Vec::new(); q_values.len()];
    let mut zstar = vec![Vec::new(); q_values.len()];
    for row in &set.rows {
        if row.len() < 2 {
            dropped.push(row.scale);
            continue;
        }
        scales.push(row.scale);
        counts.push(row.len());
        for (i, &q) in q_values.iter().enumerate() {
            let (a, b) = partition_at(&row.moduli, q);
            z[i].push(a);
            zstar[i].push(b);
        }
    }
    if scales.is_empty() {
        return Err(Error::AllScalesDropped);
    }
    Ok(PartitionFunctions {
        q_values: q_values.to_vec(),
        scales,
        counts,
        z,
        zstar,
        dropped,
    })
}
