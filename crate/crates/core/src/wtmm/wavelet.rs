//! Derivative-of-Gaussian analyzing wavelets.

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `d^n/dx^n exp(-x^2/2) = (-1)^n He_n(x) exp(-x^2/2)`, unnormalized.
pub fn dog_wavelet(n: u32, x: f64) -> f64 {
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * hermite(n, x) * (-0.5 * x * x).exp()
}

/// Half-width of the wavelet support in units of the scale.
pub const SUPPORT: f64 = 8.0;

/// Discrete taps `w_k = psi(k / scale) / scale` for `k` in `[-K, K]`, `K = floor(8 scale)`.
///
/// The sampled, truncated wavelet is projected so that its first `n` discrete
/// moments vanish exactly; the correction lies in the span of
/// `x^j exp(-x^2/2)` and is far below rounding for scales of a few samples.
#[derive(Debug, Clone)]
pub struct DogKernel {
    pub order: u32,
    pub scale: f64,
    pub half_width: usize,
    pub taps: Vec<f64>,
}

impl DogKernel {
    pub fn new(order: u32, scale: f64) -> Self {
        assert!(order >= 1 && scale > 0.0);
        let half_width = (SUPPORT * scale).floor() as usize;
        let xs: Vec<f64> = (0..=2 * half_width)
            .map(|i| (i as f64 - half_width as f64) / scale)
            .collect();
        let mut taps: Vec<f64> = xs.iter().map(|&x| dog_wavelet(order, x) / scale).collect();
        cancel_moments(&xs, &mut taps, order as usize);
        DogKernel {
            order,
            scale,
            half_width,
            taps,
        }
    }

    /// Tap at offset `k`, `|k| <= half_width`.
    pub fn tap(&self, k: isize) -> f64 {
        self.taps[(k + self.half_width as isize) as usize]
    }
}

fn cancel_moments(xs: &[f64], taps: &mut [f64], n: usize) {
    if xs.len() < n {
        return;
    }
    let gauss: Vec<f64> = xs.iter().map(|x| (-0.5 * x * x).exp()).collect();
    // m[r][c] = sum_k x^r * x^c g(x); rhs[r] = sum_k x^r w_k
    let mut m = vec![vec![0.0; n + 1]; n];
    for (i, &x) in xs.iter().enumerate() {
        let mut pr = 1.0;
        for r in 0..n {
            let mut pc = 1.0;
            for c in 0..n {
                m[r][c] += pr * pc * gauss[i];
                pc *= x;
            }
            m[r][n] += pr * taps[i];
            pr *= x;
        }
    }
    let Some(coef) = solve(m) else { return };
    for (i, &x) in xs.iter().enumerate() {
        let mut p = 1.0;
        let mut corr = 0.0;
        for c in &coef {
            corr += c * p;
            p *= x;
        }
        taps[i] -= corr * gauss[i];
    }
}

/// Gaussian elimination with partial pivoting on an augmented `n x (n+1)` system.
fn solve(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Symbolic fourth derivative of exp(-x^2/2).
    fn dog4_closed(x: f64) -> f64 {
        (x.powi(4) - 6.0 * x * x + 3.0) * (-0.5 * x * x).exp()
    }

    /// Central finite differences of the Gaussian, used as an independent oracle.
    fn finite_difference(n: u32, x: f64) -> f64 {
        let h: f64 = 1e-2;
        let g = |t: f64| (-0.5 * t * t).exp();
        // n-th central difference via binomial stencil
        let mut acc = 0.0;
        let mut binom = 1.0;
        for k in 0..=n {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * g(x + (n as f64 / 2.0 - k as f64) * h);
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
        acc / h.powi(n as i32)
    }

    #[test]
    fn dog_values_at_origin() {
        assert_eq!(dog_wavelet(4, 0.0), 3.0);
        assert_eq!(dog_wavelet(2, 0.0), -1.0);
    }

    #[test]
    fn dog4_matches_closed_form() {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            assert!((dog_wavelet(4, x) - dog4_closed(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn dog_matches_finite_differences() {
        for n in 1..=5 {
            for &x in &[-2.3, -0.7, 0.0, 0.4, 1.9] {
                let fd = finite_difference(n, x);
                assert!((dog_wavelet(n, x) - fd).abs() < 1e-3, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn continuous_moments_vanish() {
        // trapezoid quadrature on [-12, 12]
        let h = 1e-3;
        for n in 1..=6u32 {
            for k in 0..n {
                let mut s = 0.0;
                let steps = (24.0 / h) as i64;
                for i in 0..=steps {
                    let x = -12.0 + i as f64 * h;
                    let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                    s += w * x.powi(k as i32) * dog_wavelet(n, x);
                }
                assert!((s * h).abs() < 1e-8, "n={n} k={k}: {}", s * h);
            }
        }
    }

    #[test]
    fn discrete_taps_have_vanishing_moments() {
        for &scale in &[1.0, 2.5, 4.0, 13.7] {
            let kern = DogKernel::new(4, scale);
            let hw = kern.half_width as isize;
            for m in 0..4 {
                let s: f64 = (-hw..=hw)
                    .map(|k| (k as f64 / scale).powi(m) * kern.tap(k))
                    .sum();
                assert!(s.abs() < 1e-12, "scale={scale} m={m}: {s}");
            }
        }
    }

    #[test]
    fn correction_is_negligible_at_working_scales() {
        let kern = DogKernel::new(4, 4.0);
        for k in -32isize..=32 {
            let raw = dog_wavelet(4, k as f64 / 4.0) / 4.0;
            assert!((kern.tap(k) - raw).abs() < 1e-9, "{}", kern.tap(k) - raw);
        }
    }
}
