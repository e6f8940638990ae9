//! Least-squares helpers shared by the scaling fits.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when `y` is constant and fitted exactly.
    pub r2: f64,
}

/// Ordinary least squares `y = slope * x + intercept`. Needs two distinct `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - slope * xi - intercept).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - sse / syy).max(0.0)
    } else {
        1.0
    };
    Some(LineFit {
        slope,
        intercept,
        r2,
    })
}

/// Least-squares slope of `y = slope * x` (line through the origin).
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> Option<f64> {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx)
}

/// `n` points log-spaced over `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo);
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Log-spaced integer lags over `[lo, hi]`, deduplicated after rounding.
pub fn log_lags(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    let mut lags: Vec<usize> = log_space(lo as f64, hi as f64, n)
        .into_iter()
        .map(|v| v.round() as usize)
        .collect();
    lags.dedup();
    lags
}
