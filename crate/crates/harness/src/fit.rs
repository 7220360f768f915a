//! Rate estimates from sweep data.

/// Largest `q` with `binom(q+d, d) ≤ n`: the polynomial degree `n` nodes
/// can carry in `d` dimensions.
pub fn poly_degree(n: usize, d: usize) -> usize {
    let mut q = 0;
    while binom(q + 1 + d, d) <= n as u128 {
        q += 1;
    }
    q
}

fn binom(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Algebraic order predicted for `-Δ` (two derivatives lost).
pub fn predicted_order(n: usize, d: usize) -> f64 {
    poly_degree(n, d) as f64 + 1.0 - d as f64 / 2.0 - 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Ordinary least-squares line through `(x, y)`; needs two distinct `x`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Some(LineFit {
        slope,
        intercept,
        residual: (ss / n as f64).sqrt(),
    })
}

/// `p` in `e ≈ C·Hᵖ`, from log–log regression.
pub fn algebraic_rate(h: &[f64], e: &[f64]) -> Option<LineFit> {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    line_fit(&x, &y)
}

/// `γ` in `e ≈ C·exp(-γ/h)`, from regressing `ln e` on `-1/h`.
pub fn spectral_rate(h: &[f64], e: &[f64]) -> Option<LineFit> {
    let x: Vec<f64> = h.iter().map(|v| -1.0 / v).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    line_fit(&x, &y)
}

/// An error within 10× of `norm·1e-16` is at the rounding floor the
/// stability norm amplifies, and says nothing about convergence.
pub fn floor_limited(error: f64, stab_norm: Option<f64>) -> bool {
    match stab_norm {
        Some(s) => error <= 10.0 * s * 1e-16,
        None => false,
    }
}
