use super::special::ln_gamma;
use crate::error::{ensure, Result};

/// `ln C(n, k)` for `k <= n`.
pub fn ln_choose(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn check(k: u32, n: u32, p: f64) -> Result<()> {
    ensure!(k <= n, Domain, "binomial count k={k} exceeds n={n}");
    ensure!((0.0..=1.0).contains(&p), Domain, "binomial probability {p} outside [0, 1]");
    Ok(())
}

fn pmf_unchecked(k: u32, n: u32, p: f64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln = ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p();
    ln.exp()
}

/// Binomial probability mass `P(X = k)`, `X ~ Binomial(n, p)`.
pub fn binom_pmf(k: u32, n: u32, p: f64) -> Result<f64> {
    check(k, n, p)?;
    Ok(pmf_unchecked(k, n, p))
}

/// Binomial distribution function `P(X <= k)`.
pub fn binom_cdf(k: u32, n: u32, p: f64) -> Result<f64> {
    check(k, n, p)?;
    if k == n {
        return Ok(1.0);
    }
    let s: f64 = (0..=k).map(|j| pmf_unchecked(j, n, p)).sum();
    Ok(s.min(1.0))
}

/// Upper tail `P(X > k)`, summed directly so small tails keep relative precision.
/// Any `k >= n` gives 0.
pub fn binom_sf(k: i64, n: u32, p: f64) -> Result<f64> {
    ensure!((0.0..=1.0).contains(&p), Domain, "binomial probability {p} outside [0, 1]");
    if k < 0 {
        return Ok(1.0);
    }
    if k >= n as i64 {
        return Ok(0.0);
    }
    let s: f64 = ((k as u32 + 1)..=n).map(|j| pmf_unchecked(j, n, p)).sum();
    Ok(s.min(1.0))
}
