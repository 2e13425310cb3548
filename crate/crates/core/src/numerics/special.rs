//! Log-gamma, log-beta and the regularized incomplete beta function.

use crate::error::{ensure, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Stirling series remainder `ln Γ(x) - [(x - ½) ln x - x + ln √(2π)]`, valid for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0
        + r2 * (-1.0 / 360.0
            + r2 * (1.0 / 1260.0
                + r2 * (-1.0 / 1680.0 + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0 + r2 * (1.0 / 156.0)))))))
}

/// Natural log of |Γ(x)|.
///
/// Lanczos (g = 7, 9 terms) below 10 with reflection under ½, Stirling with the
/// remainder series above.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 && x == x.floor() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        let s = (std::f64::consts::PI * x).sin().abs();
        return std::f64::consts::PI.ln() - s.ln() - ln_gamma(1.0 - x);
    }
    if x >= 10.0 {
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_correction(x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// `ln 𝓑(a, b)`.
///
/// Large arguments go through the Stirling remainders so that the leading
/// `x ln x` terms cancel analytically instead of numerically.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    ensure!(
        a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0,
        Domain,
        "log_beta requires finite positive arguments, got ({a}, {b})"
    );
    Ok(log_beta_unchecked(a, b))
}

pub(crate) fn log_beta_unchecked(a: f64, b: f64) -> f64 {
    let p = a.min(b);
    let q = a.max(b);
    let pq = p + q;
    if p >= 10.0 {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(pq);
        -0.5 * q.ln() + LN_SQRT_2PI + corr + (p - 0.5) * (p / pq).ln() + q * (-p / pq).ln_1p()
    } else if q >= 10.0 {
        let corr = stirling_correction(q) - stirling_correction(pq);
        ln_gamma(p) + corr + p - p * pq.ln() + (q - 0.5) * (-p / pq).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(pq)
    }
}

const CF_TOLERANCE: f64 = 1e-15;
const CF_MAX_ITER: usize = 300;
const CF_TINY: f64 = 1e-300;

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_TOLERANCE {
            return Ok(h);
        }
    }
    Err(Error::Numeric(format!("incomplete beta continued fraction did not converge for x={x}, a={a}, b={b}")))
}

fn check_beta_args(x: f64, a: f64, b: f64) -> Result<()> {
    ensure!((0.0..=1.0).contains(&x), Domain, "incomplete beta requires x in [0, 1], got {x}");
    ensure!(
        a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0,
        Domain,
        "incomplete beta requires finite positive shapes, got ({a}, {b})"
    );
    Ok(())
}

/// Both tails `(I_x(a,b), 1 - I_x(a,b))`, each evaluated without cancellation
/// on the side the continued fraction converges for.
pub fn beta_tails(x: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    check_beta_args(x, a, b)?;
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x == 1.0 {
        return Ok((1.0, 0.0));
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - log_beta_unchecked(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = (front * beta_continued_fraction(x, a, b)? / a).clamp(0.0, 1.0);
        Ok((lower, 1.0 - lower))
    } else {
        let upper = (front * beta_continued_fraction(1.0 - x, b, a)? / b).clamp(0.0, 1.0);
        Ok((1.0 - upper, upper))
    }
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    beta_tails(x, a, b).map(|(lower, _)| lower)
}

/// Value on the natural-log scale. `ln 0` is held as negative infinity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct LogValue(pub f64);

impl LogValue {
    pub const ZERO: LogValue = LogValue(f64::NEG_INFINITY);
    pub const ONE: LogValue = LogValue(0.0);

    pub fn from_linear(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            LogValue(v.ln())
        }
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl std::ops::Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        if self.is_zero() || rhs.is_zero() {
            LogValue::ZERO
        } else {
            LogValue(self.0 + rhs.0)
        }
    }
}

/// `ln Σ exp(v_i)`; returns the zero sentinel for an empty or all-zero input.
pub fn log_sum_exp(values: &[LogValue]) -> LogValue {
    let max = values.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return LogValue::ZERO;
    }
    if max == f64::INFINITY {
        return LogValue(f64::INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v.0 - max).exp()).sum();
    LogValue(max + sum.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial(n: u32) -> f64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..=60u32 {
            let want = ln_factorial(n - 1);
            let got = ln_gamma(n as f64);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn ln_gamma_half_integers() {
        // Γ(½) = √π, Γ(3/2) = √π/2, Γ(0.25)Γ(0.75) = π√2
        let ln_pi = std::f64::consts::PI.ln();
        assert!((ln_gamma(0.5) - 0.5 * ln_pi).abs() < 1e-14);
        assert!((ln_gamma(1.5) - (0.5 * ln_pi - 2f64.ln())).abs() < 1e-14);
        let refl = ln_gamma(0.25) + ln_gamma(0.75);
        assert!((refl - (ln_pi + 0.5 * 2f64.ln())).abs() < 1e-13);
    }

    #[test]
    fn log_beta_identities() {
        assert!(log_beta(1.0, 1.0).unwrap().abs() < 1e-15);
        assert!((log_beta(3.0, 3.0).unwrap() - (1.0f64 / 30.0).ln()).abs() < 1e-12);
        assert!((log_beta(0.5, 0.5).unwrap() - std::f64::consts::PI.ln()).abs() < 1e-12);
        assert_eq!(log_beta(2.5, 17.0).unwrap(), log_beta(17.0, 2.5).unwrap());
    }

    #[test]
    fn log_beta_rejects_bad_input() {
        assert!(log_beta(0.0, 1.0).is_err());
        assert!(log_beta(1.0, -2.0).is_err());
        assert!(log_beta(f64::INFINITY, 1.0).is_err());
        assert!(log_beta(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn log_beta_large_integer_arguments() {
        // 𝓑(a, b) = (a-1)!(b-1)!/(a+b-1)! with log-factorials summed directly.
        for &(a, b) in &[(10u32, 10u32), (40, 3), (200, 150), (1000, 7), (12, 5000)] {
            let want = ln_factorial(a - 1) + ln_factorial(b - 1) - ln_factorial(a + b - 1);
            let got = log_beta(a as f64, b as f64).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "({a},{b}) {got} vs {want}");
        }
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        assert!((reg_inc_beta(0.3, 1.0, 1.0).unwrap() - 0.3).abs() < 1e-14);
        assert!((reg_inc_beta(0.5, 2.0, 2.0).unwrap() - 0.5).abs() < 1e-14);
        // I_x(½,½) = (2/π) asin √x
        for x in [0.01f64, 0.2, 0.5, 0.77, 0.999] {
            let want = 2.0 / std::f64::consts::PI * x.sqrt().asin();
            assert!((reg_inc_beta(x, 0.5, 0.5).unwrap() - want).abs() < 1e-12);
        }
        // I_x(a,1) = x^a
        assert!((reg_inc_beta(0.4, 3.7, 1.0).unwrap() - 0.4f64.powf(3.7)).abs() < 1e-13);
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn incomplete_beta_domain_errors() {
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(1.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn log_sum_exp_handles_zero_sentinel() {
        assert!(log_sum_exp(&[]).is_zero());
        assert!(log_sum_exp(&[LogValue::ZERO, LogValue::ZERO]).is_zero());
        let v = log_sum_exp(&[LogValue::ZERO, LogValue(-1000.0), LogValue(-1000.0)]);
        assert!((v.ln() - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((LogValue::ZERO * LogValue(5.0)).is_zero());
    }
}
