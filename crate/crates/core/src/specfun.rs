//! Special functions: the standard normal distribution function and the
//! modified Bessel function of the first kind `I_nu(x)` for real order
//! `nu >= 0` and real argument `x >= 0`.
//!
//! `I_nu` is evaluated in one of three regimes:
//!
//! * ascending power series for `x < max(30, 2 nu^2)` and small order;
//! * Hankel's large-argument expansion for `x >= max(30, 2 nu^2)`;
//! * Debye's uniform expansion in `x / nu` for large order below the Hankel
//!   switchover, where the power series would need `O(x)` terms.
//!
//! Every regime works on the exponentially scaled value `exp(-x) I_nu(x)` in
//! log form, so nothing overflows; [`bessel_i`] only fails when the unscaled
//! result itself is not representable.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Truncation policy for infinite series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTolerances {
    /// Relative threshold under which a term counts as negligible.
    pub term_tol: f64,
    /// Hard cap on the number of terms.
    pub max_terms: usize,
}

impl Default for SeriesTolerances {
    fn default() -> Self {
        Self {
            term_tol: 1e-12,
            max_terms: 200,
        }
    }
}

impl SeriesTolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.term_tol > 0.0 && self.term_tol.is_finite()) {
            return domain(format!("term_tol must be positive, got {}", self.term_tol));
        }
        if self.max_terms < 8 {
            return domain(format!("max_terms must be at least 8, got {}", self.max_terms));
        }
        Ok(())
    }
}

/// Standard normal distribution function.
///
/// The upper half is computed as the complement of the lower half, which
/// makes `N(x) + N(-x) == 1` hold to one rounding.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let tail = 0.5 * libm::erfc(x.abs() * std::f64::consts::FRAC_1_SQRT_2);
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

// Orders at and above this use the uniform expansion when the argument is
// below the Hankel switchover.
const DEBYE_MIN_ORDER: f64 = 12.0;
const DEBYE_TERMS: usize = 14;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `exp(-x) I_nu(x)`; never overflows. Finite for every `nu >= 0`, `x >= 0`
/// (see [`log_bessel_i_scaled`] for orders in `(-1, 0)`).
pub fn bessel_i_scaled(order: f64, x: f64) -> f64 {
    let l = log_bessel_i_scaled(order, x);
    if l == f64::NEG_INFINITY {
        0.0
    } else {
        l.exp()
    }
}

/// `ln I_nu(x)`. Returns `-inf` at `x = 0` for `nu > 0`.
pub fn log_bessel_i(order: f64, x: f64) -> f64 {
    log_bessel_i_scaled(order, x) + x
}

/// `I_nu(x)`.
///
/// Fails with [`Error::Overflow`] when the value exceeds `f64::MAX`.
pub fn bessel_i(order: f64, x: f64) -> Result<f64> {
    if !(order >= 0.0 && x >= 0.0) {
        return domain(format!("bessel_i needs order >= 0 and x >= 0, got ({order}, {x})"));
    }
    let l = log_bessel_i(order, x);
    if l > f64::MAX.ln() {
        return Err(Error::Overflow(x));
    }
    Ok(if l == f64::NEG_INFINITY { 0.0 } else { l.exp() })
}

/// `ln(exp(-x) I_nu(x))`.
///
/// Orders in `(-1, 0)` are accepted as well: the power series and the
/// Hankel expansion both hold there (the latter up to a relative `exp(-2x)`).
pub fn log_bessel_i_scaled(order: f64, x: f64) -> f64 {
    debug_assert!(order > -1.0 && x >= 0.0, "bessel order/argument out of range");
    if x.is_nan() || order.is_nan() {
        return f64::NAN;
    }
    if x == 0.0 {
        return match order {
            0.0 => 0.0,
            o if o > 0.0 => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
    }
    if x >= (2.0 * order * order).max(30.0) {
        hankel_log_scaled(order, x)
    } else if order >= DEBYE_MIN_ORDER {
        debye_log_scaled(order, x)
    } else {
        series_log_scaled(order, x)
    }
}

fn series_log_scaled(order: f64, x: f64) -> f64 {
    // sum_k (x/2)^(2k+nu) / (k! Gamma(k+nu+1)); all terms positive.
    let half = 0.5 * x;
    let q = half * half;
    let mut log_offset = order * half.ln() - ln_gamma(order + 1.0) - x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + order));
        sum += term;
        if term < 1e-17 * sum && k * (k + order) > q {
            break;
        }
        if sum > 1e250 {
            sum *= 1e-250;
            term *= 1e-250;
            log_offset += 250.0 * std::f64::consts::LN_10;
        }
    }
    log_offset + sum.ln()
}

fn hankel_log_scaled(order: f64, x: f64) -> f64 {
    // exp(-x) I_nu(x) ~ (2 pi x)^(-1/2) sum_k (-1)^k a_k(nu) / x^k
    let mu = 4.0 * order * order;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() && k > 1.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() || term == 0.0 {
            break;
        }
    }
    sum.ln() - 0.5 * (LN_2PI + x.ln())
}

fn debye_log_scaled(order: f64, x: f64) -> f64 {
    // I_nu(nu z) ~ exp(nu eta) / (sqrt(2 pi nu) (1+z^2)^(1/4)) sum_k u_k(p) / nu^k
    let z = x / order;
    let w = (1.0 + z * z).sqrt();
    let p = 1.0 / w;
    // nu*eta - x, arranged to avoid cancellation between nu*w and nu*z.
    let exponent = order / (w + z) + order * (z / (1.0 + w)).ln();
    let polys = debye_polynomials();
    let mut sum = 0.0;
    let mut scale = 1.0;
    for poly in polys.iter() {
        let term = eval_poly(poly, p) * scale;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        scale /= order;
    }
    exponent - 0.5 * (LN_2PI + order.ln()) - 0.25 * (1.0 + z * z).ln() + sum.ln()
}

fn eval_poly(coeffs: &[f64], p: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * p + c)
}

/// Coefficients (ascending powers of `p`) of Debye's polynomials `u_k(p)`,
/// generated from `u_{k+1} = p^2 (1 - p^2) u_k' / 2 + (1/8) int_0^p (1 - 5t^2) u_k(t) dt`.
fn debye_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS - 1 {
            let u = &out[k];
            let mut next = vec![0.0; u.len() + 3];
            // p^2 (1 - p^2) u'(p) / 2
            for (j, &c) in u.iter().enumerate().skip(1) {
                let d = c * j as f64 * 0.5;
                next[j + 1] += d;
                next[j + 3] -= d;
            }
            // (1/8) int_0^p (1 - 5 t^2) u(t) dt
            for (j, &c) in u.iter().enumerate() {
                next[j + 1] += c / (8.0 * (j + 1) as f64);
                next[j + 3] -= 5.0 * c / (8.0 * (j + 3) as f64);
            }
            out.push(next);
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert_eq!(normal_cdf(40.0), 1.0);
        assert_eq!(normal_cdf(-40.0), 0.0);
        // mpmath: N(1.959964) = 0.97500000090355759...
        assert!((normal_cdf(1.959964) - 0.975_000_000_903_557_6).abs() < 1e-15);
        for i in 0..2000 {
            let x = -10.0 + 0.01 * i as f64;
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() <= 1e-15);
            assert!(normal_cdf(x + 0.01) >= normal_cdf(x));
        }
    }

    #[test]
    fn debye_polynomials_match_known_low_orders() {
        let u = debye_polynomials();
        // u1 = (3p - 5p^3)/24, u2 = (81p^2 - 462p^4 + 385p^6)/1152
        let p: f64 = 0.37;
        assert!((eval_poly(&u[1], p) - (3.0 * p - 5.0 * p.powi(3)) / 24.0).abs() < 1e-16);
        let u2 = (81.0 * p.powi(2) - 462.0 * p.powi(4) + 385.0 * p.powi(6)) / 1152.0;
        assert!((eval_poly(&u[2], p) - u2).abs() < 1e-16);
    }

    #[test]
    fn trivial_values() {
        assert_eq!(bessel_i(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1.3, 0.0).unwrap(), 0.0);
        let exact = (2.0 / std::f64::consts::PI).sqrt() * 1f64.sinh();
        assert!(rel(bessel_i(0.5, 1.0).unwrap(), exact) < 1e-12);
    }

    #[test]
    fn half_integer_closed_forms() {
        // I_{1/2}(x) = sqrt(2/(pi x)) sinh x, I_{3/2}(x) = sqrt(2/(pi x)) (cosh x - sinh x / x)
        // (x <= 0.1 leaves I_{3/2}'s closed form to cancellation, so it is skipped there.)
        for &x in &[0.01, 0.3, 1.0, 4.5, 12.0, 29.0, 31.0, 60.0, 300.0] {
            let c = (2.0 / (std::f64::consts::PI * x)).sqrt();
            let i_half = c * x.sinh();
            let i_three_half = c * (x.cosh() - x.sinh() / x);
            assert!(rel(bessel_i(0.5, x).unwrap(), i_half) < 1e-12, "x={x}");
            if x > 0.1 {
                assert!(rel(bessel_i(1.5, x).unwrap(), i_three_half) < 1e-12, "x={x}");
            }
        }
    }

    #[test]
    fn matches_high_precision_reference() {
        // (order, x, exp(-x) I_order(x)) from mpmath at 40 digits.
        let cases = [
            (2.4, 3.7, 3.660_479_251_539_610_6 * (-3.7f64).exp()),
            (0.7, 12.5, 0.111_713_200_829_344_40),
            (5.3, 40.0, 0.044_365_235_457_619_418),
            (20.5, 35.0, 1.812_006_911_289_989_6e-4),
            (17.0, 900.0, 0.011_326_195_840_510_320),
            (1.6, 0.01, 1.441_422_304_127_940_9e-4),
            (40.0, 10.0, 9.271_225_320_538_454_6e-25),
        ];
        for (nu, x, expected) in cases {
            let got = bessel_i_scaled(nu, x);
            assert!(rel(got, expected) < 1e-10, "nu={nu} x={x}: {got} vs {expected}");
        }
        assert!(rel(bessel_i(2.4, 3.7).unwrap(), 3.660_479_251_539_610_6) < 1e-10);
    }

    #[test]
    fn log_scale_examples() {
        // mpmath: ln I_0(700) = 695.80569999844344...
        assert!((log_bessel_i(0.0, 700.0) - 695.805_699_998_443_4).abs() < 1e-10);
        let approx = 700.0 - 0.5 * (1400.0 * std::f64::consts::PI).ln();
        assert!((log_bessel_i(0.0, 700.0) - approx).abs() < 1.0 / 700.0);
        // The next series term is (x/2)^2/(nu+1) = 5.6e-8 relative, so the
        // leading term alone is only good to about 6e-8.
        let lead = 3.5 * (0.5e-3f64).ln() - ln_gamma(4.5);
        assert!((log_bessel_i(3.5, 1e-3) - lead).abs() < 1e-7);
        assert!((log_bessel_i(3.5, 1e-3) + 29.056_895_123_684_175).abs() < 1e-12);
        assert!(matches!(bessel_i(0.0, 800.0), Err(Error::Overflow(_))));
        for &(nu, x) in &[(0.0, 2.0), (3.3, 25.0), (11.0, 90.0), (2.0, 500.0)] {
            let direct = bessel_i(nu, x).unwrap();
            assert!(rel(log_bessel_i(nu, x).exp(), direct) < 1e-10);
        }
    }

    #[test]
    fn regimes_agree_across_switchovers() {
        // Either side of x = max(30, 2 nu^2) and of the large-order cutoff.
        for &nu in &[0.0f64, 0.5, 1.7, 3.9, 5.0] {
            let x0 = (2.0 * nu * nu).max(30.0);
            let a = series_log_scaled(nu, x0);
            let b = hankel_log_scaled(nu, x0);
            assert!((a - b).abs() < 1e-11, "nu={nu}: {a} vs {b}");
        }
        for &nu in &[12.0, 13.5, 18.0, 25.0] {
            for &x in &[0.5, 5.0, 40.0, 2.0 * nu * nu] {
                let a = series_log_scaled(nu, x);
                let b = debye_log_scaled(nu, x);
                assert!((a - b).abs() < 1e-11, "nu={nu} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn recurrence_residual_on_grid() {
        // I_{nu-1} - I_{nu+1} = (2 nu / x) I_nu
        let mut worst: f64 = 0.0;
        for i in 0..=38 {
            let nu = 0.5 + 0.25 * i as f64;
            for j in 0..=60 {
                let x = 0.1 + 0.4983 * j as f64;
                let lhs = bessel_i_scaled(nu - 1.0, x) - bessel_i_scaled(nu + 1.0, x);
                let rhs = 2.0 * nu / x * bessel_i_scaled(nu, x);
                worst = worst.max(((lhs - rhs) / rhs).abs());
                assert!(rhs > 0.0);
            }
        }
        assert!(worst < 1e-8, "worst recurrence residual {worst}");
    }

    proptest::proptest! {
        #[test]
        fn positive_and_decreasing_in_order(nu in 0.0f64..40.0, x in 1e-3f64..2000.0) {
            let a = bessel_i_scaled(nu, x);
            let b = bessel_i_scaled(nu + 0.5, x);
            proptest::prop_assert!(a > 0.0 || nu > 0.0);
            proptest::prop_assert!(b <= a * (1.0 + 1e-12));
        }
    }
}
