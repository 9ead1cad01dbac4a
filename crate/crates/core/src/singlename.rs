//! One-dimensional Black-Cox machinery for the surviving firm.
//!
//! Once the counterparty (firm 2) has defaulted at time `t`, only firm 1's
//! distance to its barrier matters. With `mu = Y/sigma1` the scaled
//! log-distance, firm 1's remaining default time is the first passage of a
//! Brownian motion with drift `beta = nu1/sigma1` through zero. The functions
//! here give its distribution, its discounted Laplace-type functional and the
//! value of the CDS at that moment.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{CdsContract, FirmParams, MarketParams, WedgeGeometry};
use crate::specfun::normal_cdf;

/// Drift and rate constants of the surviving firm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleNameCoeffs {
    pub nu1: f64,
    /// `sqrt(nu1^2/sigma1^2 + 2r)`.
    pub rate_alpha: f64,
    /// `nu1 / sigma1`.
    pub beta: f64,
    pub sigma1: f64,
}

impl SingleNameCoeffs {
    pub fn new(nu1: f64, sigma1: f64, r: f64) -> Result<Self> {
        if !(sigma1 > 0.0) {
            return domain(format!("sigma1 must be positive, got {sigma1}"));
        }
        if !(r >= 0.0) {
            return domain(format!("r must be >= 0, got {r}"));
        }
        let beta = nu1 / sigma1;
        Ok(Self {
            nu1,
            rate_alpha: (beta * beta + 2.0 * r).sqrt(),
            beta,
            sigma1,
        })
    }

    pub fn from_firm(firm: &FirmParams, mkt: &MarketParams) -> Result<Self> {
        Self::new(crate::model::drift_nu(firm, mkt), firm.sigma, mkt.r)
    }

    pub fn from_wedge(wedge: &WedgeGeometry, mkt: &MarketParams) -> Result<Self> {
        Self::new(wedge.nu1, wedge.sigma1, mkt.r)
    }
}

/// `scale * N(arg)` without forming `inf * 0` when `scale` is huge and `N` tiny.
fn scaled_cdf(log_scale: f64, arg: f64) -> f64 {
    let n = normal_cdf(arg);
    if n == 0.0 {
        0.0
    } else {
        (log_scale + n.ln()).exp()
    }
}

fn check_mu_horizon(mu: f64, horizon: f64) -> Result<()> {
    if !(mu >= 0.0) {
        return domain(format!("mu must be >= 0, got {mu}"));
    }
    if !(horizon > 0.0) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    Ok(())
}

/// Probability that firm 1 hits its barrier within `horizon`, starting from
/// scaled distance `mu`.
pub fn conditional_default_prob(mu: f64, horizon: f64, coeffs: &SingleNameCoeffs) -> Result<f64> {
    check_mu_horizon(mu, horizon)?;
    let SingleNameCoeffs { nu1, sigma1, .. } = *coeffs;
    let sd = sigma1 * horizon.sqrt();
    let first = normal_cdf((-sigma1 * mu - nu1 * horizon) / sd);
    let second = scaled_cdf(-2.0 * nu1 * mu / sigma1, (-sigma1 * mu + nu1 * horizon) / sd);
    Ok((first + second).clamp(0.0, 1.0))
}

/// `int_0^y exp(a x) dN((b - c x)/sqrt(x))` in closed form, for `b < 0` and
/// `c^2 > 2a`.
pub fn gaussian_exp_integral(a: f64, b: f64, c: f64, y: f64) -> Result<f64> {
    if !(b < 0.0) {
        return domain(format!("b must be negative, got {b}"));
    }
    if !(c * c > 2.0 * a) {
        return domain(format!("need c^2 > 2a, got a={a}, c={c}"));
    }
    if !(y > 0.0) {
        return domain(format!("upper limit must be positive, got {y}"));
    }
    let d = (c * c - 2.0 * a).sqrt();
    let sy = y.sqrt();
    let g = scaled_cdf(b * (c - d), (b - d * y) / sy);
    let h = scaled_cdf(b * (c + d), (b + d * y) / sy);
    Ok((d + c) / (2.0 * d) * g + (d - c) / (2.0 * d) * h)
}

/// `E[exp(-r (tau1 - t)) 1{tau1 < t + horizon}]` for firm 1 at scaled
/// distance `mu` at time `t`.
pub fn discounted_hitting_factor(mu: f64, horizon: f64, coeffs: &SingleNameCoeffs) -> Result<f64> {
    check_mu_horizon(mu, horizon)?;
    let SingleNameCoeffs {
        rate_alpha: alpha,
        beta,
        ..
    } = *coeffs;
    let sh = horizon.sqrt();
    let first = scaled_cdf(-mu * (beta - alpha), (-mu - alpha * horizon) / sh);
    let second = scaled_cdf(-mu * (beta + alpha), (-mu + alpha * horizon) / sh);
    Ok((first + second).clamp(0.0, 1.0))
}

/// How the protection buyer's remaining fees are valued at the counterparty's
/// default time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeeConvention {
    /// Fees run until the underlying defaults or the contract matures.
    #[default]
    Exact,
    /// Fees run until maturity regardless of the underlying; cheaper and close
    /// when default probabilities are small.
    Unconditional,
}

/// Time-`t` value of the CDS (before discounting to zero) at scaled distance `mu`.
fn cds_value_undiscounted(
    mu: f64,
    t: f64,
    contract: &CdsContract,
    coeffs: &SingleNameCoeffs,
    r: f64,
    fees: FeeConvention,
) -> Result<f64> {
    let remaining = contract.maturity - t;
    let hit = discounted_hitting_factor(mu, remaining, coeffs)?;
    let annuity_ratio = contract.spread / r;
    let protection = 1.0 - contract.recovery_underlying;
    let value = match fees {
        FeeConvention::Exact => {
            let survival = 1.0 - conditional_default_prob(mu, remaining, coeffs)?;
            (protection + annuity_ratio) * hit - annuity_ratio * (1.0 - (-r * remaining).exp() * survival)
        }
        FeeConvention::Unconditional => protection * hit - annuity_ratio * (1.0 - (-r * remaining).exp()),
    };
    Ok(contract.notional * value)
}

/// Exposure of the protection buyer when the counterparty defaults at `t`
/// with the underlying at scaled distance `mu`: `exp(-r t) C max(0, p)`,
/// where `p` is the contract value at `t` per unit notional.
pub fn cds_value_at_default(
    mu: f64,
    t: f64,
    contract: &CdsContract,
    coeffs: &SingleNameCoeffs,
    mkt: &MarketParams,
) -> Result<f64> {
    cds_value_at_default_with(mu, t, contract, coeffs, mkt, FeeConvention::Exact)
}

pub fn cds_value_at_default_with(
    mu: f64,
    t: f64,
    contract: &CdsContract,
    coeffs: &SingleNameCoeffs,
    mkt: &MarketParams,
    fees: FeeConvention,
) -> Result<f64> {
    if !(t >= 0.0 && t < contract.maturity) {
        return domain(format!(
            "default time {t} must lie in [0, maturity = {})",
            contract.maturity
        ));
    }
    if !(mkt.r > 0.0) {
        return domain("the CDS value uses s/r and needs r > 0");
    }
    let value = cds_value_undiscounted(mu, t, contract, coeffs, mkt.r, fees)?;
    Ok((-mkt.r * t).exp() * value.max(0.0))
}

/// Converts the firm-1 wedge coordinate `Z1 = z` on the horizontal side to
/// the scaled distance `mu = sqrt(1 - rho^2) z`.
pub fn mu_from_horizontal(z: f64, wedge: &WedgeGeometry) -> f64 {
    (1.0 - wedge.rho * wedge.rho).sqrt() * z
}

/// [`cds_value_at_default`] expressed in the wedge coordinate of the surviving
/// firm on the horizontal side.
pub fn h_tilde(
    z: f64,
    t: f64,
    contract: &CdsContract,
    coeffs: &SingleNameCoeffs,
    wedge: &WedgeGeometry,
    mkt: &MarketParams,
    fees: FeeConvention,
) -> Result<f64> {
    if !(z >= 0.0) {
        return domain(format!("wedge coordinate must be >= 0, got {z}"));
    }
    cds_value_at_default_with(mu_from_horizontal(z, wedge), t, contract, coeffs, mkt, fees)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(nu1: f64, sigma1: f64, r: f64) -> SingleNameCoeffs {
        SingleNameCoeffs::new(nu1, sigma1, r).unwrap()
    }

    fn contract() -> CdsContract {
        CdsContract {
            notional: 1.0,
            recovery_underlying: 0.4,
            recovery_counterparty: 0.4,
            spread: 0.012,
            maturity: 5.0,
        }
    }

    #[test]
    fn barrier_and_far_limits() {
        for &(nu, d) in &[(0.02, 3.0), (-0.05, 0.5), (0.0, 10.0)] {
            let c = coeffs(nu, 0.25, 0.03);
            assert!((conditional_default_prob(0.0, d, &c).unwrap() - 1.0).abs() < 1e-15);
            assert!((discounted_hitting_factor(0.0, d, &c).unwrap() - 1.0).abs() < 1e-15);
            assert!(conditional_default_prob(80.0, d, &c).unwrap() < 1e-100);
            assert!(discounted_hitting_factor(80.0, d, &c).unwrap() < 1e-100);
        }
        assert!(conditional_default_prob(-0.1, 1.0, &coeffs(0.0, 0.2, 0.01)).is_err());
    }

    #[test]
    fn zero_rate_hitting_factor_is_default_probability() {
        for &nu in &[0.03, -0.02, 0.0] {
            let c = coeffs(nu, 0.3, 0.0);
            for &mu in &[0.2, 0.9, 2.5] {
                let p = conditional_default_prob(mu, 4.0, &c).unwrap();
                let h = discounted_hitting_factor(mu, 4.0, &c).unwrap();
                assert!((p - h).abs() < 1e-14, "nu={nu} mu={mu}");
            }
        }
    }

    #[test]
    fn hitting_factor_is_the_discounted_default_density_integral() {
        // The hitting factor is int_0^D exp(-r s) dP(tau <= s); check it with a
        // midpoint sum over the closed-form distribution function.
        let c = coeffs(-0.01, 0.3, 0.04);
        let (mu, horizon) = (0.9, 4.0);
        let n = 200_000;
        let h = horizon / n as f64;
        let mut acc = 0.0;
        let mut prev = 0.0;
        for i in 1..=n {
            let s = i as f64 * h;
            let p = conditional_default_prob(mu, s, &c).unwrap();
            acc += (-0.04 * (s - 0.5 * h)).exp() * (p - prev);
            prev = p;
        }
        let closed = discounted_hitting_factor(mu, horizon, &c).unwrap();
        assert!((acc - closed).abs() < 1e-8, "{acc} vs {closed}");
    }

    #[test]
    fn gaussian_exp_integral_limits() {
        let (b, c, y) = (-0.7, 0.4, 1.3);
        let collapsed = gaussian_exp_integral(0.0, b, c, y).unwrap();
        assert!((collapsed - normal_cdf((b - c * y) / y.sqrt())).abs() < 1e-15);
        // As y grows the g-term dies (its N argument runs to -inf) and the
        // h-term's N tends to one.
        let far = gaussian_exp_integral(-0.1, b, c, 1e6).unwrap();
        let d = (c * c + 0.2_f64).sqrt();
        assert!((far - (d - c) / (2.0 * d) * (b * (c + d)).exp()).abs() < 1e-12);
        // mpmath quadrature of the defining integral.
        let v = gaussian_exp_integral(-0.02, -1.3, 0.1, 2.0).unwrap();
        assert!((v - 0.141_640_669_869_310_08).abs() < 1e-12);
        assert!(gaussian_exp_integral(0.5, -1.0, 0.5, 1.0).is_err());
        assert!(gaussian_exp_integral(0.0, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn cds_value_limits() {
        let mkt = MarketParams::new(0.03, 0.0).unwrap();
        let c = coeffs(0.015, 0.25, mkt.r);
        let k = contract();
        let at_barrier = cds_value_at_default(0.0, 1.0, &k, &c, &mkt).unwrap();
        assert!((at_barrier - (-0.03f64).exp() * 0.6).abs() < 1e-14);
        let far = cds_value_at_default(60.0, 1.0, &k, &c, &mkt).unwrap();
        assert_eq!(far, 0.0);
        assert!(cds_value_at_default(0.5, 5.0, &k, &c, &mkt).is_err());
        let zero_rate = MarketParams::new(0.0, 0.0).unwrap();
        assert!(cds_value_at_default(0.5, 1.0, &k, &c, &zero_rate).is_err());
    }

    #[test]
    fn h_tilde_maps_through_correlation() {
        let mkt = MarketParams::new(0.03, 0.6).unwrap();
        let f1 = FirmParams::from_log_distance(0.7, 0.25, 0.0, 0.0).unwrap();
        let f2 = FirmParams::from_log_distance(0.9, 0.3, 0.0, 0.0).unwrap();
        let w = crate::model::derive_wedge(&f1, &f2, &mkt).unwrap();
        assert!((mu_from_horizontal(1.1, &w) - 0.88).abs() < 1e-15);
        let c = SingleNameCoeffs::from_wedge(&w, &mkt).unwrap();
        let k = contract();
        let via_wedge = h_tilde(1.1, 2.0, &k, &c, &w, &mkt, FeeConvention::Exact).unwrap();
        let direct = cds_value_at_default(0.88, 2.0, &k, &c, &mkt).unwrap();
        assert!((via_wedge - direct).abs() < 1e-14);
        let corner = h_tilde(0.0, 2.0, &k, &c, &w, &mkt, FeeConvention::Exact).unwrap();
        assert!((corner - (-0.06f64).exp() * 0.6).abs() < 1e-14);
    }

    #[test]
    fn unconditional_fees_cost_more() {
        // Paying fees to maturity regardless of default can only lower the
        // buyer's position.
        let mkt = MarketParams::new(0.03, 0.0).unwrap();
        let c = coeffs(0.015, 0.25, mkt.r);
        let k = contract().with_spread(0.05);
        for &mu in &[0.1, 0.5, 1.0, 2.0] {
            let exact = cds_value_at_default_with(mu, 1.0, &k, &c, &mkt, FeeConvention::Exact).unwrap();
            let approx = cds_value_at_default_with(mu, 1.0, &k, &c, &mkt, FeeConvention::Unconditional).unwrap();
            assert!(approx <= exact + 1e-15);
        }
    }

    proptest::proptest! {
        #[test]
        fn probability_bounds_and_monotonicity(
            mu in 0.0f64..4.0, dmu in 0.01f64..1.0,
            horizon in 0.05f64..20.0, dh in 0.01f64..5.0,
            nu in -0.1f64..0.1, sigma in 0.05f64..0.6, r in 0.0f64..0.1,
        ) {
            let c = coeffs(nu, sigma, r);
            let p = conditional_default_prob(mu, horizon, &c).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&p));
            proptest::prop_assert!(conditional_default_prob(mu + dmu, horizon, &c).unwrap() <= p + 1e-14);
            proptest::prop_assert!(conditional_default_prob(mu, horizon + dh, &c).unwrap() >= p - 1e-14);
            let h = discounted_hitting_factor(mu, horizon, &c).unwrap();
            proptest::prop_assert!(h <= p + 1e-14);
        }

        #[test]
        fn exposure_is_bounded_by_protection(
            mu in 0.0f64..4.0, t in 0.0f64..4.99, s in 0.0f64..0.2,
            nu in -0.1f64..0.1, sigma in 0.05f64..0.6, r in 0.001f64..0.1,
        ) {
            let mkt = MarketParams::new(r, 0.0).unwrap();
            let c = coeffs(nu, sigma, r);
            let k = contract().with_spread(s);
            let v = cds_value_at_default(mu, t, &k, &c, &mkt).unwrap();
            let bound = (-r * t).exp() * 0.6;
            proptest::prop_assert!(v >= 0.0 && v <= bound * (1.0 + 1e-12));
        }
    }
}
