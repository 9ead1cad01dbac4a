//! Market and contract parameters, and the change of coordinates that maps
//! two correlated firm-value processes onto a planar Brownian motion with
//! drift living in a wedge with absorbing sides.
//!
//! Firm `i` defaults the first time `V_i(t) <= K_i exp(gamma_i t)`. Writing
//! `Y_i(t) = ln(V_i(t) / (K_i exp(gamma_i t)))`, each `Y_i` is a Brownian motion
//! with drift `nu_i = r - k_i - gamma_i - sigma_i^2 / 2` and volatility
//! `sigma_i`, started at `y0_i = ln(V_i(0) / K_i)`. The linear map
//!
//! ```text
//! Z1 = (Y1/sigma1 - rho Y2/sigma2) / sqrt(1 - rho^2)
//! Z2 = Y2/sigma2
//! ```
//!
//! turns `(Y1, Y2)` into a standard planar Brownian motion with constant drift
//! `(phi1, phi2)`. Firm 2 defaults on the horizontal ray `Z2 = 0`, firm 1 on the
//! ray at angle `alpha = arcsin(rho) + pi/2`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// One default-prone entity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmParams {
    /// Initial firm value `V(0)`.
    pub v0: f64,
    /// Barrier level `K` at time zero.
    pub k_barrier: f64,
    /// Barrier growth rate `gamma` (the barrier is `K exp(gamma t)`).
    pub gamma: f64,
    /// Asset volatility.
    pub sigma: f64,
    /// Payout ratio `k`.
    pub payout: f64,
}

impl FirmParams {
    pub fn new(v0: f64, k_barrier: f64, gamma: f64, sigma: f64, payout: f64) -> Result<Self> {
        let firm = Self {
            v0,
            k_barrier,
            gamma,
            sigma,
            payout,
        };
        firm.validate("firm")?;
        Ok(firm)
    }

    /// Firm with barrier at `V(0) exp(-log_distance)`, handy when only the
    /// log-distance to default matters.
    pub fn from_log_distance(log_distance: f64, sigma: f64, gamma: f64, payout: f64) -> Result<Self> {
        Self::new(1.0, (-log_distance).exp(), gamma, sigma, payout)
    }

    /// Checks the invariants, naming the firm as `label` in the message.
    pub fn validate(&self, label: &str) -> Result<()> {
        let finite = [self.v0, self.k_barrier, self.gamma, self.sigma, self.payout]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return domain(format!("{label}: parameters must be finite"));
        }
        if self.v0 <= 0.0 {
            return domain(format!("{label}: v0 must be positive, got {}", self.v0));
        }
        if self.k_barrier <= 0.0 {
            return domain(format!("{label}: k_barrier must be positive, got {}", self.k_barrier));
        }
        if self.sigma <= 0.0 {
            return domain(format!("{label}: sigma must be positive, got {}", self.sigma));
        }
        if self.v0 <= self.k_barrier {
            return domain(format!(
                "{label}: v0 ({}) must exceed k_barrier ({}); the firm starts in default",
                self.v0, self.k_barrier
            ));
        }
        Ok(())
    }

    /// `y0 = ln(V(0) / K)`.
    pub fn log_distance(&self) -> f64 {
        (self.v0 / self.k_barrier).ln()
    }
}

/// Short rate and Brownian correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub r: f64,
    pub rho: f64,
}

impl MarketParams {
    /// `r >= 0` and `|rho| < 1`. Operations whose formulas divide by `r`
    /// reject `r = 0` themselves.
    pub fn new(r: f64, rho: f64) -> Result<Self> {
        let mkt = Self { r, rho };
        mkt.validate()?;
        Ok(mkt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r >= 0.0) {
            return domain(format!("market: r must be finite and >= 0, got {}", self.r));
        }
        if !(self.rho.is_finite() && self.rho.abs() < 1.0) {
            return domain(format!("market: rho must satisfy -1 < rho < 1, got {}", self.rho));
        }
        Ok(())
    }
}

fn check_recovery(label: &str, value: f64) -> Result<()> {
    if !(0.0..1.0).contains(&value) {
        return domain(format!("{label} must lie in [0, 1), got {value}"));
    }
    Ok(())
}

fn check_common(notional: f64, maturity: f64) -> Result<()> {
    if !(notional.is_finite() && notional > 0.0) {
        return domain(format!("notional must be positive, got {notional}"));
    }
    if !(maturity.is_finite() && maturity > 0.0) {
        return domain(format!("maturity must be positive, got {maturity}"));
    }
    Ok(())
}

/// Single-name CDS bought from a default-prone protection seller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdsContract {
    pub notional: f64,
    pub recovery_underlying: f64,
    pub recovery_counterparty: f64,
    /// Continuous running spread (per year).
    pub spread: f64,
    pub maturity: f64,
}

impl CdsContract {
    pub fn validate(&self) -> Result<()> {
        check_common(self.notional, self.maturity)?;
        check_recovery("recovery_underlying", self.recovery_underlying)?;
        // Full counterparty recovery switches the counterparty leg off; it is
        // allowed so that leg can be compared against the riskless case.
        if !(0.0..=1.0).contains(&self.recovery_counterparty) {
            return domain(format!(
                "recovery_counterparty must lie in [0, 1], got {}",
                self.recovery_counterparty
            ));
        }
        if !(self.spread.is_finite() && self.spread >= 0.0) {
            return domain(format!("spread must be >= 0, got {}", self.spread));
        }
        Ok(())
    }

    pub fn with_spread(self, spread: f64) -> Self {
        Self { spread, ..self }
    }
}

/// First-to-default swap on the two firms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtdContract {
    pub notional: f64,
    pub recovery: f64,
    pub maturity: f64,
}

impl FtdContract {
    pub fn validate(&self) -> Result<()> {
        check_common(self.notional, self.maturity)?;
        check_recovery("recovery", self.recovery)
    }
}

/// Polar description of the transformed two-firm state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeGeometry {
    /// `|Z(0)|`.
    pub r0: f64,
    /// `arg Z(0)`, strictly inside `(0, wedge_angle)`.
    pub theta0: f64,
    /// Opening angle `arcsin(rho) + pi/2`.
    pub wedge_angle: f64,
    /// Drift of `Z1`.
    pub phi1: f64,
    /// Drift of `Z2`.
    pub phi2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub y01: f64,
    pub y02: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl WedgeGeometry {
    pub fn z0(&self) -> (f64, f64) {
        (self.r0 * self.theta0.cos(), self.r0 * self.theta0.sin())
    }

    /// `|phi|^2`.
    pub fn drift_norm_sq(&self) -> f64 {
        self.phi1 * self.phi1 + self.phi2 * self.phi2
    }

    /// Distance from `Z(0)` to the ray where firm 2 defaults.
    pub fn distance_horizontal(&self) -> f64 {
        self.r0 * self.theta0.sin()
    }

    /// Distance from `Z(0)` to the ray where firm 1 defaults.
    pub fn distance_slanted(&self) -> f64 {
        self.r0 * (self.wedge_angle - self.theta0).sin()
    }

    /// Maps log-distances `(Y1, Y2)` to wedge coordinates `(Z1, Z2)`.
    pub fn to_wedge(&self, y1: f64, y2: f64) -> (f64, f64) {
        let s = (1.0 - self.rho * self.rho).sqrt();
        let z2 = y2 / self.sigma2;
        ((y1 / self.sigma1 - self.rho * z2) / s, z2)
    }

    /// Inverse of [`to_wedge`](Self::to_wedge).
    pub fn from_wedge(&self, z1: f64, z2: f64) -> (f64, f64) {
        let s = (1.0 - self.rho * self.rho).sqrt();
        (self.sigma1 * (s * z1 + self.rho * z2), self.sigma2 * z2)
    }
}

/// Drift of `ln(V/barrier)`: `r - k - gamma - sigma^2/2`.
pub fn drift_nu(firm: &FirmParams, mkt: &MarketParams) -> f64 {
    mkt.r - firm.payout - firm.gamma - 0.5 * firm.sigma * firm.sigma
}

/// Builds the wedge picture for firm 1 (the underlying) and firm 2 (the
/// counterparty).
pub fn derive_wedge(firm1: &FirmParams, firm2: &FirmParams, mkt: &MarketParams) -> Result<WedgeGeometry> {
    firm1.validate("firm1")?;
    firm2.validate("firm2")?;
    mkt.validate()?;

    let rho = mkt.rho;
    let s = (1.0 - rho * rho).sqrt();
    let (sigma1, sigma2) = (firm1.sigma, firm2.sigma);
    let (y01, y02) = (firm1.log_distance(), firm2.log_distance());
    let (nu1, nu2) = (drift_nu(firm1, mkt), drift_nu(firm2, mkt));

    let z1 = (y01 * sigma2 - rho * y02 * sigma1) / (sigma1 * sigma2 * s);
    let z2 = y02 / sigma2;
    let phi1 = (nu1 * sigma2 - nu2 * sigma1 * rho) / (sigma1 * sigma2 * s);
    let phi2 = nu2 / sigma2;
    let wedge_angle = rho.asin() + std::f64::consts::FRAC_PI_2;
    let r0 = z1.hypot(z2);
    let theta0 = z2.atan2(z1);

    if !(r0 > 0.0 && theta0 > 0.0 && theta0 < wedge_angle) {
        return domain(format!(
            "initial state (r0={r0}, theta0={theta0}) is outside the wedge (0, {wedge_angle})"
        ));
    }

    Ok(WedgeGeometry {
        r0,
        theta0,
        wedge_angle,
        phi1,
        phi2,
        nu1,
        nu2,
        y01,
        y02,
        sigma1,
        sigma2,
        rho,
    })
}

/// Two firms and the market they live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// The CDS underlying (or first FtD name).
    pub firm1: FirmParams,
    /// The protection seller (or second FtD name).
    pub firm2: FirmParams,
    pub market: MarketParams,
}

impl Scenario {
    pub fn new(firm1: FirmParams, firm2: FirmParams, market: MarketParams) -> Result<Self> {
        let scn = Self { firm1, firm2, market };
        scn.wedge()?;
        Ok(scn)
    }

    pub fn wedge(&self) -> Result<WedgeGeometry> {
        derive_wedge(&self.firm1, &self.firm2, &self.market)
    }

    /// Same market with the roles of the two firms exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            firm1: self.firm2,
            firm2: self.firm1,
            market: self.market,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn firm(y0: f64, sigma: f64) -> FirmParams {
        FirmParams::from_log_distance(y0, sigma, 0.0, 0.0).unwrap()
    }

    #[test]
    fn drift_examples() {
        let mkt = MarketParams::new(0.05, 0.0).unwrap();
        let f = FirmParams::new(1.0, 0.5, 0.0, 0.2, 0.0).unwrap();
        assert!((drift_nu(&f, &mkt) - 0.03).abs() < 1e-15);

        let mkt0 = MarketParams::new(0.0, 0.0).unwrap();
        let f = FirmParams::new(1.0, 0.5, 0.0, 2f64.sqrt(), 0.0).unwrap();
        assert!((drift_nu(&f, &mkt0) + 1.0).abs() < 1e-15);

        let f = FirmParams::new(1.0, 0.5, 0.02, 0.3, 0.01).unwrap();
        assert!((drift_nu(&f, &mkt) + 0.025).abs() < 1e-15);
    }

    #[test]
    fn identity_transform_at_zero_correlation() {
        // nu = 0 needs r = sigma^2/2.
        let mkt = MarketParams::new(0.5, 0.0).unwrap();
        let w = derive_wedge(&firm(1.0, 1.0), &firm(1.0, 1.0), &mkt).unwrap();
        assert!((w.r0 - 2f64.sqrt()).abs() < 1e-15);
        assert!((w.theta0 - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(w.wedge_angle, FRAC_PI_2);
        assert!(w.phi1.abs() < 1e-15 && w.phi2.abs() < 1e-15);
    }

    #[test]
    fn wedge_angle_at_half_correlation() {
        let mkt = MarketParams::new(0.05, 0.5).unwrap();
        let w = derive_wedge(&firm(1.0, 0.2), &firm(1.0, 0.2), &mkt).unwrap();
        assert!((w.wedge_angle - 2.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reference_geometry_matches_high_precision_values() {
        // nu1 = 0.01, nu2 = 0.02 via the payout ratio: r - k - sigma^2/2.
        let mkt = MarketParams::new(0.05, 0.4).unwrap();
        let f1 = FirmParams::from_log_distance(0.8, 0.2, 0.0, 0.05 - 0.02 - 0.01).unwrap();
        let f2 = FirmParams::from_log_distance(1.2, 0.3, 0.0, 0.05 - 0.045 - 0.02).unwrap();
        let w = derive_wedge(&f1, &f2, &mkt).unwrap();
        assert!((w.nu1 - 0.01).abs() < 1e-15);
        assert!((w.nu2 - 0.02).abs() < 1e-15);
        // mpmath at 40 digits.
        let (z1, z2) = w.z0();
        assert!((z1 - 2.618_614_682_831_908_5).abs() < 1e-13);
        assert!((z2 - 4.0).abs() < 1e-13);
        assert!((w.r0 - 4.780_914_437_337_574_5).abs() < 1e-13);
        assert!((w.theta0 - 0.991_156_586_431_192_3).abs() < 1e-13);
        assert!((w.wedge_angle - 1.982_313_172_862_384_7).abs() < 1e-13);
        assert!((w.phi1 - 0.025_458_753_860_865_779).abs() < 1e-13);
        assert!((w.phi2 - 0.066_666_666_666_666_67).abs() < 1e-13);
        assert!(w.theta0 > 0.0 && w.theta0 < w.wedge_angle);
    }

    #[test]
    fn boundary_rays_map_to_barriers() {
        let mkt = MarketParams::new(0.03, -0.35).unwrap();
        let w = derive_wedge(&firm(0.7, 0.25), &firm(0.9, 0.4), &mkt).unwrap();
        for radius in [0.1, 1.0, 7.5] {
            // Horizontal ray: firm 2 at its barrier, firm 1 alive.
            let (y1, y2) = w.from_wedge(radius, 0.0);
            assert!(y2.abs() < 1e-15 && y1 > 0.0);
            // Slanted ray: firm 1 at its barrier, firm 2 alive.
            let (a, b) = (radius * w.wedge_angle.cos(), radius * w.wedge_angle.sin());
            let (y1, y2) = w.from_wedge(a, b);
            assert!(y1.abs() < 1e-14 && y2 > 0.0);
        }
        let (y1, y2) = w.from_wedge(w.z0().0, w.z0().1);
        assert!((y1 - 0.7).abs() < 1e-14 && (y2 - 0.9).abs() < 1e-14);
    }

    #[test]
    fn rejects_dead_firms_and_degenerate_correlation() {
        let mkt = MarketParams::new(0.05, 0.2).unwrap();
        let dead = FirmParams {
            v0: 0.9,
            k_barrier: 1.0,
            gamma: 0.0,
            sigma: 0.2,
            payout: 0.0,
        };
        let err = derive_wedge(&dead, &firm(1.0, 0.2), &mkt).unwrap_err();
        assert!(err.to_string().contains("firm1"));
        let err = derive_wedge(&firm(1.0, 0.2), &dead, &mkt).unwrap_err();
        assert!(err.to_string().contains("firm2"));
        assert!(MarketParams::new(0.05, 1.0).is_err());
        assert!(MarketParams::new(0.05, -1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn start_is_strictly_inside(
            y1 in 0.01f64..3.0, y2 in 0.01f64..3.0,
            s1 in 0.05f64..0.8, s2 in 0.05f64..0.8,
            rho in -0.98f64..0.98,
        ) {
            let mkt = MarketParams::new(0.04, rho).unwrap();
            let w = derive_wedge(&firm(y1, s1), &firm(y2, s2), &mkt).unwrap();
            proptest::prop_assert!(w.r0 > 0.0);
            proptest::prop_assert!(w.theta0 > 0.0 && w.theta0 < w.wedge_angle);
            proptest::prop_assert!((w.distance_horizontal() - y2 / s2).abs() < 1e-9 * (1.0 + y2 / s2));
            proptest::prop_assert!((w.distance_slanted() - y1 / s1).abs() < 1e-9 * (1.0 + y1 / s1));
        }
    }
}
