//! CDS legs with a default-prone protection seller, and first-to-default
//! swaps.
//!
//! Firm 1 is the reference name, firm 2 the protection seller. Every leg is a
//! double integral over time and position on one side of the wedge, computed
//! with [`integrate_time_radius`].

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jointlaw::{
    hitting_density_horizontal_q, hitting_density_slanted_q, radial_window, survival_prob, WedgeDensityParams,
};
use crate::model::{derive_wedge, CdsContract, FirmParams, FtdContract, MarketParams, WedgeGeometry};
use crate::quadrature::{integrate_time_radius, integrate_time_radius_clipped, Estimate, QuadSpec};
use crate::singlename::{h_tilde, FeeConvention, SingleNameCoeffs};
use crate::specfun::SeriesTolerances;

/// Time at which the Girsanov exponent `-|phi|^2 t / 2` is evaluated inside
/// the hitting-time integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GirsanovClock {
    /// The hitting time (correct change of measure at a stopping time).
    #[default]
    HittingTime,
    /// The contract maturity; kept only as a negative control.
    Maturity,
}

/// Numerical settings shared by all legs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PricingSpec {
    pub quad: QuadSpec,
    pub series: SeriesTolerances,
    pub fees: FeeConvention,
    pub clock: GirsanovClock,
}

impl PricingSpec {
    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        self.series.validate()
    }
}

/// A leg value with its quadrature error and named sub-terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LegValue {
    pub value: f64,
    pub error_estimate: f64,
    pub breakdown: Vec<(String, f64)>,
}

impl LegValue {
    fn from_parts(parts: Vec<(&str, Estimate)>, scale: f64) -> Self {
        let value = parts.iter().map(|(_, e)| e.value).sum::<f64>() * scale;
        let error_estimate = parts.iter().map(|(_, e)| e.error).sum::<f64>() * scale.abs();
        let breakdown = parts
            .into_iter()
            .map(|(n, e)| (n.to_string(), e.value * scale))
            .collect();
        Self {
            value,
            error_estimate,
            breakdown,
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            error_estimate: self.error_estimate * factor.abs(),
            breakdown: self.breakdown.iter().map(|(n, v)| (n.clone(), v * factor)).collect(),
        }
    }

    fn zero(names: &[&str]) -> Self {
        Self {
            value: 0.0,
            error_estimate: 0.0,
            breakdown: names.iter().map(|n| (n.to_string(), 0.0)).collect(),
        }
    }
}

/// Hitting densities under the physical measure with a chosen Girsanov clock.
struct Densities {
    p: WedgeDensityParams,
    clock: GirsanovClock,
    maturity: f64,
}

impl Densities {
    fn new(
        firm1: &FirmParams,
        firm2: &FirmParams,
        mkt: &MarketParams,
        maturity: f64,
        spec: &PricingSpec,
    ) -> Result<Self> {
        spec.validate()?;
        let wedge = derive_wedge(firm1, firm2, mkt)?;
        Ok(Self {
            p: WedgeDensityParams::with_tol(wedge, spec.series),
            clock: spec.clock,
            maturity,
        })
    }

    fn wedge(&self) -> &WedgeGeometry {
        &self.p.wedge
    }

    fn weight(&self, x: f64, y: f64, t: f64) -> f64 {
        let w = self.wedge();
        let clock = match self.clock {
            GirsanovClock::HittingTime => t,
            GirsanovClock::Maturity => self.maturity,
        };
        let (x0, y0) = w.z0();
        (w.phi1 * (x - x0) + w.phi2 * (y - y0) - 0.5 * w.drift_norm_sq() * clock).exp()
    }

    fn horizontal(&self, t: f64, a: f64) -> Result<f64> {
        let q = hitting_density_horizontal_q(t, a, &self.p)?;
        Ok(if q == 0.0 { 0.0 } else { q * self.weight(a, 0.0, t) })
    }

    fn slanted(&self, t: f64, mu: f64) -> Result<f64> {
        let q = hitting_density_slanted_q(t, mu, &self.p)?;
        let alpha = self.wedge().wedge_angle;
        Ok(if q == 0.0 {
            0.0
        } else {
            q * self.weight(mu * alpha.cos(), mu * alpha.sin(), t)
        })
    }

    fn integrate_horizontal<G>(&self, g: G, spec: &QuadSpec) -> Result<Estimate>
    where
        G: Fn(f64, f64) -> Result<f64> + Sync,
    {
        let window = radial_window(self.wedge());
        integrate_time_radius(
            |t, a| {
                let f = self.horizontal(t, a)?;
                if f == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(g(t, a)? * f)
                }
            },
            self.maturity,
            window,
            spec,
        )
    }

    fn integrate_slanted<G>(&self, g: G, spec: &QuadSpec) -> Result<Estimate>
    where
        G: Fn(f64) -> f64 + Sync,
    {
        let window = radial_window(self.wedge());
        integrate_time_radius(|t, mu| Ok(g(t) * self.slanted(t, mu)?), self.maturity, window, spec)
    }
}

/// `(1 - exp(-r t)) / r`, continuous at `r = 0`.
fn annuity(r: f64, t: f64) -> f64 {
    if r * t < 1e-8 {
        t * (1.0 - 0.5 * r * t)
    } else {
        -(-r * t).exp_m1() / r
    }
}

/// Protection paid when firm 1 defaults before firm 2 and before maturity.
pub fn standard_default_leg(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    contract: &CdsContract,
    spec: &PricingSpec,
) -> Result<LegValue> {
    contract.validate()?;
    let d = Densities::new(firm1, firm2, mkt, contract.maturity, spec)?;
    let r = mkt.r;
    let est = d.integrate_slanted(|t| (-r * t).exp(), &spec.quad)?;
    Ok(LegValue::from_parts(
        vec![("firm1_first", est)],
        contract.notional * (1.0 - contract.recovery_underlying),
    ))
}

/// Loss from the protection seller (firm 2) defaulting first while the CDS
/// has positive value to the buyer.
pub fn counterparty_default_leg(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    contract: &CdsContract,
    spec: &PricingSpec,
) -> Result<LegValue> {
    contract.validate()?;
    if contract.recovery_counterparty >= 1.0 {
        return Ok(LegValue::zero(&["firm2_first"]));
    }
    let d = Densities::new(firm1, firm2, mkt, contract.maturity, spec)?;
    counterparty_leg_with(&d, mkt, contract, spec, None)
}

type DensityCache = Mutex<HashMap<(u64, u64), f64>>;

fn counterparty_leg_with(
    d: &Densities,
    mkt: &MarketParams,
    contract: &CdsContract,
    spec: &PricingSpec,
    cache: Option<&DensityCache>,
) -> Result<LegValue> {
    let coeffs = SingleNameCoeffs::from_wedge(d.wedge(), mkt)?;
    let wedge = *d.wedge();
    let window = radial_window(&wedge);
    let density = |t: f64, a: f64| -> Result<f64> {
        let Some(cache) = cache else {
            return d.horizontal(t, a);
        };
        let key = (t.to_bits(), a.to_bits());
        if let Some(&v) = cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = d.horizontal(t, a)?;
        cache.lock().unwrap().insert(key, v);
        Ok(v)
    };
    let exposure = |t: f64, a: f64| h_tilde(a, t, contract, &coeffs, &wedge, mkt, spec.fees);
    // The exposure decreases in the survivor's distance to its barrier and is
    // floored at zero, so it vanishes beyond a single point per time.
    let clip = |t: f64, upper: f64| -> Result<f64> {
        if exposure(t, upper)? > 0.0 {
            return Ok(upper);
        }
        let (mut lo, mut hi) = (0.0, upper);
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if exposure(t, mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    };
    let est = integrate_time_radius_clipped(
        |t, a| {
            let f = density(t, a)?;
            if f == 0.0 {
                return Ok(0.0);
            }
            Ok(exposure(t, a)? * f)
        },
        contract.maturity,
        window,
        &spec.quad,
        clip,
    )?;
    Ok(LegValue::from_parts(
        vec![("firm2_first", est)],
        1.0 - contract.recovery_counterparty,
    ))
}

/// Premium leg per unit spread: `C [a(T) P(no default by T) + E a(tau) 1{tau <= T}]`
/// with `a(t) = (1 - exp(-r t))/r` and `tau` the first default.
pub fn fee_annuity(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    notional: f64,
    maturity: f64,
    spec: &PricingSpec,
) -> Result<LegValue> {
    let d = Densities::new(firm1, firm2, mkt, maturity, spec)?;
    fee_annuity_with(&d, mkt, notional, spec)
}

fn fee_annuity_with(d: &Densities, mkt: &MarketParams, notional: f64, spec: &PricingSpec) -> Result<LegValue> {
    let r = mkt.r;
    let maturity = d.maturity;
    let surv = survival_prob(maturity, &d.p, &spec.quad)?;
    let surv_term = Estimate {
        value: annuity(r, maturity) * surv.value,
        error: annuity(r, maturity) * surv.error,
    };
    let slanted = d.integrate_slanted(|t| annuity(r, t), &spec.quad)?;
    let horizontal = d.integrate_horizontal(|t, _| Ok(annuity(r, t)), &spec.quad)?;
    Ok(LegValue::from_parts(
        vec![
            ("survival", surv_term),
            ("firm1_first", slanted),
            ("firm2_first", horizontal),
        ],
        notional,
    ))
}

/// Fees received until the first default or maturity.
pub fn fee_leg(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    contract: &CdsContract,
    spec: &PricingSpec,
) -> Result<LegValue> {
    contract.validate()?;
    if contract.spread == 0.0 {
        return Ok(LegValue::zero(&["survival", "firm1_first", "firm2_first"]));
    }
    let annuity = fee_annuity(firm1, firm2, mkt, contract.notional, contract.maturity, spec)?;
    Ok(annuity.scaled(contract.spread))
}

/// All legs of a CDS bought from a default-prone seller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdsValuation {
    pub standard: LegValue,
    pub counterparty: LegValue,
    pub fee: LegValue,
    /// `standard + counterparty - fee`; positive favours the protection buyer.
    pub value: f64,
    pub error_estimate: f64,
}

/// Value of the CDS to the protection buyer.
pub fn cds_fair_value(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    contract: &CdsContract,
    spec: &PricingSpec,
) -> Result<CdsValuation> {
    let standard = standard_default_leg(firm1, firm2, mkt, contract, spec)?;
    let counterparty = counterparty_default_leg(firm1, firm2, mkt, contract, spec)?;
    let fee = fee_leg(firm1, firm2, mkt, contract, spec)?;
    Ok(CdsValuation {
        value: standard.value + counterparty.value - fee.value,
        error_estimate: standard.error_estimate + counterparty.error_estimate + fee.error_estimate,
        standard,
        counterparty,
        fee,
    })
}

/// Result of the par-spread search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParSpread {
    pub spread: f64,
    /// Fair value at `spread`.
    pub residual: f64,
    pub iterations: usize,
    pub valuation: CdsValuation,
}

const MAX_SPREAD: f64 = 1.0;

/// Spread at which the CDS is worth zero. The counterparty leg depends on the
/// spread, so this is a bracketing bisection rather than a ratio.
pub fn cds_par_spread(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    contract: &CdsContract,
    spec: &PricingSpec,
) -> Result<ParSpread> {
    contract.validate()?;
    let d = Densities::new(firm1, firm2, mkt, contract.maturity, spec)?;
    let standard = standard_default_leg(firm1, firm2, mkt, contract, spec)?;
    let annuity = fee_annuity_with(&d, mkt, contract.notional, spec)?;
    let cache = DensityCache::default();
    let counterparty = |s: f64| -> Result<LegValue> {
        if contract.recovery_counterparty >= 1.0 {
            return Ok(LegValue::zero(&["firm2_first"]));
        }
        counterparty_leg_with(&d, mkt, &contract.with_spread(s), spec, Some(&cache))
    };
    let value_at = |s: f64| -> Result<(f64, LegValue)> {
        let dc = counterparty(s)?;
        Ok((standard.value + dc.value - s * annuity.value, dc))
    };
    let tol = spec.quad.abs_tol;
    let valuation = |s: f64, residual: f64, dc: LegValue| CdsValuation {
        value: residual,
        error_estimate: standard.error_estimate + dc.error_estimate + s * annuity.error_estimate,
        standard: standard.clone(),
        counterparty: dc,
        fee: annuity.scaled(s),
    };

    let (g0, dc0) = value_at(0.0)?;
    if g0 <= tol {
        return Ok(ParSpread {
            spread: 0.0,
            residual: g0,
            iterations: 0,
            valuation: valuation(0.0, g0, dc0),
        });
    }
    let (mut lo, mut g_lo) = (0.0, g0);
    let mut hi = 0.01;
    let mut iterations = 0;
    let mut g_hi = loop {
        iterations += 1;
        let (g, _) = value_at(hi)?;
        if g < 0.0 {
            break g;
        }
        (lo, g_lo) = (hi, g);
        if hi >= MAX_SPREAD {
            return Err(Error::NoRoot(format!(
                "CDS value stays positive ({g:e}) up to a spread of {MAX_SPREAD}"
            )));
        }
        hi = (2.0 * hi).min(MAX_SPREAD);
    };
    // Illinois regula falsi: the value is close to linear in the spread.
    let mut side = 0i8;
    loop {
        iterations += 1;
        let mut s = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !(s > lo && s < hi) {
            s = 0.5 * (lo + hi);
        }
        let (g, dc) = value_at(s)?;
        if g.abs() < tol || hi - lo < 1e-12 || iterations > 200 {
            return Ok(ParSpread {
                spread: s,
                residual: g,
                iterations,
                valuation: valuation(s, g, dc),
            });
        }
        if g > 0.0 {
            (lo, g_lo) = (s, g);
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            (hi, g_hi) = (s, g);
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
}

/// Protection paid at the first default of either firm before maturity.
pub fn ftd_default_leg(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    contract: &FtdContract,
    spec: &PricingSpec,
) -> Result<LegValue> {
    contract.validate()?;
    let d = Densities::new(firm1, firm2, mkt, contract.maturity, spec)?;
    let r = mkt.r;
    let slanted = d.integrate_slanted(|t| (-r * t).exp(), &spec.quad)?;
    let horizontal = d.integrate_horizontal(|t, _| Ok((-r * t).exp()), &spec.quad)?;
    Ok(LegValue::from_parts(
        vec![("firm1_first", slanted), ("firm2_first", horizontal)],
        contract.notional * (1.0 - contract.recovery),
    ))
}

/// Fair first-to-default spread with its two ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtdSpread {
    pub spread: f64,
    pub error_estimate: f64,
    pub default_leg: LegValue,
    /// Fee leg per unit spread.
    pub annuity: LegValue,
}

/// `default leg / fee leg per unit spread`; neither depends on the spread.
pub fn ftd_fair_spread(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    contract: &FtdContract,
    spec: &PricingSpec,
) -> Result<FtdSpread> {
    let default_leg = ftd_default_leg(firm1, firm2, mkt, contract, spec)?;
    let annuity = fee_annuity(firm1, firm2, mkt, contract.notional, contract.maturity, spec)?;
    if !(annuity.value > 0.0) {
        return Err(Error::DegenerateContract(format!(
            "fee leg per unit spread is {}",
            annuity.value
        )));
    }
    let spread = default_leg.value / annuity.value;
    Ok(FtdSpread {
        spread,
        error_estimate: (default_leg.error_estimate + spread * annuity.error_estimate) / annuity.value,
        default_leg,
        annuity,
    })
}
