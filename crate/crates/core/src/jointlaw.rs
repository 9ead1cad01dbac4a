//! Joint laws of the two default times.
//!
//! In wedge coordinates the pair of firms is a planar Brownian motion with
//! drift `phi` started at `r0 e^{i theta0}` inside the wedge
//! `{0 < arg z < alpha}`. Firm 2 defaults on the horizontal side, firm 1 on the
//! slanted side. The driftless laws are Bessel series; drift enters through the
//! Girsanov weight `exp(phi . (z - z0) - |phi|^2 t / 2)` evaluated at the
//! stopping time.
//!
//! Every series is evaluated with exponentially scaled Bessel functions, so
//! `exp(-(a^2 + r0^2)/2t) I_nu(a r0/t)` becomes
//! `exp(-(a - r0)^2/2t) [e^{-x} I_nu(x)]` and never overflows.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::model::WedgeGeometry;
use crate::quadrature::{integrate_time_radius, integrate_wedge_factored, Estimate, QuadSpec, RadialWindow};
use crate::specfun::{bessel_i_scaled, SeriesTolerances};

/// Below this horizon the hitting densities are returned as zero.
pub const T_MIN: f64 = 1e-8;

/// Densities whose half-plane upper bound is below `exp(LN_NEGLIGIBLE)` are
/// returned as zero without summing the series.
const LN_NEGLIGIBLE: f64 = -92.1;

/// Wedge geometry plus series truncation policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeDensityParams {
    pub wedge: WedgeGeometry,
    pub tol: SeriesTolerances,
}

impl WedgeDensityParams {
    pub fn new(wedge: WedgeGeometry) -> Self {
        Self {
            wedge,
            tol: SeriesTolerances::default(),
        }
    }

    pub fn with_tol(wedge: WedgeGeometry, tol: SeriesTolerances) -> Self {
        Self { wedge, tol }
    }
}

/// Sums `term(n, ie_n)` over `n >= 1`, where `ie_n = e^{-x} I_{n pi/alpha}(x)`.
///
/// `term` returns the series term and a nonnegative envelope that bounds the
/// magnitude of all later terms once it starts to decrease. Summation stops
/// after three consecutive envelopes below `term_tol` times the larger of the
/// partial sum and `1e-4` times the largest envelope seen.
fn bessel_series<F>(x: f64, alpha: f64, tol: &SeriesTolerances, mut term: F) -> Result<f64>
where
    F: FnMut(usize, f64) -> (f64, f64),
{
    if x <= 0.0 {
        return Ok(0.0);
    }
    let step = PI / alpha;
    let mut sum = 0.0;
    let mut max_env = 0.0f64;
    let mut prev_env = f64::INFINITY;
    let mut small = 0;
    for n in 1..=tol.max_terms {
        let ie = bessel_i_scaled(n as f64 * step, x);
        let (t, env) = term(n, ie);
        sum += t;
        max_env = max_env.max(env);
        let decreasing = env < prev_env || env == 0.0;
        if decreasing && env <= tol.term_tol * sum.abs().max(1e-4 * max_env) {
            small += 1;
            if small >= 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
        prev_env = env;
    }
    Err(Error::SeriesNoConvergence {
        terms: tol.max_terms,
        argument: x,
    })
}

/// `exp(phi . (z - z0) - |phi|^2 t / 2)`.
pub fn girsanov_weight(x: f64, y: f64, t: f64, wedge: &WedgeGeometry) -> f64 {
    let (x0, y0) = wedge.z0();
    (wedge.phi1 * (x - x0) + wedge.phi2 * (y - y0) - 0.5 * wedge.drift_norm_sq() * t).exp()
}

/// Log of the half-plane hitting density bound, inflated by the largest
/// Girsanov weight a point at distance `dist` from the start can carry.
fn log_hit_bound(t: f64, normal: f64, tangential: f64, dist: f64, wedge: &WedgeGeometry) -> f64 {
    (normal / (2.0 * PI * t * t)).ln() - (tangential * tangential + normal * normal) / (2.0 * t)
        + wedge.drift_norm_sq().sqrt() * dist
}

fn survival_q_unchecked(mu: f64, theta: f64, t: f64, p: &WedgeDensityParams) -> Result<f64> {
    let w = &p.wedge;
    let alpha = w.wedge_angle;
    let dist_sq = mu * mu + w.r0 * w.r0 - 2.0 * mu * w.r0 * (theta - w.theta0).cos();
    // Free-space bound per (radius, angle) cell.
    let ln_bound = (mu / (2.0 * PI * t)).ln() - dist_sq.max(0.0) / (2.0 * t);
    if ln_bound < LN_NEGLIGIBLE {
        return Ok(0.0);
    }
    let x = mu * w.r0 / t;
    let step = PI / alpha;
    let sum = bessel_series(x, alpha, &p.tol, |n, ie| {
        let nf = n as f64;
        ((nf * step * theta).sin() * (nf * step * w.theta0).sin() * ie, ie)
    })?;
    Ok(2.0 * mu / (alpha * t) * (-(mu - w.r0).powi(2) / (2.0 * t)).exp() * sum)
}

/// Driftless survival density in polar coordinates, per unit radius and angle:
/// `Q(Z(t) in (dmu, dtheta), no default by t)`.
pub fn survival_density_q(mu: f64, theta: f64, t: f64, p: &WedgeDensityParams) -> Result<f64> {
    let alpha = p.wedge.wedge_angle;
    if !(mu > 0.0 && t > 0.0) || !(0.0..=alpha).contains(&theta) {
        return domain(format!(
            "survival density needs mu > 0, t > 0, theta in [0, alpha]; got ({mu}, {theta}, {t})"
        ));
    }
    Ok(survival_q_unchecked(mu, theta, t, p)?.max(0.0))
}

/// Survival density under the physical measure, per unit radius and angle.
pub fn survival_density(mu: f64, theta: f64, t: f64, p: &WedgeDensityParams) -> Result<f64> {
    let q = survival_density_q(mu, theta, t, p)?;
    Ok(q * girsanov_weight(mu * theta.cos(), mu * theta.sin(), t, &p.wedge))
}

/// Driftless density of firm 2 defaulting first at `t` with `Z1 = a`.
pub fn hitting_density_horizontal_q(t: f64, a: f64, p: &WedgeDensityParams) -> Result<f64> {
    if !(t > 0.0 && a > 0.0) {
        return domain(format!("hitting density needs t > 0 and a > 0, got ({t}, {a})"));
    }
    let w = &p.wedge;
    if t < T_MIN {
        return Ok(0.0);
    }
    let (x0, y0) = w.z0();
    let dist = (a - x0).hypot(y0);
    if log_hit_bound(t, y0, a - x0, dist, w) < LN_NEGLIGIBLE {
        return Ok(0.0);
    }
    let alpha = w.wedge_angle;
    let step = PI / alpha;
    let sum = bessel_series(a * w.r0 / t, alpha, &p.tol, |n, ie| {
        let nf = n as f64;
        (nf * (nf * step * w.theta0).sin() * ie, nf * ie)
    })?;
    let value = PI / (alpha * alpha * t * a) * (-(a - w.r0).powi(2) / (2.0 * t)).exp() * sum;
    Ok(value.max(0.0))
}

/// Driftless density of firm 1 defaulting first at `t` at radius `mu` on the
/// slanted side.
pub fn hitting_density_slanted_q(t: f64, mu: f64, p: &WedgeDensityParams) -> Result<f64> {
    if !(t > 0.0 && mu > 0.0) {
        return domain(format!("hitting density needs t > 0 and mu > 0, got ({t}, {mu})"));
    }
    let w = &p.wedge;
    if t < T_MIN {
        return Ok(0.0);
    }
    let alpha = w.wedge_angle;
    let normal = w.r0 * (alpha - w.theta0).sin();
    let tangential = mu - w.r0 * (alpha - w.theta0).cos();
    if log_hit_bound(t, normal, tangential, tangential.hypot(normal), w) < LN_NEGLIGIBLE {
        return Ok(0.0);
    }
    let step = PI / alpha;
    let sum = bessel_series(mu * w.r0 / t, alpha, &p.tol, |n, ie| {
        let nf = n as f64;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        (sign * nf * (nf * step * w.theta0).sin() * ie, nf * ie)
    })?;
    let value = PI / (alpha * alpha * t * mu) * (-(mu - w.r0).powi(2) / (2.0 * t)).exp() * sum;
    Ok(value.max(0.0))
}

/// Density of firm 2 (counterparty) defaulting first at `t` while the
/// survivor sits at `Z1 = a`.
pub fn hitting_density_horizontal(t: f64, a: f64, p: &WedgeDensityParams) -> Result<f64> {
    let q = hitting_density_horizontal_q(t, a, p)?;
    Ok(if q == 0.0 {
        0.0
    } else {
        q * girsanov_weight(a, 0.0, t, &p.wedge)
    })
}

/// Density of firm 1 (underlying) defaulting first at `t` at radius `mu` on
/// the slanted side.
pub fn hitting_density_slanted(t: f64, mu: f64, p: &WedgeDensityParams) -> Result<f64> {
    let q = hitting_density_slanted_q(t, mu, p)?;
    let alpha = p.wedge.wedge_angle;
    Ok(if q == 0.0 {
        0.0
    } else {
        q * girsanov_weight(mu * alpha.cos(), mu * alpha.sin(), t, &p.wedge)
    })
}

/// Radial cutoff for integrals over either boundary or the interior.
pub fn radial_window(wedge: &WedgeGeometry) -> RadialWindow {
    RadialWindow {
        base: wedge.r0,
        drift_speed: wedge.drift_norm_sq().sqrt(),
    }
}

/// `P(tau1 ^ tau2 > T)`.
pub fn survival_prob(horizon: f64, p: &WedgeDensityParams, spec: &QuadSpec) -> Result<Estimate> {
    if !(horizon > 0.0) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    let w = p.wedge;
    let alpha = w.wedge_angle;
    let step = PI / alpha;
    let limit = radial_window(&w).upper(horizon, spec.mu_cutoff_sigmas);
    let est = integrate_wedge_factored(
        |mu| {
            let mut coeffs = Vec::new();
            let x = mu * w.r0 / horizon;
            let dist = (mu - w.r0).abs();
            let ln_bound = (mu / (2.0 * PI * horizon)).ln() - dist * dist / (2.0 * horizon)
                + w.drift_norm_sq().sqrt() * (mu + w.r0);
            if ln_bound >= LN_NEGLIGIBLE {
                bessel_series(x, alpha, &p.tol, |n, ie| {
                    let b = (n as f64 * step * w.theta0).sin() * ie;
                    coeffs.push(b);
                    (b, ie)
                })?;
            }
            let pref = 2.0 * mu / (alpha * horizon) * (-(mu - w.r0).powi(2) / (2.0 * horizon)).exp();
            Ok(move |kappa: f64| {
                if coeffs.is_empty() {
                    return 0.0;
                }
                let s: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b * ((i + 1) as f64 * step * kappa).sin())
                    .sum();
                (pref * s).max(0.0) * girsanov_weight(mu * kappa.cos(), mu * kappa.sin(), horizon, &w)
            })
        },
        alpha,
        limit,
        spec,
    )?;
    Ok(Estimate {
        value: est.value.clamp(0.0, 1.0),
        error: est.error,
    })
}

/// Probabilities that firm 2 defaults first, firm 1 defaults first, or both
/// survive to `horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partition {
    pub firm2_first: Estimate,
    pub firm1_first: Estimate,
    pub survival: Estimate,
}

impl Partition {
    pub fn sum(&self) -> f64 {
        self.firm2_first.value + self.firm1_first.value + self.survival.value
    }

    pub fn error(&self) -> f64 {
        self.firm2_first.error + self.firm1_first.error + self.survival.error
    }
}

/// Integrates both hitting densities over `(0, T]` and adds the survival
/// probability; the three parts should sum to one.
pub fn normalization_check(horizon: f64, p: &WedgeDensityParams, spec: &QuadSpec) -> Result<Partition> {
    let window = radial_window(&p.wedge);
    let firm2_first = integrate_time_radius(|t, a| hitting_density_horizontal(t, a, p), horizon, window, spec)?;
    let firm1_first = integrate_time_radius(|t, mu| hitting_density_slanted(t, mu, p), horizon, window, spec)?;
    let survival = survival_prob(horizon, p, spec)?;
    Ok(Partition {
        firm2_first,
        firm1_first,
        survival,
    })
}

/// Horizontal hitting density recovered as the boundary flux of the survival
/// density: `(1/2) dF/db` at `(a, 0)` where `F` is the drift-weighted density
/// per unit area. The series extends analytically across the boundary, so a
/// central difference with Richardson extrapolation is used.
pub fn hitting_density_from_gradient(t: f64, a: f64, p: &WedgeDensityParams) -> Result<f64> {
    if !(t > 0.0 && a > 0.0) {
        return domain(format!("hitting density needs t > 0 and a > 0, got ({t}, {a})"));
    }
    if t < T_MIN {
        return Ok(0.0);
    }
    let density = |b: f64| -> Result<f64> {
        let mu = a.hypot(b);
        let q = survival_q_unchecked(mu, b.atan2(a), t, p)? / mu;
        Ok(q * girsanov_weight(a, b, t, &p.wedge))
    };
    let diff = |h: f64| -> Result<f64> { Ok((density(h)? - density(-h)?) / (2.0 * h)) };
    let h0 = 0.1 * t.sqrt().min(a);
    let d = [diff(h0)?, diff(h0 / 2.0)?, diff(h0 / 4.0)?];
    let r1 = [(4.0 * d[1] - d[0]) / 3.0, (4.0 * d[2] - d[1]) / 3.0];
    let r2 = (16.0 * r1[1] - r1[0]) / 15.0;
    Ok((0.5 * r2).max(0.0))
}
