//! Adaptive Gauss-Kronrod integration for the improper double integrals the
//! pricing formulas need.
//!
//! The building block is a globally adaptive 21-point Kronrod rule with the
//! QUADPACK error heuristic. Two nested drivers sit on top of it:
//!
//! * [`integrate_time_radius`]: `int_0^T int_0^inf f(t, mu) dmu dt`, with the
//!   radial range truncated to a window that grows with `t`, and the outer
//!   variable substituted as `t = T u^2` so nodes cluster near `t = 0`;
//! * [`integrate_wedge`]: `int_0^inf int_0^alpha f(mu, kappa) dkappa dmu`.
//!
//! Integrand values at the nodes of one panel are computed through the
//! parallel shim, then summed in a fixed order, so results do not depend on the
//! thread count.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::par::*;

/// Tolerances and truncation for the double integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Target relative error.
    pub rel_tol: f64,
    /// Absolute error floor, in units of the integrand's output.
    pub abs_tol: f64,
    /// Radial truncation in units of `sqrt(t)` beyond the drifted start radius.
    pub mu_cutoff_sigmas: f64,
    /// Cap on panels per one-dimensional adaptive run.
    pub max_subdivisions: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            mu_cutoff_sigmas: 12.0,
            max_subdivisions: 400,
        }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return domain(format!("rel_tol must be positive, got {}", self.rel_tol));
        }
        if !(self.abs_tol >= 0.0 && self.abs_tol.is_finite()) {
            return domain(format!("abs_tol must be >= 0, got {}", self.abs_tol));
        }
        if !(self.mu_cutoff_sigmas >= 8.0) {
            return domain(format!(
                "mu_cutoff_sigmas must be at least 8, got {}",
                self.mu_cutoff_sigmas
            ));
        }
        if self.max_subdivisions < 1 {
            return domain("max_subdivisions must be at least 1");
        }
        Ok(())
    }

    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    fn inner(&self, outer_length: f64) -> Self {
        Self {
            rel_tol: 0.1 * self.rel_tol,
            abs_tol: 0.1 * self.abs_tol / outer_length.max(1.0),
            ..*self
        }
    }
}

/// An integral together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Upper end of the radial integration range at time `t`:
/// `base + drift_speed t + sigmas sqrt(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialWindow {
    pub base: f64,
    pub drift_speed: f64,
}

impl RadialWindow {
    pub fn upper(&self, t: f64, sigmas: f64) -> f64 {
        self.base + self.drift_speed * t + sigmas * t.sqrt()
    }
}

// 21-point Kronrod nodes on [0, 1] (symmetric) and weights; the 10-point
// Gauss rule uses the odd-indexed nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Abscissae of the 21-point rule on `[a, b]`, in a fixed order.
fn kronrod_nodes(a: f64, b: f64) -> [f64; 21] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [c; 21];
    for j in 0..10 {
        x[2 * j] = c - h * XGK[j];
        x[2 * j + 1] = c + h * XGK[j];
    }
    x
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Applies the 21-point rule to one panel. `f` returns a value and an
/// additional error already present in it (from a nested integral).
fn gk21<F>(f: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    let nodes = kronrod_nodes(a, b);
    let evals: Vec<Result<(f64, f64)>> = (0..21).into_par_iter().map(|i| f(nodes[i])).collect();
    let mut fv = [0.0; 21];
    let mut inner_err = [0.0; 21];
    for (i, e) in evals.into_iter().enumerate() {
        let (v, err) = e?;
        if !v.is_finite() {
            return domain(format!("integrand is not finite at {}: {v}", nodes[i]));
        }
        fv[i] = v;
        inner_err[i] = err;
    }
    let h = 0.5 * (b - a);
    let fc = fv[20];
    let mut kron = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = WGK[10] * fc.abs();
    let mut propagated = WGK[10] * inner_err[20];
    for j in 0..10 {
        let pair = fv[2 * j] + fv[2 * j + 1];
        kron += WGK[j] * pair;
        abs_sum += WGK[j] * (fv[2 * j].abs() + fv[2 * j + 1].abs());
        propagated += WGK[j] * (inner_err[2 * j] + inner_err[2 * j + 1]);
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let mean = 0.5 * kron;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let value = kron * h;
    let res_abs = abs_sum * h.abs();
    let res_asc = asc * h.abs();
    let mut error = ((kron - gauss) * h).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel {
        a,
        b,
        value,
        error: error + propagated * h.abs(),
    })
}

fn adaptive<F>(f: &F, a: f64, b: f64, rel_tol: f64, abs_tol: f64, max_sub: usize) -> Result<Estimate>
where
    F: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    if a == b {
        return Ok(Estimate::default());
    }
    let mut panels = vec![gk21(f, a, b)?];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Estimate { value, error });
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let mid = 0.5 * (p.a + p.b);
                mid > p.a.min(p.b) && mid < p.a.max(p.b)
            })
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i);
        let Some(i) = worst.filter(|_| panels.len() < max_sub) else {
            return Err(Error::QuadratureFailure {
                value,
                error,
                subdivisions: panels.len(),
            });
        };
        let p = panels.swap_remove(i);
        let mid = 0.5 * (p.a + p.b);
        let (left, right) = (gk21(f, p.a, mid)?, gk21(f, mid, p.b)?);
        panels.push(left);
        panels.push(right);
        // Keep panels in abscissa order so the summation order is fixed.
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    }
}

/// `int_a^b f(x) dx` to `max(abs_tol, rel_tol |I|)`.
pub fn integrate_1d<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Estimate>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    adaptive(&|x| f(x).map(|v| (v, 0.0)), a, b, rel_tol, abs_tol, max_subdivisions)
}

/// `int_0^T int_0^inf f(t, mu) dmu dt`, truncating the radial range at
/// `window.upper(t, spec.mu_cutoff_sigmas)`.
pub fn integrate_time_radius<F>(integrand: F, horizon: f64, window: RadialWindow, spec: &QuadSpec) -> Result<Estimate>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    integrate_time_radius_clipped(integrand, horizon, window, spec, |_, upper| Ok(upper))
}

/// As [`integrate_time_radius`], with the radial range further cut at
/// `clip(t, upper)`; used when the integrand is known to vanish beyond a
/// `t`-dependent point, so the kink there does not drive refinement.
pub fn integrate_time_radius_clipped<F, C>(
    integrand: F,
    horizon: f64,
    window: RadialWindow,
    spec: &QuadSpec,
    clip: C,
) -> Result<Estimate>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
    C: Fn(f64, f64) -> Result<f64> + Sync,
{
    spec.validate()?;
    if !(horizon > 0.0) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    let inner = spec.inner(horizon);
    let outer = |u: f64| -> Result<(f64, f64)> {
        let t = horizon * u * u;
        if t <= 0.0 {
            return Ok((0.0, 0.0));
        }
        let jac = 2.0 * horizon * u;
        let full = window.upper(t, spec.mu_cutoff_sigmas);
        let upper = clip(t, full)?.clamp(0.0, full);
        let est = integrate_1d(
            |mu| integrand(t, mu),
            0.0,
            upper,
            inner.rel_tol,
            inner.abs_tol,
            spec.max_subdivisions,
        )?;
        Ok((jac * est.value, jac * est.error))
    };
    adaptive(&outer, 0.0, 1.0, spec.rel_tol, spec.abs_tol, spec.max_subdivisions)
}

/// `int_0^L int_0^alpha f(mu, kappa) dkappa dmu` where the inner integrand
/// is built once per radius by `make_inner(mu)`; lets callers hoist work
/// that only depends on `mu` out of the angular loop.
pub fn integrate_wedge_factored<M, G>(
    make_inner: M,
    wedge_angle: f64,
    radial_limit: f64,
    spec: &QuadSpec,
) -> Result<Estimate>
where
    M: Fn(f64) -> Result<G> + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    spec.validate()?;
    if !(wedge_angle > 0.0 && radial_limit > 0.0) {
        return domain("wedge angle and radial limit must be positive");
    }
    let inner = spec.inner(radial_limit);
    let outer = |mu: f64| -> Result<(f64, f64)> {
        let g = make_inner(mu)?;
        let est = integrate_1d(
            |k| Ok(g(k)),
            0.0,
            wedge_angle,
            inner.rel_tol,
            inner.abs_tol,
            spec.max_subdivisions,
        )?;
        Ok((est.value, est.error))
    };
    adaptive(
        &outer,
        0.0,
        radial_limit,
        spec.rel_tol,
        spec.abs_tol,
        spec.max_subdivisions,
    )
}

/// `int_0^L int_0^alpha f(mu, kappa) dkappa dmu`.
pub fn integrate_wedge<F>(integrand: F, wedge_angle: f64, radial_limit: f64, spec: &QuadSpec) -> Result<Estimate>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    // Errors inside the angular integrand are carried out through this cell.
    let failure = std::sync::Mutex::new(None);
    let result = integrate_wedge_factored(
        |mu| {
            let integrand = &integrand;
            let failure = &failure;
            Ok(move |k: f64| match integrand(mu, k) {
                Ok(v) => v,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    0.0
                }
            })
        },
        wedge_angle,
        radial_limit,
        spec,
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    result
}

/// Composite fixed rule (`panels_t x panels_mu` Kronrod panels) for the same
/// double integral as [`integrate_time_radius`]; used as a refinement check.
pub fn fixed_time_radius<F>(
    integrand: F,
    horizon: f64,
    window: RadialWindow,
    sigmas: f64,
    panels_t: usize,
    panels_mu: usize,
) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let rows: Vec<Result<f64>> = (0..panels_t)
        .into_par_iter()
        .map(|i| {
            let (u0, u1) = (i as f64 / panels_t as f64, (i + 1) as f64 / panels_t as f64);
            let mut acc = 0.0;
            for (k, &u) in kronrod_nodes(u0, u1).iter().enumerate() {
                let t = horizon * u * u;
                let upper = window.upper(t, sigmas);
                let mut inner = 0.0;
                for j in 0..panels_mu {
                    let (m0, m1) = (
                        upper * j as f64 / panels_mu as f64,
                        upper * (j + 1) as f64 / panels_mu as f64,
                    );
                    for (l, &mu) in kronrod_nodes(m0, m1).iter().enumerate() {
                        inner += kronrod_weight(l) * 0.5 * (m1 - m0) * integrand(t, mu)?;
                    }
                }
                acc += kronrod_weight(k) * 0.5 * (u1 - u0) * 2.0 * horizon * u * inner;
            }
            Ok(acc)
        })
        .collect();
    rows.into_iter().sum()
}

/// Average of `f(t, x)` over the rectangle `[t0, t1] x [x0, x1]` with the
/// 21 x 21 Kronrod tensor rule.
pub fn rect_average<F>(f: F, t: (f64, f64), x: (f64, f64)) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let (tn, xn) = (kronrod_nodes(t.0, t.1), kronrod_nodes(x.0, x.1));
    let rows: Vec<Result<f64>> = (0..21)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for (j, &xj) in xn.iter().enumerate() {
                acc += kronrod_weight(j) * f(tn[i], xj)?;
            }
            Ok(kronrod_weight(i) * acc)
        })
        .collect();
    // The weights of each 1-D rule sum to 2.
    Ok(rows.into_iter().sum::<Result<f64>>()? / 4.0)
}

fn kronrod_weight(i: usize) -> f64 {
    if i == 20 {
        WGK[10]
    } else {
        WGK[i / 2]
    }
}
