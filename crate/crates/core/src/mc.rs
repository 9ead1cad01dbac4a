//! Monte Carlo oracle for the joint default law.
//!
//! Log-distances to the barriers are simulated exactly on a fine grid of
//! `ceil(T * steps_per_year)` steps, checked for a barrier breach at every
//! grid point and, with `bridge_correction`, additionally killed inside a step
//! with the one-sided Brownian-bridge crossing probability
//! `exp(-2 d_k d_{k+1} / (sigma^2 dt))`, independently per firm.
//!
//! The fine grid is never walked step by step. Each path first draws its
//! endpoint at `T`, then bisects the time range with exact Brownian-bridge
//! draws of the driving noise. An interval is dropped as soon as both firms
//! are, with probability at least `1 - 1e-12`, too far from their barriers for
//! any fine step inside it to default. Only intervals that may contain a
//! default are refined down to single steps, where the checks above apply. The
//! result has the law of the step-by-step scheme up to events of probability
//! `1e-12` per dropped interval.
//!
//! Paths run in fixed batches of [`BATCH`], each with its own ChaCha8 stream
//! (`seed`, stream = batch index), and batch results are merged in batch
//! order, so estimates do not depend on the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{drift_nu, CdsContract, FirmParams, FtdContract, MarketParams};
use crate::par::*;
use crate::singlename::{cds_value_at_default_with, FeeConvention, SingleNameCoeffs};

/// Paths per independent random stream.
pub const BATCH: usize = 4096;

/// Probability bound for skipping an interval without refining it.
const LN_SKIP: f64 = -27.631_021_115_928_547; // ln(1e-12)

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 1_000_000,
            steps_per_year: 2000,
            seed: 20_240_601,
            bridge_correction: true,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1000 {
            return domain(format!("n_paths must be at least 1000, got {}", self.n_paths));
        }
        if self.steps_per_year < 250 {
            return domain(format!(
                "steps_per_year must be at least 250, got {}",
                self.steps_per_year
            ));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: u64,
}

impl McEstimate {
    fn scaled(self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            std_error: self.std_error * factor.abs(),
            ..self
        }
    }

    /// `(value - mean) / std_error`, or 0 when both coincide exactly.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = value - self.mean;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// Streaming mean and co-moment matrix of a `K`-vector (Welford updates,
/// pairwise merging).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<const K: usize> {
    pub n: u64,
    pub mean: [f64; K],
    comoment: [[f64; K]; K],
}

impl<const K: usize> Default for Moments<K> {
    fn default() -> Self {
        Self {
            n: 0,
            mean: [0.0; K],
            comoment: [[0.0; K]; K],
        }
    }
}

impl<const K: usize> Moments<K> {
    pub fn push(&mut self, x: &[f64; K]) {
        self.n += 1;
        let n = self.n as f64;
        let mut delta = [0.0; K];
        for i in 0..K {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / n;
        }
        for i in 0..K {
            for j in 0..K {
                self.comoment[i][j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let mut delta = [0.0; K];
        for i in 0..K {
            delta[i] = other.mean[i] - self.mean[i];
        }
        for i in 0..K {
            for j in 0..K {
                self.comoment[i][j] += other.comoment[i][j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..K {
            self.mean[i] += delta[i] * nb / n;
        }
        self.n += other.n;
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.comoment[i][j] / (self.n - 1) as f64
        }
    }

    /// Estimate of `sum_i w_i E[x_i]`.
    pub fn combination(&self, weights: &[f64; K]) -> McEstimate {
        let mean = (0..K).map(|i| weights[i] * self.mean[i]).sum();
        let mut var = 0.0;
        for i in 0..K {
            for j in 0..K {
                var += weights[i] * weights[j] * self.covariance(i, j);
            }
        }
        McEstimate {
            mean,
            std_error: (var.max(0.0) / self.n.max(1) as f64).sqrt(),
            n_effective: self.n,
        }
    }

    pub fn component(&self, i: usize) -> McEstimate {
        let mut w = [0.0; K];
        w[i] = 1.0;
        self.combination(&w)
    }

    /// Delta-method estimate of `E[x_i] / E[x_j]`.
    pub fn ratio(&self, i: usize, j: usize) -> McEstimate {
        let (a, b) = (self.mean[i], self.mean[j]);
        let r = a / b;
        let var = (self.covariance(i, i) - 2.0 * r * self.covariance(i, j) + r * r * self.covariance(j, j)) / (b * b);
        McEstimate {
            mean: r,
            std_error: (var.max(0.0) / self.n.max(1) as f64).sqrt(),
            n_effective: self.n,
        }
    }
}

/// First passage of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Passage<const D: usize> {
    /// Index of the defaulting firm, if any default happened by `T`.
    firm: Option<usize>,
    tau: f64,
    /// Log-distances at `tau` (at `T` for survivors).
    y: [f64; D],
}

#[derive(Debug, Clone, Copy)]
struct Node<const D: usize> {
    step: usize,
    w: [f64; D],
    y: [f64; D],
}

/// Log-distances `Y = y0 + drift t + chol W` with `W` a standard Brownian
/// motion in `D` dimensions.
struct Engine<const D: usize> {
    y0: [f64; D],
    drift: [f64; D],
    chol: [[f64; D]; D],
    sigma: [f64; D],
    dt: f64,
    n_steps: usize,
    margin: [f64; D],
    bridge: bool,
}

impl<const D: usize> Engine<D> {
    fn new(y0: [f64; D], drift: [f64; D], chol: [[f64; D]; D], horizon: f64, cfg: &McConfig) -> Self {
        let n_steps = ((horizon * cfg.steps_per_year as f64).ceil() as usize).max(1);
        let dt = horizon / n_steps as f64;
        let mut sigma = [0.0; D];
        let mut margin = [0.0; D];
        for k in 0..D {
            sigma[k] = chol[k].iter().map(|c| c * c).sum::<f64>().sqrt();
            // Both step ends above the margin keep the per-step crossing
            // probability below 1e-12.
            if cfg.bridge_correction {
                margin[k] = sigma[k] * (-LN_SKIP * dt / 2.0).sqrt();
            }
        }
        Self {
            y0,
            drift,
            chol,
            sigma,
            dt,
            n_steps,
            margin,
            bridge: cfg.bridge_correction,
        }
    }

    fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    fn node(&self, step: usize, w: [f64; D]) -> Node<D> {
        let t = step as f64 * self.dt;
        let mut y = [0.0; D];
        for k in 0..D {
            y[k] = self.y0[k] + self.drift[k] * t + (0..D).map(|j| self.chol[k][j] * w[j]).sum::<f64>();
        }
        Node { step, w, y }
    }

    fn path<R: Rng>(&self, rng: &mut R) -> Passage<D> {
        let start = Node {
            step: 0,
            w: [0.0; D],
            y: self.y0,
        };
        let sd = self.horizon().sqrt();
        let mut w = [0.0; D];
        for wk in w.iter_mut() {
            *wk = sd * rng.sample::<f64, _>(StandardNormal);
        }
        let end = self.node(self.n_steps, w);
        self.refine(rng, &start, &end).unwrap_or(Passage {
            firm: None,
            tau: self.horizon(),
            y: end.y,
        })
    }

    fn skippable(&self, a: &Node<D>, b: &Node<D>) -> bool {
        let span = (b.step - a.step) as f64 * self.dt;
        (0..D).all(|k| {
            let (d0, d1) = (a.y[k] - self.margin[k], b.y[k] - self.margin[k]);
            d0 > 0.0 && d1 > 0.0 && -2.0 * d0 * d1 / (self.sigma[k] * self.sigma[k] * span) < LN_SKIP
        })
    }

    fn refine<R: Rng>(&self, rng: &mut R, a: &Node<D>, b: &Node<D>) -> Option<Passage<D>> {
        if b.step - a.step == 1 {
            return self.fine_step(rng, a, b);
        }
        if self.skippable(a, b) {
            return None;
        }
        let mid = (a.step + b.step) / 2;
        let (left, right) = ((mid - a.step) as f64, (b.step - mid) as f64);
        let frac = left / (left + right);
        let sd = (self.dt * left * right / (left + right)).sqrt();
        let mut w = [0.0; D];
        for k in 0..D {
            w[k] = a.w[k] + frac * (b.w[k] - a.w[k]) + sd * rng.sample::<f64, _>(StandardNormal);
        }
        let m = self.node(mid, w);
        self.refine(rng, a, &m).or_else(|| self.refine(rng, &m, b))
    }

    fn fine_step<R: Rng>(&self, rng: &mut R, a: &Node<D>, b: &Node<D>) -> Option<Passage<D>> {
        let mut first: Option<(f64, usize)> = None;
        for k in 0..D {
            let (d0, d1) = (a.y[k].max(0.0), b.y[k]);
            let frac = if d1 <= 0.0 {
                Some(if d0 > 0.0 { d0 / (d0 - d1) } else { 0.0 })
            } else if self.bridge {
                let p = (-2.0 * d0 * d1 / (self.sigma[k] * self.sigma[k] * self.dt)).exp();
                (p > 0.0 && rng.gen::<f64>() < p).then_some(0.5)
            } else {
                None
            };
            if let Some(f) = frac {
                if first.is_none_or(|(g, _)| f < g) {
                    first = Some((f, k));
                }
            }
        }
        first.map(|(f, k)| {
            let mut y = [0.0; D];
            for j in 0..D {
                y[j] = a.y[j] + f * (b.y[j] - a.y[j]);
            }
            y[k] = 0.0;
            Passage {
                firm: Some(k),
                tau: (a.step as f64 + f) * self.dt,
                y,
            }
        })
    }
}

/// Runs all paths in fixed batches and folds each batch into its own state;
/// batch states are merged in order.
fn fold_paths<const D: usize, S, I, F, M>(engine: &Engine<D>, cfg: &McConfig, init: I, fold: F, merge: M) -> S
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &Passage<D>) + Sync,
    M: Fn(&mut S, S),
{
    let n_batches = cfg.n_paths.div_ceil(BATCH);
    let states: Vec<S> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let size = BATCH.min(cfg.n_paths - b * BATCH);
            let mut state = init();
            for _ in 0..size {
                let p = engine.path(&mut rng);
                fold(&mut state, &p);
            }
            state
        })
        .collect();
    let mut it = states.into_iter();
    let mut acc = it.next().unwrap_or_else(&init);
    for s in it {
        merge(&mut acc, s);
    }
    acc
}

fn pair_engine(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    horizon: f64,
    cfg: &McConfig,
) -> Result<Engine<2>> {
    firm1.validate("firm1")?;
    firm2.validate("firm2")?;
    mkt.validate()?;
    cfg.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    let rho = mkt.rho;
    let (s1, s2) = (firm1.sigma, firm2.sigma);
    Ok(Engine::new(
        [firm1.log_distance(), firm2.log_distance()],
        [drift_nu(firm1, mkt), drift_nu(firm2, mkt)],
        [[s1, 0.0], [s2 * rho, s2 * (1.0 - rho * rho).sqrt()]],
        horizon,
        cfg,
    ))
}

/// Which firm defaulted first on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstDefault {
    Firm1,
    Firm2,
    None,
}

/// Outcome of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub first: FirstDefault,
    /// Default time, or the horizon for survivors.
    pub tau: f64,
    /// Survivor's position along the boundary that was hit, in wedge
    /// coordinates (`Z1` on the horizontal side, the radius on the slanted
    /// side); zero for survivors.
    pub survivor_coord: f64,
}

fn record(p: &Passage<2>, firm1: &FirmParams, firm2: &FirmParams, rho: f64) -> PathRecord {
    let s = (1.0 - rho * rho).sqrt();
    match p.firm {
        Some(0) => PathRecord {
            first: FirstDefault::Firm1,
            tau: p.tau,
            survivor_coord: p.y[1] / (firm2.sigma * s),
        },
        Some(_) => PathRecord {
            first: FirstDefault::Firm2,
            tau: p.tau,
            survivor_coord: p.y[0] / (firm1.sigma * s),
        },
        None => PathRecord {
            first: FirstDefault::None,
            tau: p.tau,
            survivor_coord: 0.0,
        },
    }
}

/// Simulates `cfg.n_paths` paths and returns one record per path, in batch
/// order.
pub fn simulate_first_passage(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    horizon: f64,
    cfg: &McConfig,
) -> Result<Vec<PathRecord>> {
    let engine = pair_engine(firm1, firm2, mkt, horizon, cfg)?;
    Ok(fold_paths(
        &engine,
        cfg,
        Vec::new,
        |v, p| v.push(record(p, firm1, firm2, mkt.rho)),
        |a, b| a.extend(b),
    ))
}

const PV1: usize = 0;
const PV2: usize = 1;
const ANNUITY: usize = 2;
const EXPOSURE: usize = 3;
const P1: usize = 4;
const P2: usize = 5;
const SURVIVE: usize = 6;
const PV_ANY: usize = 7;
const N_PAYOFFS: usize = 8;

/// Per-path payoff moments from which every leg estimate is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McLegs {
    pub moments: Moments<N_PAYOFFS>,
    pub maturity: f64,
}

/// The four legs an estimate can be requested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegKind {
    CounterpartyDefault,
    StandardDefault,
    Fee,
    FtdDefault,
}

impl McLegs {
    /// `E[exp(-r tau1) 1{firm 1 first}]`.
    pub fn firm1_first_pv(&self) -> McEstimate {
        self.moments.component(PV1)
    }

    /// `E[exp(-r tau2) 1{firm 2 first}]`.
    pub fn firm2_first_pv(&self) -> McEstimate {
        self.moments.component(PV2)
    }

    /// `E[(1 - exp(-r (tau ^ T))) / r]`.
    pub fn annuity(&self) -> McEstimate {
        self.moments.component(ANNUITY)
    }

    pub fn firm1_first(&self) -> McEstimate {
        self.moments.component(P1)
    }

    pub fn firm2_first(&self) -> McEstimate {
        self.moments.component(P2)
    }

    pub fn survival(&self) -> McEstimate {
        self.moments.component(SURVIVE)
    }

    pub fn standard_leg(&self, c: &CdsContract) -> McEstimate {
        self.firm1_first_pv().scaled(c.notional * (1.0 - c.recovery_underlying))
    }

    /// Uses the exposure of the contract the legs were simulated with.
    pub fn counterparty_leg(&self, c: &CdsContract) -> McEstimate {
        self.moments.component(EXPOSURE).scaled(1.0 - c.recovery_counterparty)
    }

    pub fn fee_leg(&self, c: &CdsContract) -> McEstimate {
        self.annuity().scaled(c.notional * c.spread)
    }

    /// `D_s + D_c - F`, with the covariance between legs.
    pub fn cds_value(&self, c: &CdsContract) -> McEstimate {
        let mut w = [0.0; N_PAYOFFS];
        w[PV1] = c.notional * (1.0 - c.recovery_underlying);
        w[EXPOSURE] = 1.0 - c.recovery_counterparty;
        w[ANNUITY] = -c.notional * c.spread;
        self.moments.combination(&w)
    }

    pub fn ftd_leg(&self, c: &FtdContract) -> McEstimate {
        self.moments.component(PV_ANY).scaled(c.notional * (1.0 - c.recovery))
    }

    /// Delta-method estimate of the first-to-default spread.
    pub fn ftd_spread(&self, c: &FtdContract) -> McEstimate {
        self.moments.ratio(PV_ANY, ANNUITY).scaled(1.0 - c.recovery)
    }

    pub fn leg(&self, kind: LegKind, cds: &CdsContract, ftd: &FtdContract) -> McEstimate {
        match kind {
            LegKind::CounterpartyDefault => self.counterparty_leg(cds),
            LegKind::StandardDefault => self.standard_leg(cds),
            LegKind::Fee => self.fee_leg(cds),
            LegKind::FtdDefault => self.ftd_leg(ftd),
        }
    }
}

fn annuity(r: f64, t: f64) -> f64 {
    if r * t < 1e-8 {
        t * (1.0 - 0.5 * r * t)
    } else {
        -(-r * t).exp_m1() / r
    }
}

/// One simulation feeding every leg. The contract's spread and recoveries
/// enter only the counterparty exposure; the horizon is its maturity. With
/// `r = 0` the exposure is not defined and reported as zero.
pub fn mc_legs(
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    contract: &CdsContract,
    cfg: &McConfig,
    fees: FeeConvention,
) -> Result<McLegs> {
    contract.validate()?;
    let horizon = contract.maturity;
    let engine = pair_engine(firm1, firm2, mkt, horizon, cfg)?;
    let coeffs = SingleNameCoeffs::from_firm(firm1, mkt)?;
    let r = mkt.r;
    let with_exposure = r > 0.0;
    let moments = fold_paths(
        &engine,
        cfg,
        Moments::<N_PAYOFFS>::default,
        |m, p| {
            let mut x = [0.0; N_PAYOFFS];
            let tau = p.tau.min(horizon);
            x[ANNUITY] = annuity(r, tau);
            match p.firm {
                Some(0) => {
                    x[PV1] = (-r * tau).exp();
                    x[P1] = 1.0;
                }
                Some(_) => {
                    x[PV2] = (-r * tau).exp();
                    x[P2] = 1.0;
                    if with_exposure && tau < horizon {
                        let mu = p.y[0] / firm1.sigma;
                        x[EXPOSURE] =
                            cds_value_at_default_with(mu, tau, contract, &coeffs, mkt, fees).unwrap_or(f64::NAN);
                    }
                }
                None => x[SURVIVE] = 1.0,
            }
            x[PV_ANY] = x[PV1] + x[PV2];
            m.push(&x);
        },
        |a, b| a.merge(&b),
    );
    Ok(McLegs {
        moments,
        maturity: horizon,
    })
}

/// Estimate of a single leg; see [`mc_legs`] to get all of them from one run.
pub fn mc_leg(
    kind: LegKind,
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    cds: &CdsContract,
    ftd: &FtdContract,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if kind == LegKind::FtdDefault {
        ftd.validate()?;
        if ftd.maturity != cds.maturity {
            return domain("the first-to-default contract must share the CDS maturity");
        }
    }
    Ok(mc_legs(firm1, firm2, mkt, cds, cfg, FeeConvention::default())?.leg(kind, cds, ftd))
}

/// Side of the wedge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Firm 2 defaults first.
    Horizontal,
    /// Firm 1 defaults first.
    Slanted,
}

/// Empirical joint density of (default time, survivor coordinate) for paths
/// whose first default is on one boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub t_edges: Vec<f64>,
    pub space_edges: Vec<f64>,
    /// `counts[i][j]` for time bin `i` and space bin `j`.
    pub counts: Vec<Vec<u64>>,
    pub density: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    /// Paths whose first default was on this boundary.
    pub hits: u64,
    /// Paths with no default by the horizon.
    pub survivors: u64,
    pub n_paths: u64,
}

fn bin(edges: &[f64], x: f64) -> Option<usize> {
    if edges.len() < 2 || x < edges[0] || x >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

/// Histogram of first defaults on `boundary`, normalized by the total
/// number of paths and the bin area.
#[allow(clippy::too_many_arguments)]
pub fn mc_hitting_histogram(
    boundary: Boundary,
    firm1: &FirmParams,
    firm2: &FirmParams,
    mkt: &MarketParams,
    horizon: f64,
    t_edges: &[f64],
    space_edges: &[f64],
    cfg: &McConfig,
) -> Result<Histogram> {
    for edges in [t_edges, space_edges] {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("bin edges must be strictly increasing with at least two entries");
        }
    }
    let engine = pair_engine(firm1, firm2, mkt, horizon, cfg)?;
    let (nt, ns) = (t_edges.len() - 1, space_edges.len() - 1);
    let want = match boundary {
        Boundary::Horizontal => FirstDefault::Firm2,
        Boundary::Slanted => FirstDefault::Firm1,
    };
    // (bin counts, hits on this boundary, survivors)
    let (counts, hits, survivors) = fold_paths(
        &engine,
        cfg,
        || (vec![0u64; nt * ns], 0u64, 0u64),
        |(c, h, s), p| {
            let rec = record(p, firm1, firm2, mkt.rho);
            if rec.first == FirstDefault::None {
                *s += 1;
            } else if rec.first == want {
                *h += 1;
                if let (Some(i), Some(j)) = (bin(t_edges, rec.tau), bin(space_edges, rec.survivor_coord)) {
                    c[i * ns + j] += 1;
                }
            }
        },
        |(c, h, s), (c2, h2, s2)| {
            for (x, y) in c.iter_mut().zip(c2) {
                *x += y;
            }
            *h += h2;
            *s += s2;
        },
    );
    let n = cfg.n_paths as f64;
    let mut grid_counts = vec![vec![0u64; ns]; nt];
    let mut density = vec![vec![0.0; ns]; nt];
    let mut std_error = vec![vec![0.0; ns]; nt];
    for i in 0..nt {
        for j in 0..ns {
            let k = counts[i * ns + j];
            let area = (t_edges[i + 1] - t_edges[i]) * (space_edges[j + 1] - space_edges[j]);
            let p = k as f64 / n;
            grid_counts[i][j] = k;
            density[i][j] = p / area;
            std_error[i][j] = (p * (1.0 - p) / n).sqrt() / area;
        }
    }
    Ok(Histogram {
        t_edges: t_edges.to_vec(),
        space_edges: space_edges.to_vec(),
        counts: grid_counts,
        density,
        std_error,
        hits,
        survivors,
        n_paths: cfg.n_paths as u64,
    })
}

/// Single-name oracle: starting at scaled distance `mu` (log-distance over
/// volatility), estimates `P(tau <= horizon)` and `E[exp(-r tau) 1{tau < horizon}]`.
pub fn mc_single_name(
    firm: &FirmParams,
    mkt: &MarketParams,
    mu: f64,
    horizon: f64,
    cfg: &McConfig,
) -> Result<(McEstimate, McEstimate)> {
    firm.validate("firm1")?;
    mkt.validate()?;
    cfg.validate()?;
    if !(mu > 0.0 && horizon > 0.0) {
        return domain(format!("need mu > 0 and horizon > 0, got ({mu}, {horizon})"));
    }
    let engine = Engine::new([mu * firm.sigma], [drift_nu(firm, mkt)], [[firm.sigma]], horizon, cfg);
    let r = mkt.r;
    let m = fold_paths(
        &engine,
        cfg,
        Moments::<2>::default,
        |m, p| {
            let x = if p.firm.is_some() {
                [1.0, (-r * p.tau).exp()]
            } else {
                [0.0, 0.0]
            };
            m.push(&x);
        },
        |a, b| a.merge(&b),
    );
    Ok((m.component(0), m.component(1)))
}
