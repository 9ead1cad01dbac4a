//! Single-thread vs multi-thread timings for the two data-parallel kernels.
//!
//! With `--no-default-features` the library runs its sequential fallback and
//! both variants should time the same.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;

use wedge_credit::jointlaw::{normalization_check, WedgeDensityParams};
use wedge_credit::mc::{mc_legs, McConfig};
use wedge_credit::model::{derive_wedge, CdsContract, FirmParams, MarketParams};
use wedge_credit::pricing::{counterparty_default_leg, PricingSpec};
use wedge_credit::quadrature::QuadSpec;
use wedge_credit::singlename::FeeConvention;

fn setup() -> (FirmParams, FirmParams, MarketParams, CdsContract) {
    let f1 = FirmParams::from_log_distance(0.8, 0.2, 0.0, 0.0).unwrap();
    let f2 = FirmParams::from_log_distance(1.2, 0.3, 0.0, 0.0).unwrap();
    let mkt = MarketParams::new(0.05, 0.4).unwrap();
    let cds = CdsContract {
        notional: 1.0,
        recovery_underlying: 0.4,
        recovery_counterparty: 0.4,
        spread: 0.02,
        maturity: 5.0,
    };
    (f1, f2, mkt, cds)
}

/// A one-thread pool and a pool as wide as the machine. On a single-core
/// machine both have one thread.
fn pools() -> Vec<(String, ThreadPool)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    [("sequential", 1), ("parallel", all)]
        .into_iter()
        .map(|(name, n)| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            (format!("{name}_{n}t"), pool)
        })
        .collect()
}

fn monte_carlo(c: &mut Criterion) {
    let (f1, f2, mkt, cds) = setup();
    let cfg = McConfig {
        n_paths: 50_000,
        steps_per_year: 500,
        ..McConfig::default()
    };
    let mut group = c.benchmark_group("mc_legs_50k_paths");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| pool.install(|| mc_legs(&f1, &f2, &mkt, &cds, &cfg, FeeConvention::Exact).unwrap()))
        });
    }
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    let (f1, f2, mkt, cds) = setup();
    let p = WedgeDensityParams::new(derive_wedge(&f1, &f2, &mkt).unwrap());
    let spec = PricingSpec::default();
    let mut group = c.benchmark_group("quadrature");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::new("partition", &label), |b| {
            b.iter(|| pool.install(|| normalization_check(5.0, &p, &QuadSpec::default()).unwrap()))
        });
        group.bench_function(BenchmarkId::new("counterparty_leg", &label), |b| {
            b.iter(|| pool.install(|| counterparty_default_leg(&f1, &f2, &mkt, &cds, &spec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, quadrature);
criterion_main!(benches);
