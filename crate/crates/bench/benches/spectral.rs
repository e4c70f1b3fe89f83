use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use exactdim::*;

fn layer(m: u64, e: &ExponentSet) -> Arc<ScaleLayer> {
    let params = LayerParams {
        psi1: ApproxFunction::power(e.tau1).unwrap(),
        psi2: ApproxFunction::power(e.tau2).unwrap(),
        epsilon: e.epsilon,
        theta: ThetaSpec::Zero,
        bump: Arc::new(default_bump()),
    };
    Arc::new(ScaleLayer::new(m, &params).unwrap())
}

fn f_hat(c: &mut Criterion) {
    let e = derive_exponents(1.0, 2.634, 2.0, 0.05).unwrap();
    let mut g = c.benchmark_group("f_hat");
    for m in [16u64, 1429, 100_000] {
        let l = layer(m, &e);
        let s: Vec<i64> = l.primes.iter().take(64).map(|&q| 7 * q as i64).collect();
        g.bench_with_input(BenchmarkId::from_parameter(m), &s, |b, s| {
            b.iter(|| s.iter().map(|&s| l.f_hat(black_box(s))).sum::<Complex64>())
        });
    }
    g.finish();
}

fn product(c: &mut Criterion) {
    let e = derive_exponents(1.0, 2.634, 2.0, 0.05).unwrap();
    let sched = ScaleSchedule::new(16, e.beta_eps, 2).unwrap();
    let layers: Vec<_> = sched.scales.iter().map(|&m| layer(m, &e)).collect();
    let mut g = c.benchmark_group("product_measure");
    g.sample_size(10);
    for dense in [500i64, 5000] {
        let opts = MeasureOptions {
            dense_window: dense,
            log_samples: 100,
            tail_samples: 20,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::new("depth2", dense), &opts, |b, o| {
            b.iter(|| product_measure(&sched, &layers, &e, o).unwrap())
        });
    }
    g.finish();
}

fn stability(c: &mut Criterion) {
    let e = derive_exponents(1.0, 2.634, 2.0, 0.05).unwrap();
    let opts = StabilityOptions::default();
    let mut g = c.benchmark_group("synthetic_stability");
    g.sample_size(10);
    for m in [16u64, 64] {
        let env = SyntheticEnvelopes::new(m, &e);
        g.bench_with_input(BenchmarkId::from_parameter(m), &env, |b, env| {
            b.iter(|| synthetic_stability(env, &opts).unwrap())
        });
    }
    g.finish();
}

fn normality(c: &mut Criterion) {
    let mu = SpectralVector::from_fn(
        1 << 16,
        |s| Complex64::new((1.0 + s.abs() as f64).powf(-0.3), 0.0),
        TailDescriptor {
            amplitude: 1.0,
            scale: 1e4,
        },
        65536.0,
        "bench",
    )
    .unwrap();
    c.bench_function("normality_sum/N=10000", |b| {
        b.iter(|| normality_sum(&mu, 2, 1, 10_000, Mode::Desk).unwrap())
    });
}

criterion_group!(benches, f_hat, product, stability, normality);
criterion_main!(benches);
