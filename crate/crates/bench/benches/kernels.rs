use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use glam_core::gld::{self, LambdaVector};
use glam_core::glam::{fit, Dataset, FitConfig, Likelihood, LikelihoodOptions};
use glam_core::harness::generate_data;
use glam_core::metrics::{wasserstein2, GldView};
use glam_core::pce::enumerate_truncation;
use glam_core::regression::ols;
use glam_core::simulators::{asian_average, sir_gillespie, SimulatorId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gld_kernels(c: &mut Criterion) {
    let lam = LambdaVector::new(0.3, 1.7, 0.12, -0.08).unwrap();
    c.bench_function("gld/quantile", |b| b.iter(|| gld::quantile(black_box(0.37), &lam)));
    c.bench_function("gld/pdf (inversion)", |b| b.iter(|| gld::pdf(black_box(0.9), &lam)));
    c.bench_function("gld/mean_variance", |b| b.iter(|| gld::mean_variance(black_box(&lam))));
    let other = GldView::new(LambdaVector::new(0.0, 1.0, 0.2, 0.2).unwrap()).unwrap();
    let view = GldView::new(lam).unwrap();
    c.bench_function("metrics/wasserstein2", |b| b.iter(|| wasserstein2(&view, &other)));
}

fn regression_kernels(c: &mut Criterion) {
    let id = SimulatorId::Heteroskedastic5d;
    let spec = id.spec();
    let (_, data) = generate_data(id, 2000, 1, 1).unwrap();
    let (x, y) = data.flatten();
    let mut g = c.benchmark_group("ols");
    for p in [2usize, 4] {
        let t = enumerate_truncation(p, 0.5, 5).unwrap();
        g.bench_with_input(BenchmarkId::new("n2000_dim5", t.len()), &t, |b, t| b.iter(|| ols(&spec.marginals, t, &x, &y)));
    }
    g.finish();
}

fn likelihood_kernels(c: &mut Criterion) {
    let id = SimulatorId::BlackScholes;
    let spec = id.spec();
    let (_, data) = generate_data(id, 1000, 1, 2).unwrap();
    let t1 = enumerate_truncation(3, 1.0, 2).unwrap();
    let t2 = enumerate_truncation(2, 1.0, 2).unwrap();
    let ts = enumerate_truncation(1, 1.0, 2).unwrap();
    let lik = Likelihood::new(&spec.marginals, [&t1, &t2, &ts, &ts], &data, LikelihoodOptions::default()).unwrap();
    let mut coef = vec![0.0; lik.dim()];
    let sizes = lik.block_sizes();
    coef[0] = 1.05;
    coef[sizes[0]] = 2.0;
    coef[sizes[0] + sizes[1]] = 0.1;
    coef[sizes[0] + sizes[1] + sizes[2]] = 0.1;
    c.bench_function("likelihood/value_and_gradient n1000", |b| b.iter(|| lik.value_and_gradient(black_box(&coef))));

    let (x, y) = data.flatten();
    let small = Dataset::new(x[..250].to_vec(), y[..250].to_vec()).unwrap();
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    g.bench_function("black-scholes n250", |b| b.iter(|| fit(&spec.marginals, &small, &FitConfig::default())));
    g.finish();
}

fn simulator_kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    c.bench_function("simulators/asian_average", |b| b.iter(|| asian_average(black_box([0.05, 0.2]), &mut rng)));
    c.bench_function("simulators/sir_gillespie", |b| b.iter(|| sir_gillespie(black_box([1500.0, 100.0]), &mut rng)));
}

criterion_group!(benches, gld_kernels, regression_kernels, likelihood_kernels, simulator_kernels);
criterion_main!(benches);
