//! Benchmarks for the pipeline stages that dominate runtime: patch
//! enumeration, type enumeration, the cone projection, and a full
//! bootstrap pass.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revpref::patches::enumerate_patches;
use revpref::simulate::{gen_mixture, MixtureSpec};
use revpref::stochastic::{
    bootstrap_pvalue, compute_jn, estimate_pi, BootstrapConfig, BoundaryPolicy,
};
use revpref::types::enumerate_types;
use revpref::OmegaSpec;

fn drifting_prices(periods: usize, goods: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..goods).map(|_| rng.gen_range(0.8..1.5)).collect();
    (0..periods)
        .map(|t| {
            base.iter()
                .map(|b| b * 0.95f64.powi(t as i32) * rng.gen_range(0.85..1.15))
                .collect()
        })
        .collect()
}

fn bench_patches(c: &mut Criterion) {
    let prices = drifting_prices(6, 4, 11);
    c.bench_function("enumerate_patches 6x4", |b| {
        b.iter(|| enumerate_patches(&prices).unwrap())
    });
}

fn bench_types(c: &mut Criterion) {
    let prices = drifting_prices(6, 4, 11);
    let layout = enumerate_patches(&prices).unwrap();
    c.bench_function("enumerate_types 6x4", |b| {
        b.iter(|| enumerate_types(&layout).unwrap())
    });
}

fn bench_projection(c: &mut Criterion) {
    let prices = drifting_prices(6, 4, 11);
    let layout = enumerate_patches(&prices).unwrap();
    let types = enumerate_types(&layout).unwrap();
    let h = types.h();
    let nu_star: Vec<f64> = {
        let picks: Vec<usize> = (0..8.min(h)).map(|i| i * h / 8.min(h)).collect();
        let mut nu = vec![0.0; h];
        for &j in &picks {
            nu[j] = 1.0 / picks.len() as f64;
        }
        nu
    };
    let data = gen_mixture(&MixtureSpec {
        types: &types,
        layout: &layout,
        nu_star,
        sample_sizes: vec![500; 6],
        expenditure_log_mean: 0.0,
        expenditure_log_sd: 0.25,
        seed: 3,
    })
    .unwrap();
    let pi = estimate_pi(&data, &layout, BoundaryPolicy::Drop).unwrap();
    c.bench_function("compute_jn 6x4", |b| {
        b.iter_batched(
            || pi.clone(),
            |pi| compute_jn(&pi, &types, &OmegaSpec::Identity).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_bootstrap(c: &mut Criterion) {
    let layout = enumerate_patches(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
    let types = enumerate_types(&layout).unwrap();
    let data = gen_mixture(&MixtureSpec {
        types: &types,
        layout: &layout,
        nu_star: vec![0.35, 0.45, 0.2],
        sample_sizes: vec![500, 500],
        expenditure_log_mean: 0.0,
        expenditure_log_sd: 0.25,
        seed: 5,
    })
    .unwrap();
    // perturb the first period so the statistic is positive and the
    // bootstrap actually runs
    let mut periods = data.periods().to_vec();
    for choice in periods[0].choices.iter_mut().take(150) {
        *choice = vec![0.45, 0.1];
    }
    let data = revpref::StochasticDataset::new(periods).unwrap();
    let config = BootstrapConfig {
        replications: 200,
        tau: None,
        omega: OmegaSpec::Identity,
        seed: 1,
        boundary: BoundaryPolicy::Drop,
    };
    c.bench_function("bootstrap_pvalue R=200", |b| {
        b.iter(|| bootstrap_pvalue(&data, &layout, &types, &config).unwrap())
    });
}

criterion_group!(
    benches,
    bench_patches,
    bench_types,
    bench_projection,
    bench_bootstrap
);
criterion_main!(benches);
