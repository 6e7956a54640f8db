use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use imcmc_core::imwg::{ScalarDistanceAdaptive, StepSizes};
use imcmc_core::lgssm::{initial_ensemble, simulate, InitScheme, LgssmModel, LgssmPosterior};
use imcmc_core::{
    imwg_sweep, sweep, Centering, ChainEnsemble, DistanceAdaptiveGaussian, GaussianMixture, SweepOptions,
};

fn square(n: usize) -> ChainEnsemble {
    ChainEnsemble::from_chains((0..n).map(|i| vec![-15.0 + 25.0 * i as f64 / n as f64, (i % 10) as f64])).unwrap()
}

fn imh_sweep(c: &mut Criterion) {
    let target = GaussianMixture::three_modes(1.0).unwrap();
    let kernel = DistanceAdaptiveGaussian::new(1e-3, 1e6, Centering::Current).unwrap();
    let mut group = c.benchmark_group("imh_sweep");
    for n in [10, 50, 100] {
        for parallel in [false, true] {
            let opts = SweepOptions::new(1).parallel(parallel);
            let id = BenchmarkId::new(if parallel { "parallel" } else { "sequential" }, n);
            group.bench_with_input(id, &n, |b, &n| {
                let mut ens = square(n);
                b.iter(|| sweep(black_box(&mut ens), &target, &kernel, &opts).unwrap());
            });
        }
    }
    group.finish();
}

fn mwg_sweep(c: &mut Criterion) {
    let model = LgssmModel::default();
    let data = simulate(&model, 1).unwrap();
    let post = LgssmPosterior::new(&model, &data.y).unwrap();
    let kernel = ScalarDistanceAdaptive::new(StepSizes::uniform(1.0), 1e-3, 1e6, Centering::Current).unwrap();
    let opts = SweepOptions::new(1);
    let mut group = c.benchmark_group("imwg_sweep");
    for n in [10, 50] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut ens = initial_ensemble(&model, &data.y, InitScheme::Observations, n, 2).unwrap();
            b.iter(|| imwg_sweep(black_box(&mut ens), &post, &kernel, &opts).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, imh_sweep, mwg_sweep);
criterion_main!(benches);
