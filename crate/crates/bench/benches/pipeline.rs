use std::hint::black_box;

use bolab_core::interpolator::{min_norm_fit, DesignSvd};
use bolab_core::risk::variance_trace;
use bolab_core::sampler::sample_design_homo;
use bolab_core::temporal::{materialize_homo, ToeplitzCov};
use bolab_core::{rng, BetaSpec, NoiseSpec, ProblemSpec, ScaledPower, SpatialSpectrum, SpectrumFamily, SpectrumSpec, TemporalSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn problem(p: usize) -> ProblemSpec {
    ProblemSpec {
        spectrum: SpectrumSpec {
            family: SpectrumFamily::PolyCut { gamma: 0.5, dim: ScaledPower::constant(p as f64) },
            truncation: Default::default(),
            basis: Default::default(),
        },
        design: TemporalSpec::ar1(0.5),
        noise: NoiseSpec::white(0.1),
        beta: BetaSpec::Power { scale: 1.0, exponent: -0.5 },
        allow_underparameterized: false,
    }
}

fn fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("min_norm_fit");
    g.sample_size(10);
    for (n, p) in [(50, 500), (100, 2000), (200, 4000)] {
        let inst = problem(p).build(n).unwrap().sample(1).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{p}")), &inst, |b, inst| {
            b.iter(|| min_norm_fit(black_box(&inst.x), black_box(&inst.y)).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_design_ar1");
    g.sample_size(10);
    for (n, p) in [(100, 2000), (400, 8000)] {
        let spec = problem(p);
        let s = spec.spectrum.build(n).unwrap();
        let xi = materialize_homo(&spec.design, n).unwrap();
        g.bench_function(BenchmarkId::from_parameter(format!("{n}x{p}")), |b| {
            b.iter(|| sample_design_homo(black_box(&s), &xi, &mut rng::stream(3, "design", 0)))
        });
    }
    g.finish();
}

fn k_star(c: &mut Criterion) {
    let s = SpatialSpectrum::new((1..=10_000).map(|i| (i as f64).powf(-1.05)).collect()).unwrap();
    c.bench_function("k_star_p10000", |b| b.iter(|| black_box(&s).k_star(2.0, 200)));
}

fn variance(c: &mut Criterion) {
    let pr = problem(2000).build(100).unwrap();
    let x = pr.sample_design(1).unwrap();
    let svd = DesignSvd::new(&x).unwrap();
    let ar = materialize_homo(&TemporalSpec::ar1(0.3), 100).unwrap();
    let mut g = c.benchmark_group("variance_trace_100x2000");
    g.sample_size(10);
    g.bench_function("white_noise", |b| b.iter(|| variance_trace(&svd, &pr.spectrum, &ToeplitzCov::identity(100)).unwrap()));
    g.bench_function("ar1_noise", |b| b.iter(|| variance_trace(&svd, &pr.spectrum, &ar).unwrap()));
    g.finish();
}

criterion_group!(benches, fit, sampling, k_star, variance);
criterion_main!(benches);
