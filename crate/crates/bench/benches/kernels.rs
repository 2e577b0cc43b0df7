use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use poisson_approx::families::{generate, FamilyKind};
use poisson_approx::model::build_laws;
use poisson_approx::{ConvolutionMethod, LawOptions};
use poisson_approx_bench::smooth_law;

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolve");
    for len in [64usize, 512, 4096] {
        let (f, g) = (smooth_law(len), smooth_law(len / 2 + 1));
        for (name, method) in [
            ("direct", ConvolutionMethod::Direct),
            ("spectral", ConvolutionMethod::Spectral),
        ] {
            group.bench_with_input(BenchmarkId::new(name, len), &len, |b, _| {
                b.iter(|| black_box(&f).convolve_with(black_box(&g), method).unwrap())
            });
        }
    }
    group.finish();
}

fn compound(c: &mut Criterion) {
    let mut group = c.benchmark_group("compound_poisson");
    for alpha in [0.1, 1.0, 10.0] {
        let h = smooth_law(32);
        group.bench_with_input(BenchmarkId::from_parameter(alpha), &alpha, |b, &a| {
            b.iter(|| h.compound_poisson(a, 1e-12).unwrap())
        });
    }
    group.finish();
}

fn laws(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_laws");
    group.sample_size(20);
    for (name, kind) in [("degenerate", FamilyKind::Degenerate), ("general", FamilyKind::General)] {
        let model = generate(kind, 1, 3);
        group.bench_function(name, |b| {
            b.iter(|| build_laws(black_box(&model), &LawOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, convolution, compound, laws);
criterion_main!(benches);
