use std::hint::black_box;

use coda_tables::nalgebra::DMatrix;
use coda_tables::{
    decompose, fit_pca, mcd_estimate, run_pipeline, table_pivot_system, AnalysisConfig, CompositionalTable, McdOptions,
    PcaOptions,
};
use coda_tables_bench::contaminated_sample;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn tables(c: &mut Criterion) {
    let t = CompositionalTable::new(DMatrix::from_fn(5, 8, |r, c| 1.0 + (r * 8 + c) as f64)).unwrap();
    c.bench_function("decompose 5x8", |b| b.iter(|| decompose(black_box(&t))));
    let mut g = c.benchmark_group("table_pivot_system");
    for (i, j) in [(2, 4), (5, 8)] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{i}x{j}")), &(i, j), |b, &(i, j)| {
            b.iter(|| table_pivot_system(i, j, 2, 2).unwrap())
        });
    }
    g.finish();
}

fn estimation(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimation");
    g.sample_size(10);
    for n in [100, 400] {
        let s = contaminated_sample(2, 4, n, 1);
        let sys = table_pivot_system(2, 4, 1, 1).unwrap();
        let z = s.coordinates(&sys).unwrap();
        g.bench_with_input(BenchmarkId::new("mcd", n), &z, |b, z| {
            b.iter(|| mcd_estimate(z, &McdOptions::new(0.75, 7)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("robust_pca", n), &s, |b, s| {
            b.iter(|| fit_pca(s, &sys, &PcaOptions::robust(0.75, 7)).unwrap())
        });
    }
    let s = contaminated_sample(3, 5, 200, 2);
    g.bench_function("pipeline 3x5 n=200", |b| {
        b.iter(|| run_pipeline(&AnalysisConfig::default(), &s).unwrap())
    });
    g.finish();
}

criterion_group!(benches, tables, estimation);
criterion_main!(benches);
