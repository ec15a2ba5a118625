//! Workloads shared by the benchmarks.

use coda_tables::{generate, CompositionalTable, GeneratorSpec, TableSample};

/// `n` random `i×j` tables with 10% shifted samples.
pub fn contaminated_sample(i: usize, j: usize, n: usize, seed: u64) -> TableSample {
    let base = CompositionalTable::new(coda_tables::nalgebra::DMatrix::from_fn(i, j, |r, c| {
        1.0 + ((r * 5 + c * 3) % 7) as f64
    }))
    .expect("positive cells");
    let mut spec = GeneratorSpec::isotropic(base, n, 0.5, seed);
    spec.contamination = 0.1;
    spec.contamination_shift[0] = 8.0;
    generate(&spec).expect("valid spec").sample
}
