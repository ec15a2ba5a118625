use coda_tables::nalgebra::{DMatrix, DVector};
use coda_tables::{
    coords_interaction, decompose, detect_outliers, generate, CompositionalTable, Error, GeneratorSpec, McdOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn base() -> CompositionalTable {
    CompositionalTable::from_rows(&[vec![4.0, 2.0, 1.0, 3.0], vec![1.0, 6.0, 2.0, 2.0]]).unwrap()
}

fn contaminated(seed: u64) -> GeneratorSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = DVector::from_fn(7, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut spec = GeneratorSpec::isotropic(base(), 200, 1.0, seed);
    spec.contamination = 0.2;
    spec.contamination_shift = dir.normalize() * 10.0;
    spec
}

#[test]
fn planted_outliers_are_recovered() {
    for seed in [1, 2, 3] {
        let spec = contaminated(seed);
        let g = generate(&spec).unwrap();
        assert_eq!(g.outliers.iter().filter(|o| **o).count(), 40);
        let z = g.sample.coordinates(&g.system).unwrap();
        let report = detect_outliers(&z, &McdOptions::new(0.75, seed), 0.975).unwrap();
        let hits = report.flags.iter().zip(&g.outliers).filter(|(f, o)| **f && **o).count();
        let false_pos = report.flags.iter().zip(&g.outliers).filter(|(f, o)| **f && !**o).count();
        assert!(hits as f64 >= 0.95 * 40.0, "seed {seed}: {hits}/40");
        assert!(false_pos as f64 <= 0.05 * 160.0, "seed {seed}: {false_pos} false positives");
    }
}

#[test]
fn ground_truth_is_consistent() {
    let spec = contaminated(4);
    let g = generate(&spec).unwrap();
    let shift = spec.contamination_shift.norm();
    for (r, &o) in g.outliers.iter().enumerate() {
        if o {
            let d = (g.coordinates.row(r).transpose() - &g.center).norm();
            assert!(d >= shift - 3.0 * 7f64.sqrt(), "row {r}: {d}");
        }
    }
    // sampled tables carry exactly the recorded coordinates
    let z = g.sample.coordinates(&g.system).unwrap();
    assert!((z - &g.coordinates).abs().max() < 1e-9);
}

#[test]
fn covariance_on_the_independence_block_leaves_interaction_neutral() {
    let independent = decompose(&base()).independence;
    let mut cov = DMatrix::zeros(7, 7);
    for k in 0..4 {
        cov[(k, k)] = 1.0 + k as f64;
    }
    cov[(0, 2)] = 0.5;
    cov[(2, 0)] = 0.5;
    let spec = GeneratorSpec {
        base_table: independent,
        coordinate_covariance: cov,
        n: 50,
        contamination: 0.0,
        contamination_shift: DVector::zeros(7),
        seed: 5,
    };
    let g = generate(&spec).unwrap();
    for t in &g.sample.tables {
        let z = coords_interaction(t, &g.system).unwrap();
        assert!(z.values().iter().all(|v| v.abs() < 1e-10));
        assert!(decompose(t).interaction.is_neutral());
    }
}

#[test]
fn same_seed_same_sample() {
    let a = generate(&contaminated(6)).unwrap();
    let b = generate(&contaminated(6)).unwrap();
    assert_eq!(a.outliers, b.outliers);
    assert_eq!(a.coordinates, b.coordinates);
    let mut other = contaminated(6);
    other.seed = 7;
    assert_ne!(generate(&other).unwrap().coordinates, a.coordinates);
}

#[test]
fn rejects_invalid_specs() {
    let mut spec = GeneratorSpec::isotropic(base(), 10, 1.0, 0);
    spec.coordinate_covariance = DMatrix::from_fn(7, 7, |r, c| if r == c { 1.0 } else { 0.9 }) * -1.0;
    assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));
    let mut spec = GeneratorSpec::isotropic(base(), 10, 1.0, 0);
    spec.contamination_shift = DVector::zeros(3);
    assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));
}
