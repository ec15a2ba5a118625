use std::sync::Arc;

use coda_tables::{from_coords, pivot_system, to_coords, Composition};
use proptest::prelude::*;

fn parts(d: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    d.prop_flat_map(|d| prop::collection::vec(-5.0..5.0f64, d).prop_map(|l| l.into_iter().map(f64::exp).collect()))
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..=9usize).prop_flat_map(|d| {
        let side = prop::collection::vec(-5.0..5.0f64, d).prop_map(|l| l.into_iter().map(f64::exp).collect::<Vec<_>>());
        (side.clone(), side)
    })
}

/// Aitchison inner product from its pairwise log-ratio definition.
fn inner_oracle(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as f64;
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            s += (x[i] / x[j]).ln() * (y[i] / y[j]).ln();
        }
    }
    s / (2.0 * d)
}

proptest! {
    #[test]
    fn inner_product_matches_pairwise_definition((x, y) in pair()) {
        let a = Composition::new(x.clone()).unwrap();
        let b = Composition::new(y.clone()).unwrap();
        let oracle = inner_oracle(&x, &y);
        prop_assert!((a.inner(&b).unwrap() - oracle).abs() < 1e-9 * (1.0 + oracle.abs()));
    }

    #[test]
    fn scale_invariance((x, y) in pair(), k in 1e-3..1e3f64) {
        let a = Composition::new(x.clone()).unwrap();
        let b = Composition::new(y).unwrap();
        let scaled = Composition::new(x.iter().map(|v| v * k).collect()).unwrap();
        prop_assert!((a.distance(&b).unwrap() - scaled.distance(&b).unwrap()).abs() < 1e-9);
        let (ca, cs) = (a.clr(), scaled.clr());
        for (u, v) in ca.values().iter().zip(cs.values()) {
            prop_assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn permutation_invariance((x, y) in pair(), shift in 0usize..9) {
        let d = x.len();
        let rot = |v: &[f64]| (0..d).map(|i| v[(i + shift) % d]).collect::<Vec<_>>();
        let a = Composition::new(x.clone()).unwrap();
        let b = Composition::new(y.clone()).unwrap();
        let pa = Composition::new(rot(&x)).unwrap();
        let pb = Composition::new(rot(&y)).unwrap();
        prop_assert!((a.distance(&b).unwrap() - pa.distance(&pb).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn coordinates_are_an_isometry((x, y) in pair(), pivot in 1usize..10) {
        let d = x.len();
        let sys = Arc::new(pivot_system(d, 1 + (pivot - 1) % d).unwrap());
        let a = Composition::new(x).unwrap();
        let b = Composition::new(y).unwrap();
        let za = to_coords(&a, &sys).unwrap();
        let zb = to_coords(&b, &sys).unwrap();
        let euclid: f64 = za.values().iter().zip(zb.values()).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        prop_assert!((euclid - a.distance(&b).unwrap()).abs() < 1e-9);
        prop_assert!((za.norm() - a.norm()).abs() < 1e-9);
        let dot: f64 = za.values().iter().zip(zb.values()).map(|(u, v)| u * v).sum();
        prop_assert!((dot - a.inner(&b).unwrap()).abs() < 1e-8 * (1.0 + dot.abs()));
    }

    #[test]
    fn coordinates_round_trip(x in parts(2..=12), pivot in 1usize..13) {
        let d = x.len();
        let sys = Arc::new(pivot_system(d, 1 + (pivot - 1) % d).unwrap());
        let a = Composition::new(x).unwrap();
        let back = from_coords(&to_coords(&a, &sys).unwrap());
        prop_assert!(back.distance(&a).unwrap() < 1e-10);
    }

    #[test]
    fn operations_are_linear_in_coordinates((x, y) in pair(), alpha in -3.0..3.0f64) {
        let d = x.len();
        let sys = Arc::new(pivot_system(d, 1).unwrap());
        let a = Composition::new(x).unwrap();
        let b = Composition::new(y).unwrap();
        let za = to_coords(&a, &sys).unwrap();
        let zb = to_coords(&b, &sys).unwrap();
        let combo = to_coords(&a.perturb(&b.power(alpha).unwrap()).unwrap(), &sys).unwrap();
        for k in 0..d - 1 {
            prop_assert!((combo.values()[k] - (za.values()[k] + alpha * zb.values()[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn pivot_coordinate_is_proportional_to_clr(x in parts(2..=12), pivot in 1usize..13) {
        let d = x.len();
        let l = 1 + (pivot - 1) % d;
        let sys = Arc::new(pivot_system(d, l).unwrap());
        let a = Composition::new(x.clone()).unwrap();
        let z1 = to_coords(&a, &sys).unwrap().values()[0];
        let ratio = (d as f64 / (d as f64 - 1.0)).sqrt();
        prop_assert!((z1 - ratio * a.clr().values()[l - 1]).abs() < 1e-9);
        // direct log-ratio form: pivot part against the geometric mean of the rest
        let rest: f64 = x.iter().enumerate().filter(|(i, _)| *i != l - 1).map(|(_, v)| v.ln()).sum::<f64>() / (d - 1) as f64;
        let direct = ((d - 1) as f64 / d as f64).sqrt() * (x[l - 1].ln() - rest);
        prop_assert!((z1 - direct).abs() < 1e-9);
    }

    #[test]
    fn closure_keeps_ratios(x in parts(2..=9), kappa in 1e-2..1e4f64) {
        let a = Composition::new(x.clone()).unwrap();
        let c = a.close(kappa).unwrap();
        prop_assert!((c.parts().iter().sum::<f64>() - kappa).abs() < 1e-9 * kappa);
        prop_assert!(c.distance(&a).unwrap() < 1e-10);
    }
}
