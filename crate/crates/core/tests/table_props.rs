use coda_tables::nalgebra::DMatrix;
use coda_tables::{
    clr_independence, clr_interaction, decompose, table_coords, table_pivot_system, CompositionalTable,
};
use proptest::prelude::*;

fn table() -> impl Strategy<Value = CompositionalTable> {
    (2..=5usize, 2..=6usize).prop_flat_map(|(i, j)| {
        prop::collection::vec(-4.0..4.0f64, i * j)
            .prop_map(move |l| CompositionalTable::new(DMatrix::from_vec(i, j, l).map(f64::exp)).unwrap())
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean log over the cells `(r, c)` with `r` in `rows` and `c` in `cols`.
fn block_log_mean(logs: &DMatrix<f64>, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
    let mut v = Vec::new();
    for r in rows {
        for c in cols.clone() {
            v.push(logs[(r, c)]);
        }
    }
    mean(&v)
}

/// Pivot coordinates of the `(1, 1)` system from geometric means of blocks.
fn closed_form_coords(t: &CompositionalTable) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (i, j) = t.shape();
    let logs = t.cells().map(f64::ln);
    let (fi, fj) = (i as f64, j as f64);
    let rows = (0..i - 1)
        .map(|r| {
            let rest = (i - r - 1) as f64;
            (rest * fj / (rest + 1.0)).sqrt() * (block_log_mean(&logs, r..r + 1, 0..j) - block_log_mean(&logs, r + 1..i, 0..j))
        })
        .collect();
    let cols = (0..j - 1)
        .map(|c| {
            let rest = (j - c - 1) as f64;
            (rest * fi / (rest + 1.0)).sqrt() * (block_log_mean(&logs, 0..i, c..c + 1) - block_log_mean(&logs, 0..i, c + 1..j))
        })
        .collect();
    let mut ors = Vec::new();
    for r in 0..i - 1 {
        for s in 0..j - 1 {
            let a = (i - r - 1) as f64;
            let b = (j - s - 1) as f64;
            let ratio = logs[(r, s)] + block_log_mean(&logs, r + 1..i, s + 1..j)
                - block_log_mean(&logs, r + 1..i, s..s + 1)
                - block_log_mean(&logs, r..r + 1, s + 1..j);
            ors.push((a * b / ((a + 1.0) * (b + 1.0))).sqrt() * ratio);
        }
    }
    (rows, cols, ors)
}

fn close_all(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
}

proptest! {
    #[test]
    fn coordinates_match_block_log_ratios(t in table()) {
        let (i, j) = t.shape();
        let sys = table_pivot_system(i, j, 1, 1).unwrap();
        let z = table_coords(&t, &sys).unwrap();
        let (rows, cols, ors) = closed_form_coords(&t);
        prop_assert!(close_all(&z.rows, &rows, 1e-9));
        prop_assert!(close_all(&z.cols, &cols, 1e-9));
        prop_assert!(close_all(&z.odds_ratios, &ors, 1e-9));
    }

    #[test]
    fn other_pivots_permute_the_table(t in table(), k in 1usize..6, l in 1usize..7) {
        let (i, j) = t.shape();
        let (k, l) = (1 + (k - 1) % i, 1 + (l - 1) % j);
        let row_perm: Vec<usize> = std::iter::once(k - 1).chain((0..i).filter(|&r| r != k - 1)).collect();
        let col_perm: Vec<usize> = std::iter::once(l - 1).chain((0..j).filter(|&c| c != l - 1)).collect();
        let moved = t.permute_rows(&row_perm).unwrap().permute_cols(&col_perm).unwrap();
        let a = table_coords(&t, &table_pivot_system(i, j, k, l).unwrap()).unwrap();
        let b = table_coords(&moved, &table_pivot_system(i, j, 1, 1).unwrap()).unwrap();
        prop_assert!(close_all(&a.concat(), &b.concat(), 1e-9));
    }

    #[test]
    fn parts_are_orthogonal_and_recompose(t in table()) {
        let d = decompose(&t);
        prop_assert!(d.independence.inner(&d.interaction).unwrap().abs() < 1e-9);
        prop_assert!(d.independence.perturb(&d.interaction).unwrap().distance(&t).unwrap() < 1e-10);
        let pythagoras = d.independence.norm().powi(2) + d.interaction.norm().powi(2) - t.norm().powi(2);
        prop_assert!(pythagoras.abs() < 1e-8 * (1.0 + t.norm().powi(2)));
        prop_assert!(d.row_projection.inner(&d.col_projection).unwrap().abs() < 1e-9);
    }

    #[test]
    fn decomposition_is_idempotent(t in table()) {
        let d = decompose(&t);
        let ind = decompose(&d.independence);
        prop_assert!(ind.independence.distance(&d.independence).unwrap() < 1e-10);
        prop_assert!(ind.interaction.is_neutral());
        let int = decompose(&d.interaction);
        prop_assert!(int.interaction.distance(&d.interaction).unwrap() < 1e-10);
        prop_assert!(int.independence.is_neutral());
    }

    #[test]
    fn decomposition_commutes_with_permutation(t in table(), seed in 0usize..100) {
        let (i, j) = t.shape();
        let row_perm: Vec<usize> = (0..i).map(|r| (r + seed) % i).collect();
        let col_perm: Vec<usize> = (0..j).rev().collect();
        let moved = t.permute_rows(&row_perm).unwrap().permute_cols(&col_perm).unwrap();
        let d = decompose(&t);
        let dm = decompose(&moved);
        let expect_ind = d.independence.permute_rows(&row_perm).unwrap().permute_cols(&col_perm).unwrap();
        let expect_int = d.interaction.permute_rows(&row_perm).unwrap().permute_cols(&col_perm).unwrap();
        prop_assert!(dm.independence.distance(&expect_ind).unwrap() < 1e-10);
        prop_assert!(dm.interaction.distance(&expect_int).unwrap() < 1e-10);
    }

    #[test]
    fn decomposition_is_scale_invariant(t in table(), k in 1e-3..1e3f64) {
        let scaled = CompositionalTable::new(t.cells() * k).unwrap();
        let (a, b) = (clr_interaction(&t), clr_interaction(&scaled));
        prop_assert!((a.values() - b.values()).abs().max() < 1e-10);
        let (a, b) = (clr_independence(&t), clr_independence(&scaled));
        prop_assert!((a.values() - b.values()).abs().max() < 1e-10);
    }

    #[test]
    fn interaction_clr_has_zero_margins(t in table()) {
        let c = clr_interaction(&t);
        let v = c.values();
        for r in 0..v.nrows() {
            prop_assert!(v.row(r).sum().abs() < 1e-10);
        }
        for col in 0..v.ncols() {
            prop_assert!(v.column(col).sum().abs() < 1e-10);
        }
    }

    #[test]
    fn independence_is_the_outer_product_of_margins(t in table()) {
        // ratios between any two rows of x_ind are constant across columns
        let ind = decompose(&t).independence;
        let (i, j) = ind.shape();
        for r in 1..i {
            let first = ind.get(r, 0) / ind.get(0, 0);
            for c in 1..j {
                prop_assert!((ind.get(r, c) / ind.get(0, c) / first - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn independent_table_has_neutral_interaction() {
    let rows = [1.0, 2.5, 0.3];
    let cols = [4.0, 1.0, 2.0, 7.0];
    let cells = DMatrix::from_fn(3, 4, |r, c| rows[r] * cols[c]);
    let t = CompositionalTable::new(cells).unwrap();
    let d = decompose(&t);
    assert!(d.interaction.is_neutral());
    assert!(d.independence.distance(&t).unwrap() < 1e-12);
    let z = table_coords(&t, &table_pivot_system(3, 4, 2, 3).unwrap()).unwrap();
    assert!(z.odds_ratios.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn rejects_degenerate_input() {
    assert!(CompositionalTable::new(DMatrix::from_element(1, 4, 1.0)).is_err());
    assert!(CompositionalTable::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 3.0])).is_err());
    assert!(CompositionalTable::new(DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 2.0, 3.0])).is_err());
    assert!(table_pivot_system(2, 4, 3, 1).is_err());
}
