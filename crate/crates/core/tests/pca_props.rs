use coda_tables::nalgebra::{DMatrix, DVector};
use coda_tables::{
    biplot_geometry, compare_runs, fit_pca, generate, table_pivot_system, BiplotForm, CompositionalTable,
    GeneratorSpec, Part, PcaOptions, TableSample,
};

fn base() -> CompositionalTable {
    CompositionalTable::from_rows(&[vec![5.0, 2.0, 1.0, 3.0], vec![2.0, 4.0, 3.0, 1.0], vec![1.0, 1.0, 6.0, 2.0]])
        .unwrap()
}

/// 3×4 tables with a distinctly ordered spectrum.
fn sample(n: usize, seed: u64) -> TableSample {
    let p = 11;
    let sds = DVector::from_fn(p, |k, _| 2.0 / (1.0 + k as f64));
    let rot = DMatrix::from_fn(p, p, |r, c| ((r * 7 + c * 3) as f64).sin()).qr().q();
    let cov = &rot * DMatrix::from_diagonal(&sds.map(|s| s * s)) * rot.transpose();
    let spec = GeneratorSpec {
        base_table: base(),
        coordinate_covariance: (&cov + cov.transpose()) * 0.5,
        n,
        contamination: 0.0,
        contamination_shift: DVector::zeros(p),
        seed,
    };
    generate(&spec).unwrap().sample
}

fn centered_clr(s: &TableSample) -> DMatrix<f64> {
    let (i, j) = s.shape();
    let mut m = DMatrix::zeros(s.len(), i * j);
    for (r, t) in s.tables.iter().enumerate() {
        m.row_mut(r).copy_from_slice(t.clr().vectorize().values());
    }
    let c = m.row_mean();
    for mut row in m.row_iter_mut() {
        row -= &c;
    }
    m
}

#[test]
fn results_do_not_depend_on_the_pivot() {
    let s = sample(80, 1);
    for part in Part::ALL {
        let s = s.with_part(part);
        let a = fit_pca(&s, &table_pivot_system(3, 4, 1, 1).unwrap(), &PcaOptions::classical()).unwrap();
        let b = fit_pca(&s, &table_pivot_system(3, 4, 2, 3).unwrap(), &PcaOptions::classical()).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()), "{part}");
        }
        assert!((&a.loadings_clr - &b.loadings_clr).abs().max() < 1e-8, "{part}");
        assert!((&a.scores - &b.scores).abs().max() < 1e-8, "{part}");
    }
}

#[test]
fn clr_loadings_are_the_back_transformed_coordinate_loadings() {
    let s = sample(60, 2);
    let sys = table_pivot_system(3, 4, 1, 1).unwrap();
    for part in Part::ALL {
        let m = fit_pca(&s.with_part(part), &sys, &PcaOptions::classical()).unwrap();
        let v = part.system(&sys).contrast();
        assert!((v * &m.loadings_coords - &m.loadings_clr).abs().max() < 1e-12);
        let gram = m.loadings_clr.transpose() * &m.loadings_clr;
        assert!((gram - DMatrix::identity(m.dim(), m.dim())).abs().max() < 1e-10);
        for col in m.loadings_clr.column_iter() {
            assert!(col.sum().abs() < 1e-10);
            let top = col.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(top > 0.0);
        }
    }
}

#[test]
fn whole_refines_the_parts() {
    let s = sample(100, 3);
    let sys = table_pivot_system(3, 4, 1, 1).unwrap();
    let fit = |part| fit_pca(&s.with_part(part), &sys, &PcaOptions::classical()).unwrap();
    let (whole, ind, int) = (fit(Part::Whole), fit(Part::Independence), fit(Part::Interaction));
    let total = |m: &coda_tables::PcaModel| m.eigenvalues.iter().sum::<f64>();
    assert!((total(&whole) - total(&ind) - total(&int)).abs() < 1e-10 * total(&whole));
    // interlacing: the parts are compressions of the whole covariance
    for part in [&ind, &int] {
        for (k, l) in part.eigenvalues.iter().enumerate() {
            assert!(whole.eigenvalues[k] >= l - 1e-12);
        }
    }
}

#[test]
fn robust_scores_center_on_the_support() {
    let s = sample(120, 4);
    let sys = table_pivot_system(3, 4, 1, 1).unwrap();
    let m = fit_pca(&s.with_part(Part::Interaction), &sys, &PcaOptions::robust(0.75, 5)).unwrap();
    let support = m.estimate.support.clone().unwrap();
    let kept: Vec<usize> = (0..support.len()).filter(|&r| support[r]).collect();
    for c in 0..m.dim() {
        let mean = kept.iter().map(|&r| m.scores[(r, c)]).sum::<f64>() / kept.len() as f64;
        assert!(mean.abs() < 1e-10);
    }
    let projected = (&m.coordinates - DMatrix::from_fn(m.coordinates.nrows(), m.dim(), |_, c| m.center_coords[c]))
        * &m.loadings_coords;
    assert!((projected - &m.scores).abs().max() < 1e-10);
}

#[test]
fn classical_fit_matches_the_svd_of_the_centered_clr_matrix() {
    let s = sample(50, 6);
    let n = s.len() as f64;
    let sys = table_pivot_system(3, 4, 1, 1).unwrap();
    let m = fit_pca(&s, &sys, &PcaOptions::classical()).unwrap();
    let x = centered_clr(&s);
    let svd = x.clone().svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().map(|v| v * v / (n - 1.0)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    for (k, l) in m.eigenvalues.iter().enumerate() {
        assert!((l - sv[k]).abs() < 1e-9 * (1.0 + l));
    }
    // rank-2 reconstruction error equals the discarded variance
    let k = 2;
    let approx = m.scores.columns(0, k) * m.loadings_clr.columns(0, k).transpose();
    let err = (&x - approx).norm_squared();
    let discarded: f64 = m.eigenvalues[k..].iter().sum::<f64>() * (n - 1.0);
    assert!((err - discarded).abs() < 1e-8 * (1.0 + discarded));
}

#[test]
fn classical_and_robust_agree_on_clean_data() {
    let s = sample(400, 7);
    let sys = table_pivot_system(3, 4, 1, 1).unwrap();
    let c = fit_pca(&s, &sys, &PcaOptions::classical()).unwrap();
    let r = fit_pca(&s, &sys, &PcaOptions::robust(0.75, 8)).unwrap();
    let cmp = compare_runs(&c, &r).unwrap();
    assert!(cmp.first_loading_angle < 5.0, "{}", cmp.first_loading_angle);
    let own = compare_runs(&c, &c).unwrap();
    assert!(own.principal_angles.iter().all(|a| *a < 1e-6));
    assert!(own.score_displacement.iter().all(|d| *d < 1e-12));
}

#[test]
fn biplots_reconstruct_the_data() {
    let s = sample(40, 9);
    let sys = table_pivot_system(3, 4, 1, 1).unwrap();
    let m = fit_pca(&s, &sys, &PcaOptions::classical()).unwrap();
    let p = m.dim();
    let to_matrix = |v: &[coda_tables::pca::BiplotVector]| {
        DMatrix::from_fn(v.len(), p, |r, c| v[r].coords[c])
    };
    let form = biplot_geometry(&m, p, BiplotForm::Form).unwrap();
    let x = centered_clr(&s);
    let recon = to_matrix(&form.points) * to_matrix(&form.arrows).transpose();
    assert!((recon - &x).abs().max() < 1e-9);

    let cov = biplot_geometry(&m, p, BiplotForm::Covariance).unwrap();
    let arrows = to_matrix(&cov.arrows);
    let clr_cov = x.transpose() * &x / (s.len() as f64 - 1.0);
    assert!((arrows.clone() * arrows.transpose() - clr_cov).abs().max() < 1e-9);
    let recon = to_matrix(&cov.points) * to_matrix(&cov.arrows).transpose();
    assert!((recon - &x).abs().max() < 1e-9);
}

#[test]
fn rank_one_data_lies_on_a_line() {
    let b = base();
    let dir = CompositionalTable::from_rows(&[vec![2.0, 1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0, 0.5]])
        .unwrap();
    let tables = (0..10)
        .map(|k| b.perturb(&dir.power(k as f64 - 4.5).unwrap()).unwrap())
        .collect();
    let s = TableSample::new(tables, Part::Whole).unwrap();
    let sys = table_pivot_system(3, 4, 1, 1).unwrap();
    let m = fit_pca(&s, &sys, &PcaOptions::classical()).unwrap();
    assert!(m.explained_at(1) > 1.0 - 1e-12);
    let bp = biplot_geometry(&m, 2, BiplotForm::Form).unwrap();
    assert!(bp.points.iter().all(|pt| pt.coords[1].abs() < 1e-9));
    assert!(biplot_geometry(&m, 2, BiplotForm::Covariance).is_err());
}

#[test]
fn comparisons_require_matching_parts() {
    let s = sample(30, 10);
    let sys = table_pivot_system(3, 4, 1, 1).unwrap();
    let a = fit_pca(&s, &sys, &PcaOptions::classical()).unwrap();
    let b = fit_pca(&s.with_part(Part::Interaction), &sys, &PcaOptions::classical()).unwrap();
    assert!(compare_runs(&a, &b).is_err());
}
