//! Synthetic samples of compositional tables.
//!
//! Coordinates are drawn from a Gaussian in the pivot coordinates of the
//! `(1, 1)` system around the coordinates of a base table; a contaminated
//! fraction is shifted by a fixed offset. Every generated table is mapped back
//! through the inverse clr, so cells stay positive.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::pca::{Part, TableSample};
use crate::table::{table_pivot_system, CompositionalTable, TableCoordinateSystem};

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub base_table: CompositionalTable,
    /// `p×p` covariance in pivot coordinates, `p = I·J − 1`.
    pub coordinate_covariance: DMatrix<f64>,
    pub n: usize,
    /// Contaminated fraction, in `[0, 0.4]`.
    pub contamination: f64,
    pub contamination_shift: DVector<f64>,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Isotropic spec with standard deviation `sd` in every coordinate.
    pub fn isotropic(base_table: CompositionalTable, n: usize, sd: f64, seed: u64) -> Self {
        let (i, j) = base_table.shape();
        let p = i * j - 1;
        GeneratorSpec {
            base_table,
            coordinate_covariance: DMatrix::identity(p, p) * (sd * sd),
            n,
            contamination: 0.0,
            contamination_shift: DVector::zeros(p),
            seed,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.base_table.shape()
    }

    pub fn outlier_count(&self) -> usize {
        (self.contamination * self.n as f64).floor() as usize
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub sample: TableSample,
    /// `true` for the shifted tables.
    pub outliers: Vec<bool>,
    pub coordinates: DMatrix<f64>,
    pub center: DVector<f64>,
    pub system: TableCoordinateSystem,
}

/// A factor `L` with `L·Lᵀ = cov`; fails when `cov` is not PSD.
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if (cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
        return Err(Error::InvalidSpec("covariance is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let scale = eig.eigenvalues.abs().max().max(1.0);
    if let Some(bad) = eig.eigenvalues.iter().find(|l| **l < -1e-10 * scale) {
        return Err(Error::InvalidSpec(format!(
            "covariance is not positive semidefinite (eigenvalue {bad:e})"
        )));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

pub fn generate(spec: &GeneratorSpec) -> Result<GeneratedSample> {
    let (i, j) = spec.shape();
    let p = i * j - 1;
    if spec.coordinate_covariance.shape() != (p, p) {
        return Err(Error::InvalidSpec(format!(
            "covariance must be {p}×{p} for {i}×{j} tables"
        )));
    }
    if spec.contamination_shift.len() != p {
        return Err(Error::InvalidSpec(format!("shift must have length {p}")));
    }
    if !(0.0..=0.4).contains(&spec.contamination) {
        return Err(Error::InvalidSpec(format!(
            "contamination must lie in [0, 0.4], got {}",
            spec.contamination
        )));
    }
    if spec.n == 0 {
        return Err(Error::InvalidSpec("sample size must be positive".into()));
    }
    let factor = psd_factor(&spec.coordinate_covariance)?;
    let system = table_pivot_system(i, j, 1, 1)?;
    let full = system.full();
    let center = DVector::from_vec(full.coords_of_clr(&spec.base_table.clr().vectorize())?);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut outliers = vec![false; spec.n];
    for k in sample(&mut rng, spec.n, spec.outlier_count()) {
        outliers[k] = true;
    }

    let mut coordinates = DMatrix::zeros(spec.n, p);
    let mut tables = Vec::with_capacity(spec.n);
    for (r, &is_out) in outliers.iter().enumerate() {
        let noise = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let mut z = &center + &factor * noise;
        if is_out {
            z += &spec.contamination_shift;
        }
        coordinates.row_mut(r).copy_from_slice(z.as_slice());
        let cells = full.clr_of_coords(z.as_slice())?.to_composition();
        let table = CompositionalTable::from_vectorized(&cells, &spec.base_table)?
            .with_sample_id(format!("S{:04}", r + 1));
        tables.push(table);
    }
    Ok(GeneratedSample {
        sample: TableSample::new(tables, Part::Whole)?,
        outliers,
        coordinates,
        center,
        system,
    })
}
