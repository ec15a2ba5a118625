//! Classical and robust PCA of samples of compositional tables.
//!
//! Tables are mapped to pivot coordinates (whole table, independence block or
//! interaction block), location and scatter are estimated there, and the
//! eigenvectors are carried back to clr space through the contrast matrix of
//! the analysed block, `G_clr = V·G`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robust::{mcd_estimate, sample_moments, McdOptions, ScatterEstimate};
use crate::simplex::CoordinateSystem;
use crate::table::{CompositionalTable, TableCoordinateSystem};

/// Eigenvalues this close to zero are reported as exactly zero.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Which representation of each table is analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Whole,
    Independence,
    Interaction,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Whole, Part::Independence, Part::Interaction];

    pub fn as_str(self) -> &'static str {
        match self {
            Part::Whole => "whole",
            Part::Independence => "independence",
            Part::Interaction => "interaction",
        }
    }

    /// Coordinate dimension of this part for `I×J` tables.
    pub fn dim(self, i: usize, j: usize) -> usize {
        match self {
            Part::Whole => i * j - 1,
            Part::Independence => i + j - 2,
            Part::Interaction => (i - 1) * (j - 1),
        }
    }

    pub fn system(self, sys: &TableCoordinateSystem) -> &Arc<CoordinateSystem> {
        match self {
            Part::Whole => sys.full(),
            Part::Independence => sys.independence(),
            Part::Interaction => sys.interaction(),
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Part {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(Part::Whole),
            "ind" | "independence" => Ok(Part::Independence),
            "int" | "interaction" => Ok(Part::Interaction),
            other => Err(Error::Config(format!("unknown part '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMethod {
    Classical,
    Robust,
}

impl PcaMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PcaMethod::Classical => "classical",
            PcaMethod::Robust => "robust",
        }
    }
}

impl fmt::Display for PcaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PcaMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(PcaMethod::Classical),
            "robust" => Ok(PcaMethod::Robust),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// A sample of tables sharing shape and factor labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSample {
    pub tables: Vec<CompositionalTable>,
    pub part: Part,
}

impl TableSample {
    pub fn new(tables: Vec<CompositionalTable>, part: Part) -> Result<Self> {
        let Some(first) = tables.first() else {
            return Err(Error::InvalidData("empty sample".into()));
        };
        for t in &tables[1..] {
            if t.shape() != first.shape() {
                let (i, j) = first.shape();
                let (k, l) = t.shape();
                return Err(Error::dim(i * j, k * l));
            }
            if t.row_labels() != first.row_labels() || t.col_labels() != first.col_labels() {
                return Err(Error::HeterogeneousLevels(format!(
                    "sample '{}' has different factor levels",
                    t.sample_id().unwrap_or("?")
                )));
            }
        }
        Ok(TableSample { tables, part })
    }

    pub fn with_part(&self, part: Part) -> TableSample {
        TableSample {
            tables: self.tables.clone(),
            part,
        }
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tables[0].shape()
    }

    pub fn row_levels(&self) -> &[String] {
        self.tables[0].row_labels()
    }

    pub fn col_levels(&self) -> &[String] {
        self.tables[0].col_labels()
    }

    pub fn cell_labels(&self) -> Vec<String> {
        self.tables[0].cell_labels()
    }

    /// Sample ids, falling back to 1-based positions.
    pub fn sample_ids(&self) -> Vec<String> {
        self.tables
            .iter()
            .enumerate()
            .map(|(i, t)| t.sample_id().map_or_else(|| (i + 1).to_string(), str::to_owned))
            .collect()
    }

    /// `n×p` matrix of the coordinates of this sample's part.
    pub fn coordinates(&self, sys: &TableCoordinateSystem) -> Result<DMatrix<f64>> {
        let (i, j) = self.shape();
        if sys.shape() != (i, j) {
            let (k, l) = sys.shape();
            return Err(Error::dim(k * l, i * j));
        }
        let v = self.part.system(sys);
        let mut z = DMatrix::zeros(self.len(), v.dim_out());
        for (r, t) in self.tables.iter().enumerate() {
            let coords = v.coords_of_clr(&t.clr().vectorize())?;
            z.row_mut(r).copy_from_slice(&coords);
        }
        Ok(z)
    }
}

#[derive(Debug, Clone)]
pub struct PcaOptions {
    pub method: PcaMethod,
    /// MCD settings; only `seed` matters for the classical method.
    pub mcd: McdOptions,
}

impl PcaOptions {
    pub fn classical() -> Self {
        PcaOptions {
            method: PcaMethod::Classical,
            mcd: McdOptions::default(),
        }
    }

    pub fn robust(alpha: f64, seed: u64) -> Self {
        PcaOptions {
            method: PcaMethod::Robust,
            mcd: McdOptions::new(alpha, seed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcaModel {
    pub method: PcaMethod,
    pub part: Part,
    pub shape: (usize, usize),
    pub center_coords: DVector<f64>,
    /// Orthogonal `p×p` eigenvector matrix `G`.
    pub loadings_coords: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// `n×p` scores `Gᵀ(z_i − t)`, one row per table.
    pub scores: DMatrix<f64>,
    /// `(I·J)×p` loadings in clr space, rows in vectorization order.
    pub loadings_clr: DMatrix<f64>,
    /// Cumulative explained proportions.
    pub explained: Vec<f64>,
    pub system: Arc<CoordinateSystem>,
    pub coordinates: DMatrix<f64>,
    pub estimate: ScatterEstimate,
    pub sample_ids: Vec<String>,
    pub cell_labels: Vec<String>,
    pub seed: u64,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Proportion of the total variance on each axis.
    pub fn proportions(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|l| l / total).collect()
    }

    /// Cumulative explained proportion of the first `k` components.
    pub fn explained_at(&self, k: usize) -> f64 {
        self.explained[k.min(self.dim()) - 1]
    }
}

pub fn fit_pca(sample: &TableSample, sys: &TableCoordinateSystem, opts: &PcaOptions) -> Result<PcaModel> {
    if sample.len() < 3 {
        return Err(Error::InvalidData(format!(
            "PCA needs at least 3 tables, got {}",
            sample.len()
        )));
    }
    let z = sample.coordinates(sys)?;
    let estimate = match opts.method {
        PcaMethod::Classical => {
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("coordinates contain non-finite values".into()));
            }
            sample_moments(&z)
        }
        PcaMethod::Robust => mcd_estimate(&z, &opts.mcd)?,
    };
    let system = Arc::clone(sample.part.system(sys));
    let mut model = pca_from_estimate(z, estimate, system, opts.mcd.seed)?;
    model.method = opts.method;
    model.part = sample.part;
    model.shape = sample.shape();
    model.sample_ids = sample.sample_ids();
    model.cell_labels = sample.cell_labels();
    Ok(model)
}

fn pca_from_estimate(
    z: DMatrix<f64>,
    estimate: ScatterEstimate,
    system: Arc<CoordinateSystem>,
    seed: u64,
) -> Result<PcaModel> {
    let p = estimate.dim();
    let eig = SymmetricEigen::new(estimate.scatter.clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&k| {
            let l = eig.eigenvalues[k];
            if l.abs() <= EIGEN_CLAMP || l < 0.0 {
                0.0
            } else {
                l
            }
        })
        .collect();
    let total: f64 = eigenvalues.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateData("sample has zero variance".into()));
    }
    let mut g = eig.eigenvectors.select_columns(&order);
    let mut loadings_clr = system.contrast() * &g;
    for k in 0..p {
        if orientation(loadings_clr.column(k).as_slice()) < 0.0 {
            g.column_mut(k).neg_mut();
            loadings_clr.column_mut(k).neg_mut();
        }
    }

    let mut centered = z.clone();
    for mut row in centered.row_iter_mut() {
        row -= estimate.center.transpose();
    }
    let scores = centered * &g;
    let explained = eigenvalues
        .iter()
        .scan(0.0, |acc, l| {
            *acc += l;
            Some(*acc / total)
        })
        .collect();

    Ok(PcaModel {
        method: PcaMethod::Classical,
        part: Part::Whole,
        shape: (0, 0),
        center_coords: estimate.center.clone(),
        loadings_coords: g,
        eigenvalues,
        scores,
        loadings_clr,
        explained,
        system,
        coordinates: z,
        estimate,
        sample_ids: Vec::new(),
        cell_labels: Vec::new(),
        seed,
    })
}

/// Sign of the largest-magnitude entry; the lowest index wins near-ties.
fn orientation(column: &[f64]) -> f64 {
    let max = column.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = max * 1e-9;
    column
        .iter()
        .find(|v| v.abs() >= max - tol)
        .map_or(1.0, |v| v.signum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiplotForm {
    /// Arrows scaled by `√λ`, points by `1/√λ`.
    Covariance,
    /// Arrows are the unit loadings, points the raw scores.
    Form,
}

impl FromStr for BiplotForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "covariance" => Ok(BiplotForm::Covariance),
            "form" => Ok(BiplotForm::Form),
            other => Err(Error::Config(format!("unknown biplot form '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiplotVector {
    pub label: String,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Biplot {
    pub form: BiplotForm,
    /// One arrow per clr variable (table cell).
    pub arrows: Vec<BiplotVector>,
    /// One point per table.
    pub points: Vec<BiplotVector>,
    /// Per-axis explained proportions.
    pub explained: Vec<f64>,
    pub sign_convention: &'static str,
}

pub const SIGN_CONVENTION: &str =
    "largest-magnitude clr loading positive; ties go to the lowest cell index";

pub fn biplot_geometry(model: &PcaModel, k: usize, form: BiplotForm) -> Result<Biplot> {
    if k == 0 || k > model.dim() {
        return Err(Error::dim(model.dim(), k));
    }
    let props = model.proportions();
    let (arrow_scale, point_scale): (Vec<f64>, Vec<f64>) = match form {
        BiplotForm::Covariance => {
            if let Some(axis) = (0..k).find(|&a| model.eigenvalues[a] == 0.0) {
                return Err(Error::DegenerateAxis { axis: axis + 1 });
            }
            model.eigenvalues[..k]
                .iter()
                .map(|l| (l.sqrt(), 1.0 / l.sqrt()))
                .unzip()
        }
        BiplotForm::Form => (vec![1.0; k], vec![1.0; k]),
    };
    let arrows = model
        .cell_labels
        .iter()
        .enumerate()
        .map(|(r, label)| BiplotVector {
            label: label.clone(),
            coords: (0..k).map(|a| model.loadings_clr[(r, a)] * arrow_scale[a]).collect(),
        })
        .collect();
    let points = model
        .sample_ids
        .iter()
        .enumerate()
        .map(|(r, label)| BiplotVector {
            label: label.clone(),
            coords: (0..k).map(|a| model.scores[(r, a)] * point_scale[a]).collect(),
        })
        .collect();
    Ok(Biplot {
        form,
        arrows,
        points,
        explained: props[..k].to_vec(),
        sign_convention: SIGN_CONVENTION,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub explained_at_2: (f64, f64),
    /// Principal angles (degrees) between the leading loading subspaces.
    pub principal_angles: Vec<f64>,
    /// Angle (degrees) between the first loading vectors, sign ignored.
    pub first_loading_angle: f64,
    /// Per-table distance between leading scores after sign alignment.
    pub score_displacement: Vec<f64>,
}

/// Principal angles in degrees between the column spaces of two matrices
/// with orthonormal columns.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let m = a.transpose() * b;
    let mut cos: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    cos.sort_by(|x, y| y.total_cmp(x));
    // small angles are resolved through their sines
    let residual = b - a * &m;
    let mut sin: Vec<f64> = residual.svd(false, false).singular_values.iter().copied().collect();
    sin.sort_by(|x, y| x.total_cmp(y));
    cos.iter()
        .zip(sin.iter().chain(std::iter::repeat(&1.0)))
        .map(|(&c, &s)| {
            let angle = if c * c > 0.5 { s.clamp(0.0, 1.0).asin() } else { c.clamp(-1.0, 1.0).acos() };
            angle.to_degrees()
        })
        .collect()
}

pub fn compare_runs(a: &PcaModel, b: &PcaModel) -> Result<Comparison> {
    if a.part != b.part {
        return Err(Error::ComparisonError(format!("parts differ: {} vs {}", a.part, b.part)));
    }
    if a.shape != b.shape || a.dim() != b.dim() {
        return Err(Error::ComparisonError("table shapes differ".into()));
    }
    if a.scores.nrows() != b.scores.nrows() {
        return Err(Error::ComparisonError(format!(
            "sample sizes differ: {} vs {}",
            a.scores.nrows(),
            b.scores.nrows()
        )));
    }
    let k = a.dim().min(2);
    let la = a.loadings_clr.columns(0, k).into_owned();
    let lb = b.loadings_clr.columns(0, k).into_owned();
    let angles = principal_angles(&la, &lb);
    let first = principal_angles(
        &a.loadings_clr.columns(0, 1).into_owned(),
        &b.loadings_clr.columns(0, 1).into_owned(),
    )[0];
    let signs: Vec<f64> = (0..k)
        .map(|c| {
            if la.column(c).dot(&lb.column(c)) < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    let displacement = (0..a.scores.nrows())
        .map(|r| {
            (0..k)
                .map(|c| (a.scores[(r, c)] - signs[c] * b.scores[(r, c)]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(Comparison {
        explained_at_2: (a.explained_at(2), b.explained_at(2)),
        principal_angles: angles,
        first_loading_angle: first,
        score_displacement: displacement,
    })
}
