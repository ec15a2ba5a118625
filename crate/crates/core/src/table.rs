//! Two-factor compositional tables.
//!
//! A table is an `I×J` grid of positive cells whose information lies in the
//! ratios between cells. It is treated as a composition of `I·J` parts through
//! column-major vectorization, `(x₁₁, …, x_I1, …, x_IJ)`, and splits
//! orthogonally into an independence table (generated by the row and column
//! geometric marginals) and an interaction table (the remainder).

use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::{ClrVector, Composition, CoordinateSystem, IlrVector};

/// Below this Aitchison norm a table is considered neutral.
pub const NEUTRAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionalTable {
    cells: DMatrix<f64>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    sample_id: Option<String>,
}

fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

impl CompositionalTable {
    pub fn new(cells: DMatrix<f64>) -> Result<Self> {
        let (i, j) = cells.shape();
        Self::with_labels(cells, default_labels("r", i), default_labels("c", j))
    }

    pub fn with_labels(
        cells: DMatrix<f64>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        let (i, j) = cells.shape();
        if i < 2 || j < 2 {
            return Err(Error::InvalidComposition(format!(
                "a compositional table needs at least 2 rows and 2 columns, got {i}×{j}"
            )));
        }
        if row_labels.len() != i {
            return Err(Error::dim(i, row_labels.len()));
        }
        if col_labels.len() != j {
            return Err(Error::dim(j, col_labels.len()));
        }
        for r in 0..i {
            for c in 0..j {
                let v = cells[(r, c)];
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidComposition(format!(
                        "cell ({}, {}) is {v}; cells must be positive and finite",
                        r + 1,
                        c + 1
                    )));
                }
            }
        }
        Ok(CompositionalTable {
            cells,
            row_labels,
            col_labels,
            sample_id: None,
        })
    }

    /// Builds a table from row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let i = rows.len();
        let j = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != j) {
            return Err(Error::dim(j, bad.len()));
        }
        Self::new(DMatrix::from_fn(i, j, |r, c| rows[r][c]))
    }

    pub fn with_sample_id(mut self, id: impl Into<String>) -> Self {
        self.sample_id = Some(id.into());
        self
    }

    /// Constant table of the given shape.
    pub fn neutral(i: usize, j: usize) -> Result<Self> {
        Self::new(DMatrix::from_element(i, j, 1.0))
    }

    pub fn cells(&self) -> &DMatrix<f64> {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[(row, col)]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.cells.shape()
    }

    pub fn nrows(&self) -> usize {
        self.cells.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.cells.ncols()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn sample_id(&self) -> Option<&str> {
        self.sample_id.as_deref()
    }

    /// Cell labels `row:col` in vectorization order.
    pub fn cell_labels(&self) -> Vec<String> {
        cell_labels(&self.row_labels, &self.col_labels)
    }

    /// Column-major flattening `(x₁₁, …, x_I1, …, x_IJ)`.
    pub fn vectorize(&self) -> Composition {
        Composition::new(self.cells.as_slice().to_vec())
            .and_then(|c| c.with_labels(self.cell_labels()))
            .expect("table invariants imply a valid composition")
    }

    /// Inverse of [`vectorize`](Self::vectorize), taking labels from `like`.
    pub fn from_vectorized(x: &Composition, like: &CompositionalTable) -> Result<Self> {
        let (i, j) = like.shape();
        if x.len() != i * j {
            return Err(Error::dim(i * j, x.len()));
        }
        let cells = DMatrix::from_column_slice(i, j, x.parts());
        Ok(CompositionalTable {
            cells,
            row_labels: like.row_labels.clone(),
            col_labels: like.col_labels.clone(),
            sample_id: like.sample_id.clone(),
        })
    }

    pub fn close(&self, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidComposition(format!(
                "closure constant must be positive, got {kappa}"
            )));
        }
        let total = self.cells.sum();
        Ok(self.map_cells(self.cells.map(|v| kappa * v / total)))
    }

    pub fn perturb(&self, other: &CompositionalTable) -> Result<Self> {
        self.check_shape(other)?;
        let cells = self.cells.component_mul(&other.cells);
        validate_cells(&cells)?;
        Ok(self.map_cells(cells))
    }

    pub fn power(&self, a: f64) -> Result<Self> {
        let cells = self.cells.map(|v| v.powf(a));
        validate_cells(&cells)?;
        Ok(self.map_cells(cells))
    }

    pub fn difference(&self, other: &CompositionalTable) -> Result<Self> {
        self.perturb(&other.power(-1.0)?)
    }

    pub fn inner(&self, other: &CompositionalTable) -> Result<f64> {
        self.check_shape(other)?;
        self.vectorize().inner(&other.vectorize())
    }

    pub fn norm(&self) -> f64 {
        self.vectorize().norm()
    }

    pub fn distance(&self, other: &CompositionalTable) -> Result<f64> {
        self.check_shape(other)?;
        self.vectorize().distance(&other.vectorize())
    }

    pub fn is_neutral(&self) -> bool {
        self.norm() < NEUTRAL_TOL
    }

    /// Clr coefficients arranged as a grid.
    pub fn clr(&self) -> ClrTable {
        ClrTable::from_logs(self.cells.map(f64::ln))
    }

    /// Natural logs of the row geometric means.
    pub fn row_log_means(&self) -> Vec<f64> {
        self.cells
            .row_iter()
            .map(|r| r.iter().map(|v| v.ln()).sum::<f64>() / r.len() as f64)
            .collect()
    }

    /// Natural logs of the column geometric means.
    pub fn col_log_means(&self) -> Vec<f64> {
        self.cells
            .column_iter()
            .map(|c| c.iter().map(|v| v.ln()).sum::<f64>() / c.len() as f64)
            .collect()
    }

    /// Reorders whole rows: row `r` of the result is row `perm[r]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.nrows())?;
        let cells = DMatrix::from_fn(self.nrows(), self.ncols(), |r, c| self.cells[(perm[r], c)]);
        Ok(CompositionalTable {
            cells,
            row_labels: perm.iter().map(|&p| self.row_labels[p].clone()).collect(),
            col_labels: self.col_labels.clone(),
            sample_id: self.sample_id.clone(),
        })
    }

    /// Reorders whole columns: column `c` of the result is column `perm[c]`.
    pub fn permute_cols(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.ncols())?;
        let cells = DMatrix::from_fn(self.nrows(), self.ncols(), |r, c| self.cells[(r, perm[c])]);
        Ok(CompositionalTable {
            cells,
            row_labels: self.row_labels.clone(),
            col_labels: perm.iter().map(|&p| self.col_labels[p].clone()).collect(),
            sample_id: self.sample_id.clone(),
        })
    }

    /// A table with the same labels built from log-cells, closed to 1.
    pub(crate) fn from_logs_like(logs: &DMatrix<f64>, like: &CompositionalTable) -> Self {
        let max = logs.max();
        let exps = logs.map(|l| (l - max).exp());
        let total = exps.sum();
        like.map_cells(exps / total)
    }

    fn map_cells(&self, cells: DMatrix<f64>) -> Self {
        CompositionalTable {
            cells,
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
            sample_id: self.sample_id.clone(),
        }
    }

    fn check_shape(&self, other: &CompositionalTable) -> Result<()> {
        if self.shape() != other.shape() {
            let (i, j) = self.shape();
            let (k, l) = other.shape();
            return Err(Error::dim(i * j, k * l));
        }
        Ok(())
    }
}

pub(crate) fn cell_labels(rows: &[String], cols: &[String]) -> Vec<String> {
    cols.iter()
        .flat_map(|c| rows.iter().map(move |r| format!("{r}:{c}")))
        .collect()
}

fn validate_cells(cells: &DMatrix<f64>) -> Result<()> {
    if cells.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidComposition(
            "operation produced a non-positive or non-finite cell".into(),
        ))
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::dim(n, perm.len()));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidData(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Clr coefficients of a table, kept in table shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClrTable {
    #[serde(serialize_with = "serialize_rows")]
    values: DMatrix<f64>,
}

fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in m.row_iter() {
        seq.serialize_element(&r.iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}

impl ClrTable {
    fn from_logs(logs: DMatrix<f64>) -> Self {
        let mean = logs.mean();
        ClrTable {
            values: logs.map(|l| l - mean),
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    /// Column-major flattening, matching [`CompositionalTable::vectorize`].
    pub fn vectorize(&self) -> ClrVector {
        ClrVector::new(self.values.as_slice().to_vec())
            .expect("clr grids sum to zero by construction")
    }
}

/// Orthogonal split of a table into independence and interaction parts, with
/// the marginal projections that generate the independence part.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDecomposition {
    pub independence: CompositionalTable,
    pub interaction: CompositionalTable,
    pub row_projection: CompositionalTable,
    pub col_projection: CompositionalTable,
}

/// Decomposes `t` into `x_ind ⊕ x_int`; every output is closed to 1.
pub fn decompose(t: &CompositionalTable) -> TableDecomposition {
    let (i, j) = t.shape();
    let rows = t.row_log_means();
    let cols = t.col_log_means();
    let logs = t.cells.map(f64::ln);

    let row_proj = DMatrix::from_fn(i, j, |r, _| rows[r]);
    let col_proj = DMatrix::from_fn(i, j, |_, c| cols[c]);
    let ind = &row_proj + &col_proj;
    // x_int_ij = ∏_{k,l} (x_ij / (x_kj·x_il))^{1/IJ}
    let int = DMatrix::from_fn(i, j, |r, c| logs[(r, c)] - cols[c] - rows[r]);

    TableDecomposition {
        independence: CompositionalTable::from_logs_like(&ind, t),
        interaction: CompositionalTable::from_logs_like(&int, t),
        row_projection: CompositionalTable::from_logs_like(&row_proj, t),
        col_projection: CompositionalTable::from_logs_like(&col_proj, t),
    }
}

/// Clr coefficients of the independence table written in terms of the cells
/// of `t`: `ln(g(x_i•)·g(x_•j) / g(x_••)²)`.
pub fn clr_independence(t: &CompositionalTable) -> ClrTable {
    let rows = t.row_log_means();
    let cols = t.col_log_means();
    let grand = t.cells.map(f64::ln).mean();
    let (i, j) = t.shape();
    ClrTable {
        values: DMatrix::from_fn(i, j, |r, c| rows[r] + cols[c] - 2.0 * grand),
    }
}

/// Clr coefficients of the interaction table written in terms of the cells
/// of `t`: `ln(x_ij·g(x_••) / (g(x_i•)·g(x_•j)))`.
pub fn clr_interaction(t: &CompositionalTable) -> ClrTable {
    let rows = t.row_log_means();
    let cols = t.col_log_means();
    let grand = t.cells.map(f64::ln).mean();
    let (i, j) = t.shape();
    ClrTable {
        values: DMatrix::from_fn(i, j, |r, c| t.cells[(r, c)].ln() + grand - rows[r] - cols[c]),
    }
}

/// Pivot coordinates of `I×J` tables: `I−1` row coordinates, `J−1` column
/// coordinates and `(I−1)(J−1)` odds-ratio coordinates, in that order.
#[derive(Debug, Clone)]
pub struct TableCoordinateSystem {
    shape: (usize, usize),
    pivot: (usize, usize),
    full: Arc<CoordinateSystem>,
    independence: Arc<CoordinateSystem>,
    interaction: Arc<CoordinateSystem>,
    odds_ratio_cells: Vec<(usize, usize)>,
}

impl TableCoordinateSystem {
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// 1-based (row, column) pivot.
    pub fn pivot(&self) -> (usize, usize) {
        self.pivot
    }

    pub fn full(&self) -> &Arc<CoordinateSystem> {
        &self.full
    }

    pub fn independence(&self) -> &Arc<CoordinateSystem> {
        &self.independence
    }

    pub fn interaction(&self) -> &Arc<CoordinateSystem> {
        &self.interaction
    }

    pub fn row_block(&self) -> Range<usize> {
        0..self.shape.0 - 1
    }

    pub fn col_block(&self) -> Range<usize> {
        let r = self.shape.0 - 1;
        r..r + self.shape.1 - 1
    }

    pub fn odds_ratio_block(&self) -> Range<usize> {
        let start = self.shape.0 + self.shape.1 - 2;
        start..start + (self.shape.0 - 1) * (self.shape.1 - 1)
    }

    /// The 1-based pivot cell `(r, s)` (in pivot-permuted order) of each
    /// odds-ratio coordinate, in coordinate order.
    pub fn odds_ratio_cells(&self) -> &[(usize, usize)] {
        &self.odds_ratio_cells
    }

    fn check(&self, t: &CompositionalTable) -> Result<()> {
        if t.shape() != self.shape {
            let (i, j) = self.shape;
            let (k, l) = t.shape();
            return Err(Error::dim(i * j, k * l));
        }
        Ok(())
    }
}

/// Builds the table pivot system with row `row_pivot` and column `col_pivot`
/// (both 1-based) moved to the front.
pub fn table_pivot_system(
    i: usize,
    j: usize,
    row_pivot: usize,
    col_pivot: usize,
) -> Result<TableCoordinateSystem> {
    if i < 2 || j < 2 {
        return Err(Error::InvalidComposition(format!(
            "a compositional table needs at least 2 rows and 2 columns, got {i}×{j}"
        )));
    }
    if row_pivot == 0 || row_pivot > i {
        return Err(Error::IndexError {
            index: row_pivot,
            max: i,
        });
    }
    if col_pivot == 0 || col_pivot > j {
        return Err(Error::IndexError {
            index: col_pivot,
            max: j,
        });
    }
    let rows = pivot_order(i, row_pivot - 1);
    let cols = pivot_order(j, col_pivot - 1);
    let cell = |r: usize, c: usize| rows[r] + i * cols[c];

    let p = i * j - 1;
    let mut contrast = DMatrix::<f64>::zeros(i * j, p);
    let mut names = Vec::with_capacity(p);
    let mut col = 0;

    for pr in 0..i - 1 {
        let rest = (i - pr - 1) as f64;
        let scale = (rest * j as f64 / (rest + 1.0)).sqrt();
        for c in 0..j {
            contrast[(cell(pr, c), col)] = scale / j as f64;
            for r in pr + 1..i {
                contrast[(cell(r, c), col)] = -scale / (j as f64 * rest);
            }
        }
        names.push(format!("z_r_{}", pr + 1));
        col += 1;
    }
    for pc in 0..j - 1 {
        let rest = (j - pc - 1) as f64;
        let scale = (i as f64 * rest / (rest + 1.0)).sqrt();
        for r in 0..i {
            contrast[(cell(r, pc), col)] = scale / i as f64;
            for c in pc + 1..j {
                contrast[(cell(r, c), col)] = -scale / (i as f64 * rest);
            }
        }
        names.push(format!("z_c_{}", pc + 1));
        col += 1;
    }
    let mut odds_ratio_cells = Vec::with_capacity((i - 1) * (j - 1));
    for r in 0..i - 1 {
        for s in 0..j - 1 {
            // log of ∏_{i>r, j>s} x_ij·x_rs / (x_is·x_rj)
            let a = (i - r - 1) as f64;
            let b = (j - s - 1) as f64;
            let scale = 1.0 / (a * b * (a + 1.0) * (b + 1.0)).sqrt();
            contrast[(cell(r, s), col)] = a * b * scale;
            for rr in r + 1..i {
                contrast[(cell(rr, s), col)] = -b * scale;
                for cc in s + 1..j {
                    contrast[(cell(rr, cc), col)] = scale;
                }
            }
            for cc in s + 1..j {
                contrast[(cell(r, cc), col)] = -a * scale;
            }
            names.push(format!("z_OR_{}_{}", r + 1, s + 1));
            odds_ratio_cells.push((r + 1, s + 1));
            col += 1;
        }
    }

    let full = CoordinateSystem::from_contrast(contrast, names)?;
    let n_ind = i + j - 2;
    let independence = full.select(&(0..n_ind).collect::<Vec<_>>())?;
    let interaction = full.select(&(n_ind..p).collect::<Vec<_>>())?;
    Ok(TableCoordinateSystem {
        shape: (i, j),
        pivot: (row_pivot, col_pivot),
        full: Arc::new(full),
        independence: Arc::new(independence),
        interaction: Arc::new(interaction),
        odds_ratio_cells,
    })
}

fn pivot_order(n: usize, pivot: usize) -> Vec<usize> {
    std::iter::once(pivot)
        .chain((0..n).filter(|&k| k != pivot))
        .collect()
}

/// The three coordinate blocks of one table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCoords {
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub odds_ratios: Vec<f64>,
}

impl TableCoords {
    pub fn concat(&self) -> Vec<f64> {
        let mut v = self.rows.clone();
        v.extend_from_slice(&self.cols);
        v.extend_from_slice(&self.odds_ratios);
        v
    }
}

pub fn table_coords(t: &CompositionalTable, sys: &TableCoordinateSystem) -> Result<TableCoords> {
    sys.check(t)?;
    let z = sys.full.coords_of_clr(&t.clr().vectorize())?;
    Ok(TableCoords {
        rows: z[sys.row_block()].to_vec(),
        cols: z[sys.col_block()].to_vec(),
        odds_ratios: z[sys.odds_ratio_block()].to_vec(),
    })
}

/// Full coordinate vector of `t` (length `I·J − 1`).
pub fn coords_full(t: &CompositionalTable, sys: &TableCoordinateSystem) -> Result<IlrVector> {
    sys.check(t)?;
    let z = sys.full.coords_of_clr(&t.clr().vectorize())?;
    IlrVector::new(z, Arc::clone(&sys.full))
}

/// Row and column coordinates (length `I + J − 2`).
pub fn coords_independence(t: &CompositionalTable, sys: &TableCoordinateSystem) -> Result<IlrVector> {
    sys.check(t)?;
    let z = sys.independence.coords_of_clr(&t.clr().vectorize())?;
    IlrVector::new(z, Arc::clone(&sys.independence))
}

/// Odds-ratio coordinates (length `(I − 1)(J − 1)`).
pub fn coords_interaction(t: &CompositionalTable, sys: &TableCoordinateSystem) -> Result<IlrVector> {
    sys.check(t)?;
    let z = sys.interaction.coords_of_clr(&t.clr().vectorize())?;
    IlrVector::new(z, Arc::clone(&sys.interaction))
}

/// Maximum residuals of the identities linking the first row, column and
/// odds-ratio pivot coordinates of every `(k, l)` system to the clr
/// coefficients of the independence and interaction tables at cell `(k, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProportionalityReport {
    pub independence_residual: f64,
    pub interaction_residual: f64,
    pub systems_checked: usize,
}

impl ProportionalityReport {
    pub fn max_residual(&self) -> f64 {
        self.independence_residual.max(self.interaction_residual)
    }
}

pub fn proportionality_check(t: &CompositionalTable) -> Result<ProportionalityReport> {
    let (i, j) = t.shape();
    let d = decompose(t);
    let clr_ind = d.independence.clr();
    let clr_int = d.interaction.clr();
    let fi = i as f64;
    let fj = j as f64;
    let row_w = ((fi - 1.0) / (fi * fj)).sqrt();
    let col_w = ((fj - 1.0) / (fi * fj)).sqrt();
    let or_w = ((fi - 1.0) * (fj - 1.0) / (fi * fj)).sqrt();

    let mut report = ProportionalityReport {
        independence_residual: 0.0,
        interaction_residual: 0.0,
        systems_checked: 0,
    };
    for k in 1..=i {
        for l in 1..=j {
            let sys = table_pivot_system(i, j, k, l)?;
            let z = table_coords(t, &sys)?;
            let ind = row_w * z.rows[0] + col_w * z.cols[0];
            let int = or_w * z.odds_ratios[0];
            report.independence_residual = report
                .independence_residual
                .max((ind - clr_ind.get(k - 1, l - 1)).abs());
            report.interaction_residual = report
                .interaction_residual
                .max((int - clr_int.get(k - 1, l - 1)).abs());
            report.systems_checked += 1;
        }
    }
    Ok(report)
}
