//! Aitchison geometry of the D-part simplex.
//!
//! A [`Composition`] is any strictly positive vector; vectors that differ by a
//! positive factor are the same composition, so none of the operations here
//! close their inputs implicitly. Coordinates are always computed through a
//! dense contrast matrix `V` of a [`CoordinateSystem`], as `z = Vᵀ·clr(x)` and
//! `clr(x) = V·z`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance for algebraic identities on contrast matrices.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for validating user-supplied clr vectors.
pub const INPUT_TOL: f64 = 1e-8;

/// A strictly positive vector of `D >= 2` parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Composition {
    parts: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl Composition {
    pub fn new(parts: Vec<f64>) -> Result<Self> {
        if parts.len() < 2 {
            return Err(Error::InvalidComposition(format!(
                "need at least 2 parts, got {}",
                parts.len()
            )));
        }
        if let Some((i, v)) = parts
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidComposition(format!(
                "part {} is {v}; parts must be positive and finite",
                i + 1
            )));
        }
        Ok(Composition {
            parts,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.parts.len() {
            return Err(Error::dim(self.parts.len(), labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// The neutral element: `d` equal parts.
    pub fn neutral(d: usize) -> Result<Self> {
        Composition::new(vec![1.0; d])
    }

    pub fn parts(&self) -> &[f64] {
        &self.parts
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Rescale to constant sum `kappa`.
    pub fn close(&self, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidComposition(format!(
                "closure constant must be positive, got {kappa}"
            )));
        }
        let total: f64 = self.parts.iter().sum();
        Ok(Composition {
            parts: self.parts.iter().map(|p| kappa * p / total).collect(),
            labels: self.labels.clone(),
        })
    }

    /// Perturbation `x ⊕ y`: the componentwise product.
    pub fn perturb(&self, other: &Composition) -> Result<Self> {
        self.check_dim(other)?;
        let parts = self
            .parts
            .iter()
            .zip(&other.parts)
            .map(|(a, b)| a * b)
            .collect();
        Composition::new(parts).map(|c| self.relabel(c))
    }

    /// Powering `a ⊙ x`: the componentwise power.
    pub fn power(&self, a: f64) -> Result<Self> {
        let parts = self.parts.iter().map(|p| p.powf(a)).collect();
        Composition::new(parts).map(|c| self.relabel(c))
    }

    /// `x ⊖ y`.
    pub fn difference(&self, other: &Composition) -> Result<Self> {
        self.perturb(&other.power(-1.0)?)
    }

    pub fn inner(&self, other: &Composition) -> Result<f64> {
        self.check_dim(other)?;
        let a = clr_values(&self.parts);
        let b = clr_values(&other.parts);
        Ok(a.iter().zip(&b).map(|(u, v)| u * v).sum())
    }

    pub fn norm(&self) -> f64 {
        clr_values(&self.parts)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &Composition) -> Result<f64> {
        self.check_dim(other)?;
        let a = clr_values(&self.parts);
        let b = clr_values(&other.parts);
        Ok(a.iter()
            .zip(&b)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt())
    }

    pub fn clr(&self) -> ClrVector {
        ClrVector {
            values: clr_values(&self.parts),
            labels: self.labels.clone(),
        }
    }

    /// Geometric mean, accumulated in log space.
    pub fn geometric_mean(&self) -> f64 {
        mean_log(&self.parts).exp()
    }

    fn check_dim(&self, other: &Composition) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::dim(self.len(), other.len()));
        }
        Ok(())
    }

    fn relabel(&self, mut c: Composition) -> Composition {
        c.labels = self.labels.clone();
        c
    }
}

pub(crate) fn mean_log(values: &[f64]) -> f64 {
    values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64
}

pub(crate) fn clr_values(parts: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = parts.iter().map(|p| p.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    logs.into_iter().map(|l| l - mean).collect()
}

/// Centered logratio coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClrVector {
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl ClrVector {
    /// Validates that the values lie in the clr plane (sum within `1e-8` of 0).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::dim(2, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("clr values must be finite".into()));
        }
        let sum: f64 = values.iter().sum();
        if sum.abs() > INPUT_TOL {
            return Err(Error::NotInClrPlane(sum));
        }
        Ok(ClrVector {
            values,
            labels: None,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Inverse clr: `close(exp(c), 1)`.
    pub fn to_composition(&self) -> Composition {
        let exps: Vec<f64> = self.values.iter().map(|v| v.exp()).collect();
        let total: f64 = exps.iter().sum();
        Composition {
            parts: exps.into_iter().map(|e| e / total).collect(),
            labels: self.labels.clone(),
        }
    }

    pub(crate) fn as_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}

/// An ordered set of orthonormal logratio coordinates, stored as the clr
/// images of the basis vectors (the columns of the contrast matrix `V`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSystem {
    contrast: DMatrix<f64>,
    names: Vec<String>,
}

impl CoordinateSystem {
    /// Builds a system from its contrast matrix, rejecting columns that are
    /// not zero-sum or not orthonormal within `1e-12`.
    pub fn from_contrast(contrast: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != contrast.ncols() {
            return Err(Error::dim(contrast.ncols(), names.len()));
        }
        if contrast.ncols() >= contrast.nrows() {
            return Err(Error::InvalidData(format!(
                "a contrast matrix over {} parts has at most {} columns, got {}",
                contrast.nrows(),
                contrast.nrows().saturating_sub(1),
                contrast.ncols()
            )));
        }
        let sys = CoordinateSystem { contrast, names };
        let (sum_err, ortho_err) = sys.residuals();
        if sum_err > ALGEBRAIC_TOL || ortho_err > ALGEBRAIC_TOL {
            return Err(Error::InvalidData(format!(
                "contrast matrix is not orthonormal in the clr plane \
                 (column sum residual {sum_err:e}, VᵀV residual {ortho_err:e})"
            )));
        }
        Ok(sys)
    }

    /// Largest absolute column sum and largest entry of `|VᵀV − I|`.
    pub fn residuals(&self) -> (f64, f64) {
        let sum_err = self
            .contrast
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max);
        let gram = self.contrast.transpose() * &self.contrast;
        let ident = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
        let ortho_err = (gram - ident).abs().max();
        (sum_err, ortho_err)
    }

    pub fn dim_in(&self) -> usize {
        self.contrast.nrows()
    }

    pub fn dim_out(&self) -> usize {
        self.contrast.ncols()
    }

    pub fn contrast(&self) -> &DMatrix<f64> {
        &self.contrast
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// A system made of the given subset of columns, in order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.dim_out()) {
            return Err(Error::IndexError {
                index: bad + 1,
                max: self.dim_out(),
            });
        }
        let contrast = self.contrast.select_columns(columns);
        let names = columns.iter().map(|&c| self.names[c].clone()).collect();
        Ok(CoordinateSystem { contrast, names })
    }

    /// `z = Vᵀ·clr(x)`.
    pub fn coords_of_clr(&self, clr: &ClrVector) -> Result<Vec<f64>> {
        if clr.len() != self.dim_in() {
            return Err(Error::dim(self.dim_in(), clr.len()));
        }
        let z = self.contrast.tr_mul(&clr.as_dvector());
        Ok(z.as_slice().to_vec())
    }

    /// `clr = V·z`.
    pub fn clr_of_coords(&self, z: &[f64]) -> Result<ClrVector> {
        if z.len() != self.dim_out() {
            return Err(Error::dim(self.dim_out(), z.len()));
        }
        let clr = &self.contrast * DVector::from_column_slice(z);
        Ok(ClrVector {
            values: clr.as_slice().to_vec(),
            labels: None,
        })
    }
}

/// Coordinates of a composition together with the system that produced them.
#[derive(Debug, Clone)]
pub struct IlrVector {
    values: Vec<f64>,
    system: Arc<CoordinateSystem>,
}

impl IlrVector {
    pub fn new(values: Vec<f64>, system: Arc<CoordinateSystem>) -> Result<Self> {
        if values.len() != system.dim_out() {
            return Err(Error::dim(system.dim_out(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("coordinates must be finite".into()));
        }
        Ok(IlrVector { values, system })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn system(&self) -> &Arc<CoordinateSystem> {
        &self.system
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Back to the simplex through `clr⁻¹(V·z)`.
    pub fn to_composition(&self) -> Composition {
        // dimensions were checked at construction
        self.system
            .clr_of_coords(&self.values)
            .expect("coordinate length matches system")
            .to_composition()
    }
}

/// `z = Vᵀ·clr(x)` for a system that spans the full simplex.
pub fn to_coords(x: &Composition, system: &Arc<CoordinateSystem>) -> Result<IlrVector> {
    let values = system.coords_of_clr(&x.clr())?;
    Ok(IlrVector {
        values,
        system: Arc::clone(system),
    })
}

pub fn from_coords(z: &IlrVector) -> Composition {
    z.to_composition()
}

/// Pivot coordinates of a `d`-part composition with part `pivot` (1-based)
/// moved to the front; coordinate `i` contrasts the i-th reordered part with
/// the geometric mean of all parts after it.
pub fn pivot_system(d: usize, pivot: usize) -> Result<CoordinateSystem> {
    if d < 2 {
        return Err(Error::InvalidComposition(format!(
            "need at least 2 parts, got {d}"
        )));
    }
    if pivot == 0 || pivot > d {
        return Err(Error::IndexError {
            index: pivot,
            max: d,
        });
    }
    let order: Vec<usize> = std::iter::once(pivot - 1)
        .chain((0..d).filter(|&j| j != pivot - 1))
        .collect();
    let mut contrast = DMatrix::<f64>::zeros(d, d - 1);
    for i in 0..d - 1 {
        let rest = (d - i - 1) as f64;
        let scale = (rest / (rest + 1.0)).sqrt();
        contrast[(order[i], i)] = scale;
        for &j in &order[i + 1..] {
            contrast[(j, i)] = -scale / rest;
        }
    }
    let names = (1..d).map(|i| format!("z_{i}")).collect();
    CoordinateSystem::from_contrast(contrast, names)
}
