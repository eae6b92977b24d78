//! Quasi-random designs in the unit hypercube: Sobol' sequences, Saltelli
//! collections and the affine map to physical parameter bounds.

mod io;
mod saltelli;
mod sobol;

pub use io::{read_design_csv, write_design_csv, SaltelliManifest, SALTELLI_SCHEMA_VERSION};
pub use saltelli::{saltelli_sample, SaltelliBlock, SaltelliSet};
pub use sobol::{sobol_sequence, SobolGenerator, MAX_DIM};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// `N × D` design points, every cell in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("design matrix needs N ≥ 1 and D ≥ 1".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::InvalidArgument(format!(
                "design value {bad} lies outside the unit interval"
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged design rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.values.chunks(self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    /// Selects columns `start..start + len` of every row.
    pub fn columns(&self, start: usize, len: usize) -> Self {
        let values = self
            .iter_rows()
            .flat_map(|r| r[start..start + len].iter().copied())
            .collect();
        Self {
            rows: self.rows,
            cols: len,
            values,
        }
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.rows);
        Self {
            rows: n,
            cols: self.cols,
            values: self.values[..n * self.cols].to_vec(),
        }
    }

    /// Appends a row; the row must lie in the unit hypercube.
    pub fn push_row(&mut self, row: &[T]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::InvalidArgument("row outside the unit hypercube".into()));
        }
        self.values.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.iter_rows().map(<[T]>::to_vec).collect()
    }
}

/// One physical design parameter: name, interval and optional unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterBound<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// Per-dimension physical bounds, `lower < upper` everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bounds<T> {
    params: Vec<ParameterBound<T>>,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(params: Vec<ParameterBound<T>>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidArgument("bounds need at least one parameter".into()));
        }
        for p in &params {
            if !(p.lower < p.upper) {
                return Err(Error::InvalidArgument(format!(
                    "parameter `{}` has lower ≥ upper",
                    p.name
                )));
            }
        }
        Ok(Self { params })
    }

    /// Unit hypercube with parameters named `x1..xD`.
    pub fn unit(dim: usize) -> Self {
        Self {
            params: (1..=dim)
                .map(|i| ParameterBound {
                    name: format!("x{i}"),
                    lower: T::zero(),
                    upper: T::one(),
                    unit: None,
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParameterBound<T>] {
        &self.params
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    /// Maps one unit-cube point to physical units.
    pub fn scale_point(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        Ok(x.iter()
            .zip(&self.params)
            .map(|(&u, p)| p.lower + u * (p.upper - p.lower))
            .collect())
    }

    /// Maps one physical point back to the unit cube.
    pub fn unscale_point(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        Ok(x.iter()
            .zip(&self.params)
            .map(|(&v, p)| (v - p.lower) / (p.upper - p.lower))
            .collect())
    }

    fn check(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Affine map of every design row from the unit cube into `bounds`.
pub fn scale<T: Scalar>(points: &DesignMatrix<T>, bounds: &Bounds<T>) -> Result<Matrix<T>> {
    let mut data = Vec::with_capacity(points.as_slice().len());
    for row in points.iter_rows() {
        data.extend(bounds.scale_point(row)?);
    }
    Ok(Matrix::from_row_major(points.rows(), points.cols(), data))
}

/// Inverse of [`scale`]. Values are clamped to `[0, 1]` to absorb round-off at
/// the bounds.
pub fn unscale<T: Scalar>(points: &Matrix<T>, bounds: &Bounds<T>) -> Result<DesignMatrix<T>> {
    let mut data = Vec::with_capacity(points.as_slice().len());
    for i in 0..points.rows() {
        let u = bounds.unscale_point(points.row(i))?;
        for v in u {
            let tol = T::lit(1e-9);
            if v < -tol || v > T::one() + tol {
                return Err(Error::InvalidArgument(format!(
                    "physical value maps to {v}, outside the bounds"
                )));
            }
            data.push(v.max(T::zero()).min(T::one()));
        }
    }
    DesignMatrix::from_row_major(points.rows(), points.cols(), data)
}
