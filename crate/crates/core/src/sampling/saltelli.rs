use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{sobol_sequence, DesignMatrix};
use crate::scalar::Scalar;

/// Which Saltelli matrix a design row belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SaltelliBlock {
    A,
    B,
    /// `A` with column `i` (0-based) taken from `B`.
    AB(usize),
}

impl SaltelliBlock {
    pub fn label(self) -> String {
        match self {
            Self::A => "A".into(),
            Self::B => "B".into(),
            Self::AB(i) => format!("AB_{}", i + 1),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A" => Some(Self::A),
            "B" => Some(Self::B),
            _ => s
                .strip_prefix("AB_")
                .and_then(|i| i.parse::<usize>().ok())
                .filter(|&i| i >= 1)
                .map(|i| Self::AB(i - 1)),
        }
    }
}

/// The matrices `A`, `B` and `A_B^(1..D)` of a Saltelli collection.
#[derive(Clone, Debug, PartialEq)]
pub struct SaltelliSet<T> {
    pub a: DesignMatrix<T>,
    pub b: DesignMatrix<T>,
    pub ab: Vec<DesignMatrix<T>>,
    pub skip: usize,
}

impl<T: Scalar> SaltelliSet<T> {
    /// Builds the collection from explicit `A` and `B`.
    pub fn from_ab(a: DesignMatrix<T>, b: DesignMatrix<T>, skip: usize) -> Result<Self> {
        if a.rows() != b.rows() || a.cols() != b.cols() {
            return Err(Error::DimensionMismatch {
                expected: a.rows() * a.cols(),
                got: b.rows() * b.cols(),
            });
        }
        let d = a.cols();
        let ab = (0..d)
            .map(|i| {
                let values = a
                    .iter_rows()
                    .zip(b.iter_rows())
                    .flat_map(|(ra, rb)| {
                        (0..d).map(move |k| if k == i { rb[k] } else { ra[k] })
                    })
                    .collect();
                DesignMatrix::from_row_major(a.rows(), d, values)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { a, b, ab, skip })
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn base_count(&self) -> usize {
        self.a.rows()
    }

    /// `N·(D + 2)`.
    pub fn total_designs(&self) -> usize {
        self.base_count() * (self.dim() + 2)
    }

    pub fn block(&self, block: SaltelliBlock) -> &DesignMatrix<T> {
        match block {
            SaltelliBlock::A => &self.a,
            SaltelliBlock::B => &self.b,
            SaltelliBlock::AB(i) => &self.ab[i],
        }
    }

    /// Block order used for flattened designs and response files.
    pub fn blocks(&self) -> Vec<SaltelliBlock> {
        let mut out = vec![SaltelliBlock::A, SaltelliBlock::B];
        out.extend((0..self.dim()).map(SaltelliBlock::AB));
        out
    }

    /// Every design, stacked as `A, B, A_B^(1), …, A_B^(D)`, tagged with block and row.
    pub fn iter_designs(&self) -> impl Iterator<Item = (SaltelliBlock, usize, &[T])> + '_ {
        self.blocks().into_iter().flat_map(move |blk| {
            self.block(blk)
                .iter_rows()
                .enumerate()
                .map(move |(j, r)| (blk, j, r))
        })
    }

    /// Restricts every block to its first `n` rows.
    pub fn head(&self, n: usize) -> Self {
        Self {
            a: self.a.head(n),
            b: self.b.head(n),
            ab: self.ab.iter().map(|m| m.head(n)).collect(),
            skip: self.skip,
        }
    }
}

/// Saltelli collection from the first `n_base` points of a `2·dim`-dimensional
/// Sobol' sequence: `A` takes the leading `dim` columns, `B` the trailing ones.
pub fn saltelli_sample<T: Scalar>(dim: usize, n_base: usize, skip: usize) -> Result<SaltelliSet<T>> {
    if n_base < 2 {
        return Err(Error::InvalidArgument("Saltelli sampling needs n_base ≥ 2".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
    }
    let base = sobol_sequence::<T>(2 * dim, n_base, skip)?;
    SaltelliSet::from_ab(base.columns(0, dim), base.columns(dim, dim), skip)
}
