use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::DesignMatrix;
use crate::scalar::Scalar;

/// Designs `X` (unit hypercube) with their responses `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Doe<T> {
    pub x: DesignMatrix<T>,
    pub y: Vec<T>,
}

impl<T: Scalar> Doe<T> {
    pub fn new(x: DesignMatrix<T>, y: Vec<T>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite response".into()));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn push(&mut self, x: &[T], y: T) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::InvalidArgument("non-finite response".into()));
        }
        self.x.push_row(x)?;
        self.y.push(y);
        Ok(())
    }

    /// Copy with `y` replaced by its standardized values.
    pub fn standardized(&self) -> (Self, Standardization<T>) {
        let s = Standardization::fit(&self.y);
        let y = self.y.iter().map(|&v| s.apply(v)).collect();
        (Self { x: self.x.clone(), y }, s)
    }
}

/// Affine map of raw responses to zero mean and unit sample variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization<T> {
    pub mean: T,
    pub std: T,
    /// Set when the responses are constant; `std` is then 1.
    pub constant: bool,
}

impl<T: Scalar> Standardization<T> {
    pub fn identity() -> Self {
        Self {
            mean: T::zero(),
            std: T::one(),
            constant: false,
        }
    }

    pub fn fit(y: &[T]) -> Self {
        let n = y.len();
        if n == 0 {
            return Self::identity();
        }
        let nt = T::from_usize_lossy(n);
        let mean = y.iter().copied().sum::<T>() / nt;
        let var = if n > 1 {
            y.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (nt - T::one())
        } else {
            T::zero()
        };
        let std = var.sqrt();
        if std > T::epsilon() * mean.abs().max(T::one()) {
            Self {
                mean,
                std,
                constant: false,
            }
        } else {
            Self {
                mean,
                std: T::one(),
                constant: true,
            }
        }
    }

    #[inline]
    pub fn apply(&self, y: T) -> T {
        (y - self.mean) / self.std
    }

    #[inline]
    pub fn invert(&self, z: T) -> T {
        z * self.std + self.mean
    }

    #[inline]
    pub fn invert_var(&self, v: T) -> T {
        v * self.std * self.std
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_responses_are_flagged() {
        let s = Standardization::fit(&[3.0, 3.0, 3.0]);
        assert!(s.constant);
        assert_eq!(s.apply(3.0), 0.0);
    }

    #[test]
    fn row_count_must_match() {
        let x = DesignMatrix::from_row_major(2, 1, vec![0.1, 0.2]).unwrap();
        assert!(Doe::new(x, vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn standardization_round_trip(y in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            let s = Standardization::fit(&y);
            for &v in &y {
                prop_assert!((s.invert(s.apply(v)) - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }
}
