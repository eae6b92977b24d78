//! Minimal dense linear algebra: row-major matrices and a jittered Cholesky
//! factorization. Everything the Gaussian-process code needs, nothing more.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major storage. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
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
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// Plain Cholesky factorization `A = L Lᵀ` of a symmetric matrix, reading only
/// the lower triangle. Returns `None` when a pivot is not strictly positive.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "cholesky needs a square matrix");
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.data[j * n..j * n + j];
        let mut d = a.get(j, j) - dot(lj, lj);
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let s = a.get(i, j) - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            l.set(i, j, s / d);
        }
    }
    Some(l)
}

/// Jitter escalation used when a kernel matrix is numerically singular.
#[derive(Clone, Copy, Debug)]
pub struct JitterPolicy {
    pub initial: f64,
    pub factor: f64,
    pub max: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-10,
            factor: 10.0,
            max: 1e-6,
        }
    }
}

/// A lower Cholesky factor together with the diagonal jitter that was needed.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
    jitter: T,
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes `a`, first as given, then with `policy.initial·scale` added to
    /// the diagonal, escalating by `policy.factor` up to `policy.max·scale`.
    pub fn factor(a: &Matrix<T>, scale: T, policy: JitterPolicy) -> Result<Self> {
        if let Some(l) = cholesky(a) {
            return Ok(Self { l, jitter: T::zero() });
        }
        let mut rel = policy.initial;
        let mut work = a.clone();
        let n = a.rows();
        loop {
            let jitter = T::lit(rel) * scale;
            for i in 0..n {
                work.set(i, i, a.get(i, i) + jitter);
            }
            if let Some(l) = cholesky(&work) {
                return Ok(Self { l, jitter });
            }
            if rel >= policy.max {
                return Err(Error::IllConditioned { jitter: rel });
            }
            rel = (rel * policy.factor).min(policy.max);
        }
    }

    pub fn l(&self) -> &Matrix<T> {
        &self.l
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut z = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let s = z[i] - dot(&row[..i], &z[..i]);
            z[i] = s / row[i];
        }
        z
    }

    /// Solves `Lᵀ x = z`.
    pub fn solve_upper(&self, z: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }

    /// Solves `A x = b` with `A = L Lᵀ`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `ln det A = 2 Σ ln L_ii`.
    pub fn ln_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim()).map(|i| self.l.get(i, i).ln()).sum::<T>() * two
    }

    /// Explicit inverse, only used for gradients and diagnostics.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorizes_spd_matrix() {
        let a = Matrix::<f64>::from_row_major(3, 3, vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let ch = Cholesky::factor(&a, 1.0, JitterPolicy::default()).unwrap();
        assert_eq!(ch.jitter(), 0.0);
        let l = ch.l();
        let back = l.matmul(&l.transpose());
        for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        let r = a.mul_vec(&x);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12 && (r[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_needs_jitter() {
        let a = Matrix::from_row_major(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        let ch = Cholesky::factor(&a, 1.0, JitterPolicy::default()).unwrap();
        assert!(ch.jitter() > 0.0 && ch.jitter() <= 1e-6);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            Cholesky::factor(&a, 1.0, JitterPolicy::default()),
            Err(Error::IllConditioned { .. })
        ));
    }
}
