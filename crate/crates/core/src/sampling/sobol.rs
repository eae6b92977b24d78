//! Sobol' low-discrepancy sequence (unscrambled, Gray-code ordering) with
//! Joe–Kuo direction numbers.

use crate::error::{Error, Result};
use crate::sampling::DesignMatrix;
use crate::scalar::Scalar;

const BITS: usize = 32;

/// `(degree s, coefficient a, initial m_1..m_s)` for dimensions 2, 3, ...
/// taken from the `new-joe-kuo-6.21201` table. Dimension 1 is the van der
/// Corput sequence and needs no entry.
const JOE_KUO: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
    (7, 41, &[1, 3, 5, 13, 23, 1, 55]),
    (7, 42, &[1, 3, 7, 3, 13, 59, 17]),
    (7, 50, &[1, 3, 1, 3, 5, 53, 69]),
    (7, 55, &[1, 1, 5, 5, 23, 33, 13]),
    (7, 56, &[1, 1, 7, 7, 1, 61, 123]),
    (7, 59, &[1, 1, 7, 9, 13, 61, 49]),
    (7, 62, &[1, 3, 3, 5, 3, 55, 33]),
    (8, 14, &[1, 3, 1, 15, 31, 13, 49, 245]),
    (8, 21, &[1, 3, 5, 15, 31, 59, 63, 97]),
    (8, 22, &[1, 3, 1, 11, 11, 11, 77, 249]),
];

/// Largest dimension the built-in direction-number table supports.
pub const MAX_DIM: usize = JOE_KUO.len() + 1;

fn direction_numbers(dim_index: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim_index == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1u32 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim_index - 1];
    let s = s as usize;
    for k in 0..s.min(BITS) {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                x ^= v[k - j];
            }
        }
        v[k] = x;
    }
    v
}

/// Incremental Sobol' generator producing integer states; one point per call.
#[derive(Clone, Debug)]
pub struct SobolGenerator {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolGenerator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("Sobol' dimension must be ≥ 1".into()));
        }
        if dim > MAX_DIM {
            return Err(Error::UnsupportedDimension { requested: dim, max: MAX_DIM });
        }
        Ok(Self {
            directions: (0..dim).map(direction_numbers).collect(),
            state: vec![0; dim],
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Positions the generator at sequence index `n` (0 is the origin).
    pub fn seek(&mut self, n: u64) {
        let gray = n ^ (n >> 1);
        for (d, dirs) in self.directions.iter().enumerate() {
            let mut x = 0u32;
            for (bit, v) in dirs.iter().enumerate() {
                if (gray >> bit) & 1 == 1 {
                    x ^= v;
                }
            }
            self.state[d] = x;
        }
        self.index = n;
    }

    /// Writes the current point into `out` and advances by one.
    pub fn next_into<T: Scalar>(&mut self, out: &mut [T]) {
        let scale = T::lit(1.0 / (1u64 << BITS) as f64);
        for (o, &x) in out.iter_mut().zip(&self.state) {
            *o = T::lit(x as f64) * scale;
        }
        let c = (!self.index).trailing_zeros() as usize;
        assert!(c < BITS, "Sobol' sequence exhausted");
        for (x, dirs) in self.state.iter_mut().zip(&self.directions) {
            *x ^= dirs[c];
        }
        self.index += 1;
    }
}

/// The `n` Sobol' points with indices `skip..skip + n` in `[0,1]^dim`.
pub fn sobol_sequence<T: Scalar>(dim: usize, n: usize, skip: usize) -> Result<DesignMatrix<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("Sobol' point count must be ≥ 1".into()));
    }
    let mut gen = SobolGenerator::new(dim)?;
    gen.seek(skip as u64);
    let mut values = vec![T::zero(); n * dim];
    for row in values.chunks_mut(dim) {
        gen.next_into(row);
    }
    DesignMatrix::from_row_major(n, dim, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_after_skip() {
        let m = sobol_sequence::<f64>(1, 3, 1).unwrap();
        assert_eq!(m.as_slice(), &[0.5, 0.75, 0.25]);
    }

    #[test]
    fn origin_comes_first() {
        let m = sobol_sequence::<f64>(2, 1, 0).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0]);
    }

    // Reference values from an independent implementation using the same
    // Joe–Kuo table (unscrambled, Gray-code order).
    #[test]
    fn matches_reference_points_in_six_dimensions() {
        let expected = [
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25, 0.25, 0.75, 0.75],
            [0.25, 0.75, 0.75, 0.75, 0.25, 0.25],
            [0.375, 0.375, 0.625, 0.875, 0.375, 0.125],
            [0.875, 0.875, 0.125, 0.375, 0.875, 0.625],
            [0.625, 0.125, 0.875, 0.625, 0.625, 0.875],
            [0.125, 0.625, 0.375, 0.125, 0.125, 0.375],
        ];
        let m = sobol_sequence::<f64>(6, 8, 0).unwrap();
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(m.row(i), row, "row {i}");
        }
    }

    #[test]
    fn matches_reference_points_in_forty_dimensions() {
        let p63 = [
            0.015625, 0.796875, 0.359375, 0.453125, 0.859375, 0.140625, 0.578125, 0.140625,
            0.828125, 0.578125, 0.421875, 0.671875, 0.546875, 0.765625, 0.328125, 0.765625,
            0.078125, 0.390625, 0.953125, 0.234375, 0.234375, 0.546875, 0.390625, 0.546875,
            0.953125, 0.640625, 0.203125, 0.296875, 0.296875, 0.453125, 0.015625, 0.921875,
            0.828125, 0.515625, 0.953125, 0.953125, 0.859375, 0.203125, 0.921875, 0.171875,
        ];
        let p37 = [
            0.921875, 0.640625, 0.578125, 0.921875, 0.765625, 0.296875, 0.171875, 0.796875,
            0.609375, 0.171875, 0.015625, 0.078125, 0.578125, 0.859375, 0.109375, 0.484375,
            0.796875, 0.421875, 0.046875, 0.140625, 0.953125, 0.078125, 0.546875, 0.640625,
            0.296875, 0.359375, 0.796875, 0.390625, 0.515625, 0.109375, 0.359375, 0.140625,
            0.609375, 0.359375, 0.859375, 0.734375, 0.890625, 0.671875, 0.953125, 0.078125,
        ];
        let m = sobol_sequence::<f64>(40, 64, 0).unwrap();
        assert_eq!(m.row(63), &p63);
        assert_eq!(m.row(37), &p37);
        // seeking lands on the same state as stepping
        let skipped = sobol_sequence::<f64>(40, 1, 37).unwrap();
        assert_eq!(skipped.row(0), &p37);
    }

    #[test]
    fn deterministic() {
        let a = sobol_sequence::<f64>(5, 100, 3).unwrap();
        let b = sobol_sequence::<f64>(5, 100, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unsupported_dimension() {
        assert!(matches!(
            sobol_sequence::<f64>(MAX_DIM + 1, 4, 0),
            Err(Error::UnsupportedDimension { .. })
        ));
        assert!(sobol_sequence::<f64>(0, 4, 0).is_err());
    }

    #[test]
    fn dyadic_box_counts_are_exact_for_powers_of_two() {
        for dim in 1..=4 {
            let n = 1usize << 10;
            let m = sobol_sequence::<f64>(dim, n, 0).unwrap();
            let inside = (0..n).filter(|&i| m.row(i).iter().all(|&v| v < 0.5)).count();
            assert_eq!(inside, n >> dim, "dim {dim}");
        }
    }
}
