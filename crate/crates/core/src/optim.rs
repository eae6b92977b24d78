//! Derivative-free local search on a box: bounded Nelder–Mead and a
//! multi-start driver seeded from shifted Sobol' points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sampling::SobolGenerator;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once the simplex's function spread falls below this value.
    pub f_tol: f64,
    /// ... and its largest vertex distance along any axis below this value.
    pub x_tol: f64,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 400,
            f_tol: 1e-10,
            x_tol: 1e-8,
            initial_step: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evals: usize,
}

fn clamp_into<T: Scalar>(x: &mut [T], lower: &[T], upper: &[T]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.max(lo).min(hi);
    }
}

/// Minimizes `f` inside `[lower, upper]` starting from `start`.
///
/// Trial points are projected onto the box. `f` may return `None` for points
/// where it cannot be evaluated; those count as `+∞`. The returned value is
/// never worse than `f(start)`.
pub fn nelder_mead<T: Scalar>(
    mut f: impl FnMut(&[T]) -> Option<T>,
    start: &[T],
    lower: &[T],
    upper: &[T],
    opts: NelderMeadOptions,
) -> LocalResult<T> {
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[T], evals: &mut usize| -> T {
        *evals += 1;
        match f(x) {
            Some(v) if v.is_finite() => v,
            _ => T::infinity(),
        }
    };

    let mut x0 = start.to_vec();
    clamp_into(&mut x0, lower, upper);
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let mut xi = x0.clone();
        let step = (upper[i] - lower[i]) * T::lit(opts.initial_step);
        xi[i] = if xi[i] + step <= upper[i] { xi[i] + step } else { xi[i] - step };
        clamp_into(&mut xi, lower, upper);
        let fi = eval(&xi, &mut evals);
        simplex.push((xi, fi));
    }

    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let order = |s: &mut Vec<(Vec<T>, T)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    order(&mut simplex);

    while evals < opts.max_evals {
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = if worst.is_finite() { (worst - best).abs() } else { T::infinity() };
        let size = (1..=n)
            .flat_map(|k| {
                let s0 = &simplex[0].0;
                simplex[k].0.iter().zip(s0).map(|(a, b)| (*a - *b).abs())
            })
            .fold(T::zero(), T::max);
        if spread <= T::lit(opts.f_tol) && size <= T::lit(opts.x_tol) {
            break;
        }

        let mut centroid = vec![T::zero(); n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c = *c + *v;
            }
        }
        let nt = T::from_usize_lossy(n);
        centroid.iter_mut().for_each(|c| *c = *c / nt);

        let along = |coef: T, from: &[T]| -> Vec<T> {
            let mut p: Vec<T> = centroid
                .iter()
                .zip(from)
                .map(|(&c, &w)| c + coef * (c - w))
                .collect();
            clamp_into(&mut p, lower, upper);
            p
        };

        let worst_x = simplex[n].0.clone();
        let xr = along(alpha, &worst_x);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(gamma, &worst_x);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(rho, &worst_x);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-rho, &worst_x);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for k in 1..=n {
                    let mut xs: Vec<T> = x_best
                        .iter()
                        .zip(&simplex[k].0)
                        .map(|(&b, &v)| b + sigma * (v - b))
                        .collect();
                    clamp_into(&mut xs, lower, upper);
                    let fs = eval(&xs, &mut evals);
                    simplex[k] = (xs, fs);
                }
            }
        }
        order(&mut simplex);
    }

    let (x, value) = simplex.swap_remove(0);
    LocalResult { x, value, evals }
}

/// `count` start points in the box: Sobol' points under a seeded
/// Cranley–Patterson shift, so different seeds give different but still
/// well-spread starts.
pub fn sobol_starts<T: Scalar>(count: usize, lower: &[T], upper: &[T], seed: u64) -> Vec<Vec<T>> {
    let dim = lower.len();
    if count == 0 || dim == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let mut gen = SobolGenerator::new(dim).expect("start dimension within the Sobol' table");
    let mut u = vec![0.0f64; dim];
    (0..count)
        .map(|_| {
            gen.next_into(&mut u);
            u.iter()
                .zip(&shift)
                .enumerate()
                .map(|(k, (&v, &s))| {
                    let w = (v + s).fract();
                    lower[k] + (upper[k] - lower[k]) * T::lit(w)
                })
                .collect()
        })
        .collect()
}

/// Runs [`nelder_mead`] from every start and keeps the best result; ties go
/// to the earliest start. Returns `None` only when `starts` is empty.
pub fn multistart_minimize<T: Scalar>(
    mut f: impl FnMut(&[T]) -> Option<T>,
    starts: &[Vec<T>],
    lower: &[T],
    upper: &[T],
    opts: NelderMeadOptions,
) -> Option<LocalResult<T>> {
    let mut best: Option<LocalResult<T>> = None;
    for s in starts {
        let r = nelder_mead(&mut f, s, lower, upper, opts);
        if best.as_ref().map_or(true, |b| r.value < b.value) {
            best = Some(r);
        }
    }
    best
}
