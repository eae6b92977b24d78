//! Multi-task Gaussian processes over `M` fidelity levels.
//!
//! The covariance between design `u` at fidelity `i` and design `v` at
//! fidelity `j` is `b_ij·κ(u, v)`, with `B = L·Lᵀ` positive semi-definite by
//! construction. The Gram matrix of the stacked designs is therefore the
//! Hadamard product of the blockwise kernel matrix with `B` expanded blockwise.
//!
//! Fidelities are numbered `1..=M`, lowest first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{
    fit_mle, nll_from_gram, predict_core, Doe, FitOptions, Kernel, KernelParams, Pairwise, Posterior,
    Standardization,
};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::optim::{multistart_minimize, sobol_starts};
use crate::scalar::Scalar;

/// Ordered per-fidelity designs of experiments, lowest fidelity first.
#[derive(Clone, Debug, PartialEq)]
pub struct MfDoe<T> {
    levels: Vec<Doe<T>>,
}

impl<T: Scalar> MfDoe<T> {
    /// `levels[0]` is fidelity 1. All levels must share the design dimension.
    /// A single level is accepted; the model then reduces to a plain GP.
    pub fn new(levels: Vec<Doe<T>>) -> Result<Self> {
        let Some(first) = levels.first() else {
            return Err(Error::InvalidArgument("multi-fidelity DoE needs at least one level".into()));
        };
        let d = first.dim();
        if let Some(bad) = levels.iter().find(|l| l.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.dim() });
        }
        Ok(Self { levels })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].dim()
    }

    /// Data at fidelity `m` (1-based).
    pub fn level(&self, m: usize) -> &Doe<T> {
        &self.levels[m - 1]
    }

    pub fn levels(&self) -> &[Doe<T>] {
        &self.levels
    }

    pub fn counts(&self) -> Vec<usize> {
        self.levels.iter().map(Doe::len).collect()
    }

    pub fn total_len(&self) -> usize {
        self.levels.iter().map(Doe::len).sum()
    }

    /// Appends one observation to fidelity `m` only.
    pub fn push(&mut self, m: usize, x: &[T], y: T) -> Result<()> {
        if m == 0 || m > self.n_levels() {
            return Err(Error::InvalidArgument(format!("fidelity {m} out of range")));
        }
        self.levels[m - 1].push(x, y)
    }

    /// Standardization pooled over all fidelities.
    pub fn pooled_standardization(&self) -> Standardization<T> {
        let y: Vec<T> = self.levels.iter().flat_map(|l| l.y.iter().copied()).collect();
        Standardization::fit(&y)
    }

    fn stacked(&self) -> (Vec<&[T]>, Vec<usize>, Vec<T>) {
        let mut rows = Vec::with_capacity(self.total_len());
        let mut tasks = Vec::with_capacity(self.total_len());
        let mut y = Vec::with_capacity(self.total_len());
        for (t, l) in self.levels.iter().enumerate() {
            rows.extend(l.x.iter_rows());
            tasks.extend(std::iter::repeat(t).take(l.len()));
            y.extend(l.y.iter().copied());
        }
        (rows, tasks, y)
    }
}

/// Lower-triangular factor `L` of the task covariance `B = L·Lᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskCovariance<T> {
    factor: Vec<Vec<T>>,
}

impl<T: Scalar> TaskCovariance<T> {
    pub fn identity(m: usize) -> Self {
        Self {
            factor: (0..m)
                .map(|i| (0..=i).map(|j| if i == j { T::one() } else { T::zero() }).collect())
                .collect(),
        }
    }

    /// `rows[i]` holds `L_i0..=L_ii`; the diagonal must be positive.
    pub fn from_factor(rows: Vec<Vec<T>>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != i + 1 {
                return Err(Error::InvalidArgument("task factor must be lower triangular".into()));
            }
            if !(r[i] > T::zero()) {
                return Err(Error::InvalidArgument("task factor diagonal must be positive".into()));
            }
        }
        Ok(Self { factor: rows })
    }

    pub fn n_tasks(&self) -> usize {
        self.factor.len()
    }

    pub fn factor(&self) -> &[Vec<T>] {
        &self.factor
    }

    /// `b_ij` for 0-based task indices.
    pub fn b(&self, i: usize, j: usize) -> T {
        let k = i.min(j) + 1;
        dot(&self.factor[i][..k], &self.factor[j][..k])
    }

    pub fn matrix(&self) -> Matrix<T> {
        let m = self.n_tasks();
        Matrix::from_fn(m, m, |i, j| self.b(i, j))
    }

    /// `b_ij / √(b_ii·b_jj)` for 1-based fidelities.
    pub fn correlation(&self, i: usize, j: usize) -> T {
        let (i, j) = (i - 1, j - 1);
        self.b(i, j) / (self.b(i, i) * self.b(j, j)).sqrt()
    }
}

/// Shared or per-fidelity observation noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    #[default]
    Shared,
    PerFidelity,
}

/// Base-kernel parameters, task covariance and optional per-fidelity noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtParams<T> {
    pub base: KernelParams<T>,
    pub task: TaskCovariance<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<T>>,
}

impl<T: Scalar> MtParams<T> {
    pub fn new(base: KernelParams<T>, task: TaskCovariance<T>) -> Self {
        Self { base, task, noise: None }
    }

    /// `s²` used on the diagonal of fidelity `t` (0-based).
    #[inline]
    fn noise_for(&self, t: usize) -> T {
        self.noise.as_ref().map_or(self.base.noise_var, |v| v[t])
    }

    fn scale(&self) -> T {
        let m = self.task.n_tasks();
        (0..m)
            .map(|t| self.task.b(t, t))
            .fold(T::zero(), T::max)
            * self.base.amplitude
    }
}

/// `b_ij·κ(u, v)`; `s²` enters only for `i = j` and `u = v`. Fidelities are 1-based.
pub fn mt_kernel<T: Scalar>(u: &[T], i: usize, v: &[T], j: usize, kernel: Kernel, p: &MtParams<T>) -> T {
    let k = p.task.b(i - 1, j - 1) * kernel.signal(u, v, &p.base);
    if i == j && u == v {
        k + p.noise_for(i - 1)
    } else {
        k
    }
}

fn block_gram_from<T: Scalar>(pairs: &Pairwise<T>, tasks: &[usize], kernel: Kernel, p: &MtParams<T>) -> Matrix<T> {
    let n = tasks.len();
    let m = p.task.n_tasks();
    let b: Vec<T> = (0..m * m).map(|k| p.task.b(k / m, k % m)).collect();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (ti, tj) = (tasks[i], tasks[j]);
            let mut v = b[ti * m + tj] * (p.base.amplitude * kernel.correlation(pairs.sq(i, j), p.base.length_scale));
            if ti == tj && pairs.same(i, j) {
                v = v + p.noise_for(ti);
            }
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

/// Gram matrix of the stacked designs: block `(i, j)` is `b_ij·K(X_i, X_j)`.
pub fn block_gram<T: Scalar>(mfdoe: &MfDoe<T>, kernel: Kernel, p: &MtParams<T>) -> Result<Matrix<T>> {
    check_tasks(mfdoe, p)?;
    let (rows, tasks, _) = mfdoe.stacked();
    Ok(block_gram_from(&Pairwise::new(&rows), &tasks, kernel, p))
}

fn check_tasks<T: Scalar>(mfdoe: &MfDoe<T>, p: &MtParams<T>) -> Result<()> {
    if p.task.n_tasks() != mfdoe.n_levels() {
        return Err(Error::DimensionMismatch {
            expected: mfdoe.n_levels(),
            got: p.task.n_tasks(),
        });
    }
    if let Some(noise) = &p.noise {
        if noise.len() != mfdoe.n_levels() {
            return Err(Error::DimensionMismatch {
                expected: mfdoe.n_levels(),
                got: noise.len(),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct MtFitOptions<T> {
    /// Restarts, seed, search box, local-search and jitter settings.
    pub base: FitOptions<T>,
    pub noise: NoiseMode,
    pub warm_start: Option<MtParams<T>>,
}

impl<T: Scalar> Default for MtFitOptions<T> {
    fn default() -> Self {
        let mut base = FitOptions::default();
        base.local.max_evals = 600;
        Self {
            base,
            noise: NoiseMode::Shared,
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtFitReport<T> {
    pub params: MtParams<T>,
    pub nll: T,
    pub degenerate: bool,
}

/// Layout of the log-space parameter vector for `M ≥ 2`:
/// `[ln λ, ln s² (1 or M entries), ln L_ii (M entries), L_ij for i > j]`.
/// The base amplitude is fixed at 1 since `B` already carries the scale.
struct Layout {
    m: usize,
    n_noise: usize,
}

impl Layout {
    fn unpack<T: Scalar>(&self, theta: &[T]) -> MtParams<T> {
        let noise: Vec<T> = theta[1..1 + self.n_noise].iter().map(|v| v.exp()).collect();
        let diag = &theta[1 + self.n_noise..1 + self.n_noise + self.m];
        let mut off = theta[1 + self.n_noise + self.m..].iter();
        let factor = (0..self.m)
            .map(|i| {
                let mut row: Vec<T> = (0..i).map(|_| *off.next().expect("layout length")).collect();
                row.push(diag[i].exp());
                row
            })
            .collect();
        MtParams {
            base: KernelParams::new(T::one(), theta[0].exp(), noise[0]),
            task: TaskCovariance { factor },
            noise: (self.n_noise > 1).then_some(noise),
        }
    }

    fn pack<T: Scalar>(&self, p: &MtParams<T>) -> Vec<T> {
        // fold the amplitude into B so a warm start keeps its covariance
        let s = p.base.amplitude.sqrt();
        let mut theta = vec![p.base.length_scale.ln()];
        if self.n_noise == 1 {
            theta.push(p.base.noise_var.ln());
        } else {
            theta.extend((0..self.m).map(|t| p.noise_for(t).ln()));
        }
        theta.extend((0..self.m).map(|i| (p.task.factor[i][i] * s).ln()));
        for i in 0..self.m {
            theta.extend(p.task.factor[i][..i].iter().map(|&v| v * s));
        }
        theta
    }

    fn boxes<T: Scalar>(&self, opts: &FitOptions<T>) -> ((Vec<T>, Vec<T>), (Vec<T>, Vec<T>)) {
        let (glo, ghi) = opts.bounds.log_box::<T>();
        let (slo, shi) = opts.bounds.log_start_box::<T>();
        let half = T::lit(0.5);
        let amp_lo = glo[0] * half;
        let amp_hi = ghi[0] * half;
        let off = T::lit(opts.bounds.amplitude.1.sqrt());
        let mut lower = vec![glo[1]];
        let mut upper = vec![ghi[1]];
        let mut s_lower = vec![slo[1]];
        let mut s_upper = vec![shi[1]];
        for _ in 0..self.n_noise {
            lower.push(glo[2]);
            upper.push(ghi[2]);
            s_lower.push(slo[2]);
            s_upper.push(shi[2]);
        }
        for _ in 0..self.m {
            lower.push(amp_lo);
            upper.push(amp_hi);
            s_lower.push(T::lit(0.3f64.ln()));
            s_upper.push(T::lit(1.5f64.ln()));
        }
        for _ in 0..self.m * (self.m - 1) / 2 {
            lower.push(-off);
            upper.push(off);
            s_lower.push(-T::one());
            s_upper.push(T::one());
        }
        ((lower, upper), (s_lower, s_upper))
    }
}

/// Joint maximum-likelihood fit of the base kernel and the task factor `L`
/// on pooled-standardized responses.
///
/// With a single fidelity `B` is fixed to `[1]` and the fit is exactly
/// [`fit_mle`] on that level.
pub fn mf_fit_mle<T: Scalar>(mfdoe: &MfDoe<T>, kernel: Kernel, opts: &MtFitOptions<T>) -> Result<MtFitReport<T>> {
    let m = mfdoe.n_levels();
    if m == 1 {
        let mut base = opts.base.clone();
        base.warm_start = opts.warm_start.as_ref().map(|w| w.base);
        let r = fit_mle(mfdoe.level(1), kernel, &base)?;
        return Ok(MtFitReport {
            params: MtParams::new(r.params, TaskCovariance::identity(1)),
            nll: r.nll,
            degenerate: r.degenerate,
        });
    }
    if mfdoe.levels.iter().any(Doe::is_empty) || mfdoe.total_len() < 3 {
        return Err(Error::InsufficientData(
            "multi-task fitting needs every fidelity populated and at least three designs".into(),
        ));
    }
    let stdz = mfdoe.pooled_standardization();
    let (rows, tasks, y_raw) = mfdoe.stacked();
    let y: Vec<T> = y_raw.iter().map(|&v| stdz.apply(v)).collect();
    let pairs = Pairwise::new(&rows);
    let layout = Layout {
        m,
        n_noise: match opts.noise {
            NoiseMode::Shared => 1,
            NoiseMode::PerFidelity => m,
        },
    };
    let ((lower, upper), (slo, shi)) = layout.boxes(&opts.base);
    if stdz.constant {
        let mut theta: Vec<T> = lower.iter().zip(&upper).map(|(&l, &u)| (l + u) * T::lit(0.5)).collect();
        // smallest amplitude, smallest noise, unit length scale
        theta[0] = T::zero().max(lower[0]).min(upper[0]);
        for k in 1..1 + layout.n_noise + m {
            theta[k] = lower[k];
        }
        let params = layout.unpack(&theta);
        let k = block_gram_from(&pairs, &tasks, kernel, &params);
        let nll = nll_from_gram(&k, &y, params.scale(), opts.base.jitter)?;
        return Ok(MtFitReport { params, nll, degenerate: true });
    }
    let objective = |theta: &[T]| -> Option<T> {
        let p = layout.unpack(theta);
        let k = block_gram_from(&pairs, &tasks, kernel, &p);
        nll_from_gram(&k, &y, p.scale(), opts.base.jitter).ok()
    };
    let mut starts = Vec::with_capacity(opts.base.restarts + 1);
    if let Some(w) = &opts.warm_start {
        if w.task.n_tasks() == m {
            let mut s = layout.pack(w);
            for ((v, &lo), &hi) in s.iter_mut().zip(&lower).zip(&upper) {
                *v = v.max(lo).min(hi);
            }
            starts.push(s);
        }
    }
    starts.extend(sobol_starts(opts.base.restarts, &slo, &shi, opts.base.seed));
    let best = multistart_minimize(objective, &starts, &lower, &upper, opts.base.local)
        .filter(|r| r.value.is_finite())
        .ok_or(Error::FitFailed(starts.len()))?;
    Ok(MtFitReport {
        params: layout.unpack(&best.x),
        nll: best.value,
        degenerate: false,
    })
}

/// Joint predictive distribution over all fidelities at one design.
#[derive(Clone, Debug, PartialEq)]
pub struct MfPosterior<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

impl<T: Scalar> MfPosterior<T> {
    /// Marginal at fidelity `m` (1-based), variance clamped at zero.
    pub fn at(&self, m: usize) -> Posterior<T> {
        Posterior {
            mean: self.mean[m - 1],
            var: self.cov.get(m - 1, m - 1).max(T::zero()),
        }
    }
}

/// A multi-task GP conditioned on a multi-fidelity DoE.
#[derive(Clone, Debug)]
pub struct MultiTaskGp<T> {
    kernel: Kernel,
    params: MtParams<T>,
    rows: Vec<Vec<T>>,
    tasks: Vec<usize>,
    standardization: Standardization<T>,
    chol: Cholesky<T>,
    alpha: Vec<T>,
    fit: Option<MtFitReport<T>>,
}

impl<T: Scalar> MultiTaskGp<T> {
    pub fn fit(mfdoe: &MfDoe<T>, kernel: Kernel, opts: &MtFitOptions<T>) -> Result<Self> {
        let report = mf_fit_mle(mfdoe, kernel, opts)?;
        let mut gp = Self::with_params(mfdoe, kernel, report.params.clone())?;
        gp.fit = Some(report);
        Ok(gp)
    }

    pub fn with_params(mfdoe: &MfDoe<T>, kernel: Kernel, params: MtParams<T>) -> Result<Self> {
        check_tasks(mfdoe, &params)?;
        if !params.base.is_valid() {
            return Err(Error::InvalidArgument(format!("invalid kernel parameters {:?}", params.base)));
        }
        let stdz = mfdoe.pooled_standardization();
        let (rows, tasks, y_raw) = mfdoe.stacked();
        let y: Vec<T> = y_raw.iter().map(|&v| stdz.apply(v)).collect();
        let pairs = Pairwise::new(&rows);
        let k = block_gram_from(&pairs, &tasks, kernel, &params);
        let chol = Cholesky::factor(&k, params.scale(), crate::linalg::JitterPolicy::default())?;
        let alpha = chol.solve(&y);
        Ok(Self {
            kernel,
            params,
            rows: rows.iter().map(|r| r.to_vec()).collect(),
            tasks,
            standardization: stdz,
            chol,
            alpha,
            fit: None,
        })
    }

    pub fn params(&self) -> &MtParams<T> {
        &self.params
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn n_levels(&self) -> usize {
        self.params.task.n_tasks()
    }

    pub fn standardization(&self) -> &Standardization<T> {
        &self.standardization
    }

    pub fn fit_report(&self) -> Option<&MtFitReport<T>> {
        self.fit.as_ref()
    }

    fn signals(&self, x: &[T]) -> Vec<T> {
        self.rows.iter().map(|r| self.kernel.signal(x, r, &self.params.base)).collect()
    }

    fn cross(&self, signals: &[T], m0: usize) -> Vec<T> {
        signals
            .iter()
            .zip(&self.tasks)
            .map(|(&s, &t)| self.params.task.b(t, m0) * s)
            .collect()
    }

    /// Marginal posterior at fidelity `m` (1-based) in raw units.
    pub fn predict_level(&self, x: &[T], m: usize) -> Posterior<T> {
        let m0 = m - 1;
        let kx = self.cross(&self.signals(x), m0);
        let kxx = self.params.task.b(m0, m0) * self.params.base.amplitude;
        let (mean, var) = predict_core(&self.chol, &self.alpha, &kx, kxx);
        Posterior {
            mean: self.standardization.invert(mean),
            var: self.standardization.invert_var(var.max(T::zero())),
        }
    }

    /// Posterior mean vector and covariance over all fidelities, raw units.
    pub fn predict(&self, x: &[T]) -> MfPosterior<T> {
        let m = self.n_levels();
        let s = self.signals(x);
        let mut mean = Vec::with_capacity(m);
        let mut v = Vec::with_capacity(m);
        for t in 0..m {
            let kx = self.cross(&s, t);
            mean.push(self.standardization.invert(dot(&kx, &self.alpha)));
            v.push(self.chol.solve_lower(&kx));
        }
        let c = self.params.base.amplitude;
        let mut cov = Matrix::from_fn(m, m, |i, j| {
            let raw = self.params.task.b(i, j) * c - dot(&v[i], &v[j]);
            self.standardization.invert_var(raw)
        });
        for i in 0..m {
            let d = cov.get(i, i).max(T::zero());
            cov.set(i, i, d);
        }
        MfPosterior { mean, cov }
    }

    pub fn record(&self, training_data: Option<Vec<String>>) -> MtModelRecord<T> {
        MtModelRecord {
            schema_version: crate::gp::MODEL_SCHEMA_VERSION,
            n_levels: self.n_levels(),
            kernel: self.kernel,
            params: self.params.clone(),
            standardization: self.standardization,
            counts: (0..self.n_levels())
                .map(|t| self.tasks.iter().filter(|&&k| k == t).count())
                .collect(),
            training_data,
        }
    }
}

/// Serialized description of a fitted multi-task model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtModelRecord<T> {
    pub schema_version: u32,
    pub n_levels: usize,
    pub kernel: Kernel,
    pub params: MtParams<T>,
    pub standardization: Standardization<T>,
    pub counts: Vec<usize>,
    /// One data reference per fidelity, lowest first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_data: Option<Vec<String>>,
}

/// One-shot joint posterior at `x`.
pub fn mf_posterior<T: Scalar>(x: &[T], mfdoe: &MfDoe<T>, kernel: Kernel, params: &MtParams<T>) -> Result<MfPosterior<T>> {
    Ok(MultiTaskGp::with_params(mfdoe, kernel, params.clone())?.predict(x))
}
