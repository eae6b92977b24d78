use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{Doe, Kernel, KernelParams, Standardization};
use crate::linalg::{dot, sq_dist, Cholesky, JitterPolicy, Matrix};
use crate::optim::{multistart_minimize, sobol_starts, NelderMeadOptions};
use crate::sampling::DesignMatrix;
use crate::scalar::Scalar;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Gaussian predictive distribution at one design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior<T> {
    pub mean: T,
    pub var: T,
}

impl<T: Scalar> Posterior<T> {
    pub fn std(&self) -> T {
        self.var.max(T::zero()).sqrt()
    }
}

/// Squared distances and exact-coincidence flags for every pair of rows.
/// Reused across the many likelihood evaluations of one fit.
pub(crate) struct Pairwise<T> {
    n: usize,
    sq: Vec<T>,
    same: Vec<bool>,
}

impl<T: Scalar> Pairwise<T> {
    pub(crate) fn new(rows: &[&[T]]) -> Self {
        let n = rows.len();
        let mut sq = vec![T::zero(); n * n];
        let mut same = vec![false; n * n];
        for i in 0..n {
            for j in 0..=i {
                let d = sq_dist(rows[i], rows[j]);
                let eq = rows[i] == rows[j];
                sq[i * n + j] = d;
                sq[j * n + i] = d;
                same[i * n + j] = eq;
                same[j * n + i] = eq;
            }
        }
        Self { n, sq, same }
    }

    #[inline]
    pub(crate) fn sq(&self, i: usize, j: usize) -> T {
        self.sq[i * self.n + j]
    }

    #[inline]
    pub(crate) fn same(&self, i: usize, j: usize) -> bool {
        self.same[i * self.n + j]
    }

    /// Gram matrix; `s²` enters on the diagonal and at exact duplicates.
    pub(crate) fn gram(&self, kernel: Kernel, p: &KernelParams<T>) -> Matrix<T> {
        let n = self.n;
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut v = p.amplitude * kernel.correlation(self.sq(i, j), p.length_scale);
                if self.same(i, j) {
                    v = v + p.noise_var;
                }
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        k
    }
}

/// `K_θ(X)`: symmetric, diagonal `c + s²`.
pub fn gram<T: Scalar>(x: &DesignMatrix<T>, kernel: Kernel, p: &KernelParams<T>) -> Matrix<T> {
    let rows: Vec<&[T]> = x.iter_rows().collect();
    Pairwise::new(&rows).gram(kernel, p)
}

/// `ln det K + yᵀ K⁻¹ y` through a jittered Cholesky factor.
pub(crate) fn nll_from_gram<T: Scalar>(k: &Matrix<T>, y: &[T], scale: T, policy: JitterPolicy) -> Result<T> {
    let ch = Cholesky::factor(k, scale, policy)?;
    let z = ch.solve_lower(y);
    Ok(ch.ln_det() + dot(&z, &z))
}

/// Negative log marginal likelihood (up to constants and a factor ½) of the
/// responses as stored in `doe`. [`fit_mle`] calls this on standardized data.
pub fn nll<T: Scalar>(p: &KernelParams<T>, doe: &Doe<T>, kernel: Kernel) -> Result<T> {
    nll_from_gram(&gram(&doe.x, kernel, p), &doe.y, p.amplitude, JitterPolicy::default())
}

/// Box for the hyperparameter search (natural units; searched in log space).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub amplitude: (f64, f64),
    pub length_scale: (f64, f64),
    pub noise_var: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            amplitude: (1e-3, 1e3),
            length_scale: (1e-3, 10.0),
            noise_var: (1e-8, 1.0),
        }
    }
}

impl ParamBounds {
    pub(crate) fn log_box<T: Scalar>(&self) -> (Vec<T>, Vec<T>) {
        let b = [self.amplitude, self.length_scale, self.noise_var];
        (
            b.iter().map(|r| T::lit(r.0.ln())).collect(),
            b.iter().map(|r| T::lit(r.1.ln())).collect(),
        )
    }

    /// Sub-box the multi-start points are drawn from: plausible values for
    /// standardized responses on the unit cube, clipped to the search box.
    pub(crate) fn log_start_box<T: Scalar>(&self) -> (Vec<T>, Vec<T>) {
        let clip = |r: (f64, f64), lo: f64, hi: f64| (r.0.max(lo).ln(), r.1.min(hi).ln());
        let b = [
            clip(self.amplitude, 0.1, 10.0),
            clip(self.length_scale, 0.02, 2.0),
            clip(self.noise_var, 1e-8, 1e-2),
        ];
        (
            b.iter().map(|r| T::lit(r.0)).collect(),
            b.iter().map(|r| T::lit(r.1.max(r.0))).collect(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions<T> {
    pub restarts: usize,
    pub seed: u64,
    pub bounds: ParamBounds,
    pub local: NelderMeadOptions,
    /// Extra start tried before the Sobol' starts (e.g. the previous fit).
    pub warm_start: Option<KernelParams<T>>,
    pub jitter: JitterPolicy,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            bounds: ParamBounds::default(),
            local: NelderMeadOptions {
                max_evals: 300,
                f_tol: 1e-9,
                x_tol: 1e-6,
                initial_step: 0.1,
            },
            warm_start: None,
            jitter: JitterPolicy::default(),
        }
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport<T> {
    pub params: KernelParams<T>,
    pub nll: T,
    /// Responses were constant; params were set, not fitted.
    pub degenerate: bool,
    pub failed_starts: usize,
}

pub(crate) fn unpack<T: Scalar>(theta: &[T]) -> KernelParams<T> {
    KernelParams::new(theta[0].exp(), theta[1].exp(), theta[2].exp())
}

pub(crate) fn pack<T: Scalar>(p: &KernelParams<T>) -> Vec<T> {
    vec![p.amplitude.ln(), p.length_scale.ln(), p.noise_var.ln()]
}

/// Multi-start minimization of [`nll`] over the log-space box, on the
/// standardized responses of `doe`.
///
/// Constant responses carry no signal: the fit is skipped and flagged, with
/// the amplitude at its lower bound.
pub fn fit_mle<T: Scalar>(doe: &Doe<T>, kernel: Kernel, opts: &FitOptions<T>) -> Result<FitReport<T>> {
    if doe.len() < 2 {
        return Err(Error::InsufficientData("fitting needs at least two designs".into()));
    }
    let (std_doe, stdz) = doe.standardized();
    if stdz.constant {
        let params = KernelParams::new(
            T::lit(opts.bounds.amplitude.0),
            T::one().min(T::lit(opts.bounds.length_scale.1)),
            T::lit(opts.bounds.noise_var.0),
        );
        let nll = nll(&params, &std_doe, kernel)?;
        return Ok(FitReport {
            params,
            nll,
            degenerate: true,
            failed_starts: 0,
        });
    }
    let rows: Vec<&[T]> = std_doe.x.iter_rows().collect();
    let pairs = Pairwise::new(&rows);
    let y = &std_doe.y;
    let objective = |theta: &[T]| -> Option<T> {
        let p = unpack(theta);
        nll_from_gram(&pairs.gram(kernel, &p), y, p.amplitude, opts.jitter).ok()
    };
    let (lower, upper) = opts.bounds.log_box::<T>();
    let (slo, shi) = opts.bounds.log_start_box::<T>();
    let mut starts = Vec::with_capacity(opts.restarts + 1);
    if let Some(w) = &opts.warm_start {
        starts.push(pack(w));
    }
    starts.extend(sobol_starts(opts.restarts, &slo, &shi, opts.seed));
    let failed_starts = starts.iter().filter(|s| objective(s).is_none()).count();
    let best = multistart_minimize(objective, &starts, &lower, &upper, opts.local)
        .filter(|r| r.value.is_finite())
        .ok_or(Error::FitFailed(starts.len()))?;
    Ok(FitReport {
        params: unpack(&best.x),
        nll: best.value,
        degenerate: false,
        failed_starts,
    })
}

/// Mean and (unclamped) variance of a zero-mean GP given the factor of the
/// Gram matrix, `α = K⁻¹y`, the cross-covariances `kx` and the prior `kxx`.
#[inline]
pub(crate) fn predict_core<T: Scalar>(ch: &Cholesky<T>, alpha: &[T], kx: &[T], kxx: T) -> (T, T) {
    let mean = dot(kx, alpha);
    let v = ch.solve_lower(kx);
    (mean, kxx - dot(&v, &v))
}

/// A fitted (or explicitly parameterized) GP ready for prediction.
#[derive(Clone, Debug)]
pub struct GaussianProcess<T> {
    kernel: Kernel,
    params: KernelParams<T>,
    x: DesignMatrix<T>,
    standardization: Standardization<T>,
    chol: Cholesky<T>,
    alpha: Vec<T>,
    fit: Option<FitReport<T>>,
}

impl<T: Scalar> GaussianProcess<T> {
    /// Fits hyperparameters by maximum likelihood, then conditions on `doe`.
    pub fn fit(doe: &Doe<T>, kernel: Kernel, opts: &FitOptions<T>) -> Result<Self> {
        let report = fit_mle(doe, kernel, opts)?;
        let mut gp = Self::with_params(doe, kernel, report.params)?;
        gp.fit = Some(report);
        Ok(gp)
    }

    /// Conditions on `doe` with fixed hyperparameters (responses standardized).
    pub fn with_params(doe: &Doe<T>, kernel: Kernel, params: KernelParams<T>) -> Result<Self> {
        let (std_doe, stdz) = doe.standardized();
        Self::condition(std_doe.x, &std_doe.y, stdz, kernel, params)
    }

    /// Conditions on `doe` exactly as given, without standardization.
    pub fn raw(doe: &Doe<T>, kernel: Kernel, params: KernelParams<T>) -> Result<Self> {
        Self::condition(doe.x.clone(), &doe.y, Standardization::identity(), kernel, params)
    }

    fn condition(
        x: DesignMatrix<T>,
        y: &[T],
        standardization: Standardization<T>,
        kernel: Kernel,
        params: KernelParams<T>,
    ) -> Result<Self> {
        if !params.is_valid() {
            return Err(Error::InvalidArgument(format!("invalid kernel parameters {params:?}")));
        }
        let k = gram(&x, kernel, &params);
        let chol = Cholesky::factor(&k, params.amplitude, JitterPolicy::default())?;
        let alpha = chol.solve(y);
        Ok(Self {
            kernel,
            params,
            x,
            standardization,
            chol,
            alpha,
            fit: None,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn params(&self) -> &KernelParams<T> {
        &self.params
    }

    pub fn standardization(&self) -> &Standardization<T> {
        &self.standardization
    }

    pub fn fit_report(&self) -> Option<&FitReport<T>> {
        self.fit.as_ref()
    }

    pub fn n_train(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Posterior of the latent function in standardized units, variance
    /// not clamped.
    pub fn predict_standardized(&self, x: &[T]) -> Posterior<T> {
        let kx: Vec<T> = self
            .x
            .iter_rows()
            .map(|r| self.kernel.signal(x, r, &self.params))
            .collect();
        let (mean, var) = predict_core(&self.chol, &self.alpha, &kx, self.params.amplitude);
        Posterior { mean, var }
    }

    /// Posterior in raw response units, variance clamped at zero.
    pub fn predict(&self, x: &[T]) -> Posterior<T> {
        let p = self.predict_standardized(x);
        Posterior {
            mean: self.standardization.invert(p.mean),
            var: self.standardization.invert_var(p.var.max(T::zero())),
        }
    }

    pub fn record(&self, training_data: Option<String>) -> ModelRecord<T> {
        ModelRecord {
            schema_version: MODEL_SCHEMA_VERSION,
            kernel: self.kernel,
            params: self.params,
            standardization: self.standardization,
            n_train: self.n_train(),
            training_data,
        }
    }
}

/// Serialized description of a fitted single-output model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord<T> {
    pub schema_version: u32,
    pub kernel: Kernel,
    pub params: KernelParams<T>,
    pub standardization: Standardization<T>,
    pub n_train: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_data: Option<String>,
}

/// One-shot posterior at `x` for a GP conditioned on `doe` with `p`.
pub fn posterior<T: Scalar>(x: &[T], doe: &Doe<T>, p: &KernelParams<T>, kernel: Kernel) -> Result<Posterior<T>> {
    Ok(GaussianProcess::with_params(doe, kernel, *p)?.predict(x))
}
