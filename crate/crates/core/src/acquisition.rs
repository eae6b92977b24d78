//! Acquisition functions and their maximization over `[0,1]^D` (and the
//! fidelity set).
//!
//! Maximization is canonical: every score is "larger is better". For a
//! minimization context the sign of the mean is flipped before scoring.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gp::Posterior;
use crate::mtgp::{MfDoe, MfPosterior, MultiTaskGp};
use crate::optim::{nelder_mead, sobol_starts, NelderMeadOptions};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Maximize,
    Minimize,
}

impl Sense {
    /// Maps a raw value into the canonical (maximized) orientation and back.
    pub fn canonical<T: Scalar>(self, v: T) -> T {
        match self {
            Sense::Maximize => v,
            Sense::Minimize => -v,
        }
    }

    /// True when `a` is strictly better than `b`.
    pub fn better<T: Scalar>(self, a: T, b: T) -> bool {
        self.canonical(a) > self.canonical(b)
    }
}

/// UCB weights `ω₁` (mean) and `ω₂` (spread) for one fidelity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcbWeights<T> {
    pub mean: T,
    pub spread: T,
}

impl<T: Scalar> UcbWeights<T> {
    pub fn new(mean: T, spread: T) -> Self {
        Self { mean, spread }
    }

    /// `ω₂ = cv/(1+cv)`, `ω₁ = 1 − ω₂`.
    pub fn from_cv(cv: T) -> Self {
        let spread = cv / (T::one() + cv);
        Self { mean: T::one() - spread, spread }
    }
}

/// Everything an acquisition needs besides the posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionContext<T> {
    /// Best observed value at the highest fidelity, in raw units.
    pub y_best: T,
    pub sense: Sense,
    pub beta: T,
    /// `CR(m)` for `m = 1..=M`; the last entry is 1.
    pub cost_ratios: Vec<T>,
    /// `ρ(m)` for `m = 1..=M`; the last entry is 1.
    pub rho: Vec<T>,
    /// Per-fidelity UCB weights.
    pub ucb_weights: Vec<UcbWeights<T>>,
}

impl<T: Scalar> AcquisitionContext<T> {
    /// Single-fidelity context.
    pub fn single(y_best: T, sense: Sense, beta: T) -> Self {
        Self {
            y_best,
            sense,
            beta,
            cost_ratios: vec![T::one()],
            rho: vec![T::one()],
            ucb_weights: vec![UcbWeights::new(T::one(), beta)],
        }
    }

    pub fn multi(y_best: T, sense: Sense, beta: T, cost_ratios: Vec<T>, rho: Vec<T>) -> Result<Self> {
        let m = cost_ratios.len();
        if m == 0 || rho.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: rho.len() });
        }
        if cost_ratios[m - 1] != T::one() || rho[m - 1] != T::one() {
            return Err(Error::InvalidArgument("CR(M) and ρ(M) must equal 1".into()));
        }
        if cost_ratios.iter().any(|&c| !(c > T::zero() && c <= T::one())) {
            return Err(Error::InvalidArgument("cost ratios must lie in (0, 1]".into()));
        }
        if !(beta >= T::zero()) {
            return Err(Error::InvalidArgument("β must be non-negative".into()));
        }
        Ok(Self {
            y_best,
            sense,
            beta,
            cost_ratios,
            rho,
            ucb_weights: vec![UcbWeights::new(T::one(), beta); m],
        })
    }

    pub fn n_levels(&self) -> usize {
        self.cost_ratios.len()
    }

    fn z_parts(&self, p: &Posterior<T>) -> (T, T) {
        // improvement numerator in canonical orientation, and σ
        let diff = self.sense.canonical(p.mean) - self.sense.canonical(self.y_best);
        (diff, p.std())
    }
}

/// Standard normal density.
pub fn norm_pdf<T: Scalar>(z: T) -> T {
    (-(z * z) * T::lit(0.5)).exp() / T::lit((2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal distribution function, accurate in both tails.
pub fn norm_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5 * erfc(-z.as_f64() / std::f64::consts::SQRT_2))
}

/// `EI = σ·(z·Φ(z) + φ(z))`, or `max(0, μ − y_best)` when `σ = 0`.
pub fn ei<T: Scalar>(p: &Posterior<T>, ctx: &AcquisitionContext<T>) -> T {
    let (diff, sigma) = ctx.z_parts(p);
    if !(sigma > T::zero()) {
        return diff.max(T::zero());
    }
    let z = diff / sigma;
    (sigma * (z * norm_cdf(z) + norm_pdf(z))).max(T::zero())
}

/// `ln h(z)` with `h(z) = z·Φ(z) + φ(z)`, stable for all `z`.
pub fn log_h(z: f64) -> f64 {
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
    if z >= -1.0 {
        let h = z * 0.5 * erfc(-z / std::f64::consts::SQRT_2) + (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        return h.ln();
    }
    // h(z) = φ(z)·(1 + z·Φ(z)/φ(z))
    let tail = if z >= -25.0 {
        let t = -z / std::f64::consts::SQRT_2;
        let erfcx = (t * t).exp() * erfc(t);
        let mills = (std::f64::consts::PI / 2.0).sqrt() * erfcx;
        (1.0 + z * mills).ln()
    } else {
        let w = 1.0 / (z * z);
        let series = w * (1.0 - w * (3.0 - w * (15.0 - w * (105.0 - w * 945.0))));
        series.ln()
    };
    -0.5 * z * z - HALF_LN_2PI + tail
}

/// Numerically stable `ln EI`; `−∞` exactly when EI is zero.
pub fn log_ei<T: Scalar>(p: &Posterior<T>, ctx: &AcquisitionContext<T>) -> T {
    let (diff, sigma) = ctx.z_parts(p);
    if !(sigma > T::zero()) {
        return if diff > T::zero() { diff.ln() } else { T::neg_infinity() };
    }
    let z = diff / sigma;
    sigma.ln() + T::lit(log_h(z.as_f64()))
}

/// `μ + β·σ` in canonical orientation.
pub fn ucb<T: Scalar>(p: &Posterior<T>, ctx: &AcquisitionContext<T>) -> T {
    ctx.sense.canonical(p.mean) + ctx.beta * p.std()
}

/// `ln EI_m + ln CR(m) + ln ρ(m)` against the highest-fidelity incumbent;
/// `−∞` when `ρ(m) ≤ 0`. At `m = M` this is exactly [`log_ei`].
pub fn vf_log_ei<T: Scalar>(post: &MfPosterior<T>, m: usize, ctx: &AcquisitionContext<T>) -> T {
    vf_log_ei_at(&post.at(m), m, ctx)
}

/// [`vf_log_ei`] on an already extracted marginal at fidelity `m`.
pub fn vf_log_ei_at<T: Scalar>(p: &Posterior<T>, m: usize, ctx: &AcquisitionContext<T>) -> T {
    let base = log_ei(p, ctx);
    if m == ctx.n_levels() {
        return base;
    }
    let rho = ctx.rho[m - 1];
    if !(rho > T::zero()) {
        return T::neg_infinity();
    }
    base + ctx.cost_ratios[m - 1].ln() + rho.ln()
}

/// `ω₁·μ_m + ω₂·σ_m·CR(m)` in canonical orientation.
pub fn vf_ucb<T: Scalar>(post: &MfPosterior<T>, m: usize, ctx: &AcquisitionContext<T>) -> T {
    vf_ucb_at(&post.at(m), m, ctx)
}

pub fn vf_ucb_at<T: Scalar>(p: &Posterior<T>, m: usize, ctx: &AcquisitionContext<T>) -> T {
    let w = ctx.ucb_weights[m - 1];
    w.mean * ctx.sense.canonical(p.mean) + w.spread * p.std() * ctx.cost_ratios[m - 1]
}

/// Mean coefficient of variation `σ_m/|μ_m|` (each term clipped to
/// `[0, 10]`) over `probes` Sobol' points, for every fidelity.
pub fn coefficient_of_variation<T: Scalar>(model: &MultiTaskGp<T>, dim: usize, probes: usize, seed: u64) -> Vec<T> {
    let lo = vec![T::zero(); dim];
    let hi = vec![T::one(); dim];
    let pts = sobol_starts(probes.max(1), &lo, &hi, seed);
    (1..=model.n_levels())
        .map(|m| {
            let total: T = pts
                .iter()
                .map(|x| {
                    let p = model.predict_level(x, m);
                    let cv = p.std() / p.mean.abs();
                    if cv.is_nan() {
                        T::lit(10.0)
                    } else {
                        cv.max(T::zero()).min(T::lit(10.0))
                    }
                })
                .sum();
            total / T::from_usize_lossy(pts.len())
        })
        .collect()
}

/// Pearson correlation coefficient of two equally long samples.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a.len() < 3 {
        return Err(Error::InsufficientData("correlation needs at least three pairs".into()));
    }
    let n = T::from_usize_lossy(a.len());
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        sab = sab + (x - ma) * (y - mb);
        saa = saa + (x - ma) * (x - ma);
        sbb = sbb + (y - mb) * (y - mb);
    }
    if !(saa > T::zero() && sbb > T::zero()) {
        return Err(Error::DegenerateObjective);
    }
    Ok((sab / (saa * sbb).sqrt()).max(-T::one()).min(T::one()))
}

/// Response pairs `(y_m, y_M)` at designs evaluated at both fidelities.
/// Each fidelity-`m` design is matched with its first exact copy at `M`.
pub fn coincident_pairs<T: Scalar>(mfdoe: &MfDoe<T>, m: usize) -> (Vec<T>, Vec<T>) {
    let top = mfdoe.level(mfdoe.n_levels());
    let low = mfdoe.level(m);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, x) in low.x.iter_rows().enumerate() {
        if let Some(j) = top.x.iter_rows().position(|r| r == x) {
            a.push(low.y[i]);
            b.push(top.y[j]);
        }
    }
    (a, b)
}

/// Pearson correlation between the lowest and the highest fidelity on
/// coincident designs.
pub fn estimate_rho<T: Scalar>(mfdoe: &MfDoe<T>) -> Result<T> {
    estimate_rho_at(mfdoe, 1)
}

/// Pearson correlation between fidelity `m` and the highest fidelity.
pub fn estimate_rho_at<T: Scalar>(mfdoe: &MfDoe<T>, m: usize) -> Result<T> {
    if m == mfdoe.n_levels() {
        return Ok(T::one());
    }
    let (a, b) = coincident_pairs(mfdoe, m);
    if a.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} coincident designs between fidelity {m} and the highest fidelity; need 3",
            a.len()
        )));
    }
    pearson(&a, &b)
}

#[derive(Clone, Copy, Debug)]
pub struct MaximizeOptions {
    /// Local searches per fidelity.
    pub starts: usize,
    /// Sobol' points screened to pick the starts (at least `starts`).
    pub screen: usize,
    pub seed: u64,
    pub local: NelderMeadOptions,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            starts: 32,
            screen: 256,
            seed: 0,
            local: NelderMeadOptions {
                max_evals: 200,
                f_tol: 1e-12,
                x_tol: 1e-7,
                initial_step: 0.05,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate<T> {
    pub x: Vec<T>,
    pub value: T,
}

/// Multi-start maximization of `acq` over `[0,1]^dim`.
///
/// `screen` shifted Sobol' points are scored; the best `starts` of them seed
/// bounded Nelder–Mead searches. The result is never worse than any start.
/// Ties go to the earliest start.
pub fn maximize<T: Scalar>(acq: impl Fn(&[T]) -> T, dim: usize, opts: &MaximizeOptions) -> Candidate<T> {
    let lo = vec![T::zero(); dim];
    let hi = vec![T::one(); dim];
    let pool = sobol_starts(opts.screen.max(opts.starts).max(1), &lo, &hi, opts.seed);
    let score = |x: &[T]| {
        let v = acq(x);
        if v.is_nan() {
            T::neg_infinity()
        } else {
            v
        }
    };
    let mut ranked: Vec<(T, usize)> = pool.iter().enumerate().map(|(i, x)| (score(x), i)).collect();
    // stable: equal scores keep Sobol' order
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut best: Option<Candidate<T>> = None;
    for &(v0, i) in ranked.iter().take(opts.starts.max(1)) {
        let cand = if v0.is_finite() {
            let r = nelder_mead(|x| Some(-score(x)), &pool[i], &lo, &hi, opts.local);
            let v = -r.value;
            if v >= v0 {
                Candidate { x: r.x, value: v }
            } else {
                Candidate { x: pool[i].clone(), value: v0 }
            }
        } else {
            Candidate { x: pool[i].clone(), value: v0 }
        };
        if best.as_ref().map_or(true, |b| cand.value > b.value) {
            best = Some(cand);
        }
    }
    best.expect("at least one start")
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfCandidate<T> {
    pub x: Vec<T>,
    /// 1-based fidelity.
    pub fidelity: usize,
    pub value: T,
}

/// Joint maximization over designs and the fidelity set `1..=levels`.
/// Each fidelity is searched with the same starts; ties favour the higher
/// fidelity, and if every score is `−∞` the highest fidelity is returned.
pub fn maximize_mf<T: Scalar>(
    acq: impl Fn(&[T], usize) -> T,
    dim: usize,
    levels: usize,
    opts: &MaximizeOptions,
) -> MfCandidate<T> {
    let mut best: Option<MfCandidate<T>> = None;
    for m in (1..=levels).rev() {
        let c = maximize(|x| acq(x, m), dim, opts);
        if best.as_ref().map_or(true, |b| c.value > b.value) {
            best = Some(MfCandidate {
                x: c.x,
                fidelity: m,
                value: c.value,
            });
        }
    }
    best.expect("at least one fidelity")
}
