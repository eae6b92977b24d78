//! Variance-based (Sobol') sensitivity indices from evaluated Saltelli
//! collections, with bootstrap percentile intervals and convergence scans.
//!
//! For base rows `j`, design dimension `i` and total variance `V`:
//!
//! ```text
//! S1[i] = (1/N)  Σ_j f_B[j] · (f_AB[i][j] − f_A[j]) / V
//! ST[i] = (1/2N) Σ_j (f_A[j] − f_AB[i][j])²         / V
//! ```
//!
//! `V` is the sample variance of `f_A ∪ f_B`. Evaluations are centred on the
//! pooled mean of `f_A ∪ f_B` before the first-order sum, which leaves the
//! estimator's expectation unchanged and makes it exactly shift invariant.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Objective values at the rows of `A`, `B` and every `A_B^(i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaltelliEvaluations<T> {
    pub f_a: Vec<T>,
    pub f_b: Vec<T>,
    pub f_ab: Vec<Vec<T>>,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub fidelity: Option<usize>,
}

impl<T: Scalar> SaltelliEvaluations<T> {
    pub fn new(f_a: Vec<T>, f_b: Vec<T>, f_ab: Vec<Vec<T>>) -> Result<Self> {
        let ev = Self {
            f_a,
            f_b,
            f_ab,
            name: String::new(),
            fidelity: None,
        };
        ev.validate()?;
        Ok(ev)
    }

    /// Evaluates `f` over every design of a Saltelli collection.
    pub fn from_fn(set: &crate::sampling::SaltelliSet<T>, mut f: impl FnMut(&[T]) -> T) -> Result<Self> {
        let f_a = set.a.iter_rows().map(&mut f).collect();
        let f_b = set.b.iter_rows().map(&mut f).collect();
        let f_ab = set.ab.iter().map(|m| m.iter_rows().map(&mut f).collect()).collect();
        Self::new(f_a, f_b, f_ab)
    }

    pub fn with_name(mut self, name: impl Into<String>, fidelity: Option<usize>) -> Self {
        self.name = name.into();
        self.fidelity = fidelity;
        self
    }

    pub fn base_count(&self) -> usize {
        self.f_a.len()
    }

    pub fn dim(&self) -> usize {
        self.f_ab.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.f_a.len();
        if self.f_b.len() != n || self.f_ab.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidArgument("Saltelli evaluation vectors differ in length".into()));
        }
        if self.f_ab.is_empty() {
            return Err(Error::InvalidArgument("no A_B evaluations".into()));
        }
        let all_finite = self
            .f_a
            .iter()
            .chain(&self.f_b)
            .chain(self.f_ab.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidArgument("non-finite evaluation".into()));
        }
        Ok(())
    }

    /// The first `n` base rows of every block.
    pub fn head(&self, n: usize) -> Result<Self> {
        if n > self.base_count() {
            return Err(Error::InvalidArgument(format!(
                "requested {n} base rows but only {} are available",
                self.base_count()
            )));
        }
        Ok(Self {
            f_a: self.f_a[..n].to_vec(),
            f_b: self.f_b[..n].to_vec(),
            f_ab: self.f_ab.iter().map(|v| v[..n].to_vec()).collect(),
            name: self.name.clone(),
            fidelity: self.fidelity,
        })
    }
}

/// Point estimates for every parameter from the rows listed in `idx`.
struct Estimates<T> {
    s1: Vec<T>,
    st: Vec<T>,
    var_total: T,
}

fn estimate<T: Scalar>(ev: &SaltelliEvaluations<T>, idx: &[usize]) -> Result<Estimates<T>> {
    let n = idx.len();
    if n < 2 {
        return Err(Error::InsufficientData("sensitivity estimators need N ≥ 2".into()));
    }
    let nt = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let mean = idx.iter().map(|&j| ev.f_a[j] + ev.f_b[j]).sum::<T>() / (two * nt);
    let var_total = idx
        .iter()
        .map(|&j| {
            let a = ev.f_a[j] - mean;
            let b = ev.f_b[j] - mean;
            a * a + b * b
        })
        .sum::<T>()
        / (two * nt - T::one());
    // relative spread below 1e-12 is rounding noise, not variation
    let scale = mean.abs().max(T::one());
    if !(var_total > T::lit(1e-24) * scale * scale) {
        return Err(Error::DegenerateObjective);
    }
    let mut s1 = Vec::with_capacity(ev.dim());
    let mut st = Vec::with_capacity(ev.dim());
    for fab in &ev.f_ab {
        let mut first = T::zero();
        let mut total = T::zero();
        for &j in idx {
            let d = fab[j] - ev.f_a[j];
            first = first + (ev.f_b[j] - mean) * d;
            total = total + d * d;
        }
        s1.push(first / nt / var_total);
        st.push(total / (two * nt) / var_total);
    }
    Ok(Estimates { s1, st, var_total })
}

fn all_rows(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// First-order indices `S1[i]`.
pub fn first_order<T: Scalar>(ev: &SaltelliEvaluations<T>) -> Result<Vec<T>> {
    Ok(estimate(ev, &all_rows(ev.base_count()))?.s1)
}

/// Total-effect indices `ST[i]`.
pub fn total_order<T: Scalar>(ev: &SaltelliEvaluations<T>) -> Result<Vec<T>> {
    Ok(estimate(ev, &all_rows(ev.base_count()))?.st)
}

/// Indices for one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterIndices<T> {
    pub name: String,
    pub s1: T,
    pub st: T,
    pub ci_s1: (T, T),
    pub ci_st: (T, T),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport<T> {
    pub objective: String,
    pub fidelity: Option<usize>,
    pub n_used: usize,
    pub var_total: T,
    pub n_boot: usize,
    pub level: T,
    pub parameters: Vec<ParameterIndices<T>>,
}

impl<T: Scalar> SensitivityReport<T> {
    pub fn s1(&self) -> Vec<T> {
        self.parameters.iter().map(|p| p.s1).collect()
    }

    pub fn st(&self) -> Vec<T> {
        self.parameters.iter().map(|p| p.st).collect()
    }

    /// Parameters with a negative point estimate (estimator noise).
    pub fn negative_estimates(&self) -> Vec<(String, &'static str, T)> {
        let mut out = Vec::new();
        for p in &self.parameters {
            if p.s1 < T::zero() {
                out.push((p.name.clone(), "S1", p.s1));
            }
            if p.st < T::zero() {
                out.push((p.name.clone(), "ST", p.st));
            }
        }
        out
    }
}

/// Bootstrap settings: replicate count, two-sided level and RNG seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            n_boot: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

fn percentile<T: Scalar>(sorted: &[T], q: f64) -> T {
    // linear interpolation between order statistics
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * w
}

/// Point estimates plus bootstrap percentile intervals.
///
/// Base rows are resampled with replacement, keeping `A`, `B` and `A_B`
/// rows paired. Replicate `r` draws from ChaCha stream `r` of `seed`, so the
/// result depends only on the seed. Each interval is widened, if needed, to
/// contain the full-sample estimate.
pub fn bootstrap_ci<T: Scalar>(
    ev: &SaltelliEvaluations<T>,
    names: &[String],
    opts: BootstrapOptions,
) -> Result<SensitivityReport<T>> {
    if opts.n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be ≥ 1".into()));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidArgument("level must lie in (0, 1)".into()));
    }
    let n = ev.base_count();
    let d = ev.dim();
    let point = estimate(ev, &all_rows(n))?;
    let mut reps_s1 = vec![Vec::with_capacity(opts.n_boot); d];
    let mut reps_st = vec![Vec::with_capacity(opts.n_boot); d];
    let mut idx = vec![0usize; n];
    for r in 0..opts.n_boot {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(r as u64);
        idx.iter_mut().for_each(|j| *j = rng.gen_range(0..n));
        // a resample of identical rows carries no variance; skip it
        let Ok(e) = estimate(ev, &idx) else { continue };
        for i in 0..d {
            reps_s1[i].push(e.s1[i]);
            reps_st[i].push(e.st[i]);
        }
    }
    if reps_s1[0].is_empty() {
        return Err(Error::DegenerateObjective);
    }
    let alpha = (1.0 - opts.level) / 2.0;
    let interval = |reps: &mut Vec<T>, est: T| {
        reps.sort_by(|a, b| a.partial_cmp(b).expect("finite replicate"));
        let lo = percentile(reps, alpha);
        let hi = percentile(reps, 1.0 - alpha);
        (lo.min(est), hi.max(est))
    };
    let parameters = (0..d)
        .map(|i| ParameterIndices {
            name: names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1)),
            s1: point.s1[i],
            st: point.st[i],
            ci_s1: interval(&mut reps_s1[i], point.s1[i]),
            ci_st: interval(&mut reps_st[i], point.st[i]),
        })
        .collect();
    Ok(SensitivityReport {
        objective: ev.name.clone(),
        fidelity: ev.fidelity,
        n_used: n,
        var_total: point.var_total,
        n_boot: opts.n_boot,
        level: T::lit(opts.level),
        parameters,
    })
}

/// Reports on the first `n` base rows for every `n` in `grid`, in grid order.
pub fn convergence_scan<T: Scalar>(
    ev: &SaltelliEvaluations<T>,
    names: &[String],
    grid: &[usize],
    opts: BootstrapOptions,
) -> Result<Vec<SensitivityReport<T>>> {
    if let Some(&bad) = grid.iter().find(|&&n| n > ev.base_count()) {
        return Err(Error::InvalidArgument(format!(
            "grid entry {bad} exceeds the {} available base rows",
            ev.base_count()
        )));
    }
    grid.iter()
        .map(|&n| bootstrap_ci(&ev.head(n)?, names, opts))
        .collect()
}

/// Long-format CSV: one row per (base count, parameter, index kind).
pub fn write_convergence_csv<T: Scalar>(path: &Path, reports: &[SensitivityReport<T>]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "n_base,parameter,index,estimate,ci_lo,ci_hi,negative")?;
    for r in reports {
        for p in &r.parameters {
            for (kind, est, ci) in [("S1", p.s1, p.ci_s1), ("ST", p.st, p.ci_st)] {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.n_used,
                    p.name,
                    kind,
                    est,
                    ci.0,
                    ci.1,
                    est < T::zero()
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
