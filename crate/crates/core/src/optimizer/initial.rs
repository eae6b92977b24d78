use std::time::Instant;

use super::history::{finite, Phase, RunHistory};
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::optim::sobol_starts;
use crate::scalar::Scalar;

/// How the initial budget is spent.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDoeOptions {
    /// Total cost in high-fidelity equivalents.
    pub budget: f64,
    /// Evaluate lower fidelities too (otherwise only the highest).
    pub multi_fidelity: bool,
    /// Share of the budget spent at the highest fidelity; the rest is split
    /// evenly across the lower fidelities.
    pub hf_share: f64,
    pub seed: u64,
}

impl Default for InitialDoeOptions {
    fn default() -> Self {
        Self {
            budget: 160.0,
            multi_fidelity: false,
            hf_share: 0.5,
            seed: 0,
        }
    }
}

/// Number of designs per fidelity (lowest first) for an initial budget.
///
/// Counts are `⌊share/CR(m)⌋`, so the HF-equivalent cost of the set is within
/// one `CR(m)` per fidelity of the budget.
pub fn initial_counts(cost_ratios: &[f64], opts: &InitialDoeOptions) -> Result<Vec<usize>> {
    let m = cost_ratios.len();
    if !(opts.budget > 0.0 && opts.budget.is_finite()) {
        return Err(Error::InvalidArgument(format!("initial budget must be positive, got {}", opts.budget)));
    }
    // counts are floors of quotients that are often integers in exact arithmetic
    let floor = |v: f64| (v * (1.0 + 1e-12)).floor() as usize;
    if !opts.multi_fidelity || m == 1 {
        let mut counts = vec![0; m];
        counts[m - 1] = floor(opts.budget);
        if counts[m - 1] < 2 {
            return Err(Error::InvalidArgument("initial budget buys fewer than two high-fidelity designs".into()));
        }
        return Ok(counts);
    }
    if !(opts.hf_share > 0.0 && opts.hf_share < 1.0) {
        return Err(Error::InvalidArgument(format!("hf_share must lie in (0, 1), got {}", opts.hf_share)));
    }
    let n_hf = floor(opts.budget * opts.hf_share);
    if n_hf < 2 {
        return Err(Error::InvalidArgument("initial budget buys fewer than two high-fidelity designs".into()));
    }
    let share = (opts.budget - n_hf as f64) / (m - 1) as f64;
    let mut counts: Vec<usize> = cost_ratios[..m - 1].iter().map(|&cr| floor(share / cr)).collect();
    if counts.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument("initial budget leaves a fidelity without designs".into()));
    }
    counts.push(n_hf);
    Ok(counts)
}

/// Evaluates a seeded, shifted Sobol' design at the configured fidelities.
///
/// Every fidelity takes a prefix of the same point set, so the
/// high-fidelity designs are also evaluated at each lower fidelity. Failures
/// are recorded; at least two high-fidelity successes (and one per lower
/// fidelity) are required.
pub fn build_initial_doe<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    opts: &InitialDoeOptions,
) -> Result<RunHistory<T>> {
    let spec = objective.spec();
    let counts = initial_counts(&spec.cost_ratios(), opts)?;
    let n_max = counts.iter().copied().max().unwrap_or(0);
    let dim = spec.dim();
    let points: Vec<Vec<T>> = sobol_starts(n_max, &vec![T::zero(); dim], &vec![T::one(); dim], opts.seed);
    let mut h = RunHistory::new(spec.sense, spec.costs.clone());
    for (k, &n) in counts.iter().enumerate() {
        let m = k + 1;
        for x in &points[..n] {
            let t = Instant::now();
            let out = objective.evaluate(x, m).map_err(|e| e.to_string()).and_then(finite);
            if let Err(e) = &out {
                log::warn!("initial design at fidelity {m} failed: {e}");
            }
            h.append(Phase::Initial, 0, x.clone(), m, out, t.elapsed().as_secs_f64(), None);
        }
    }
    for (k, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let m = k + 1;
        let ok = h.records().iter().filter(|r| r.fidelity == m && r.is_success()).count();
        let need = if m == counts.len() { 2 } else { 1 };
        if ok < need {
            return Err(Error::InsufficientData(format!(
                "{ok} of {n} initial evaluations succeeded at fidelity {m}"
            )));
        }
    }
    Ok(h)
}
