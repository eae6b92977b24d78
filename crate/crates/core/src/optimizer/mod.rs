//! Single-fidelity (BO) and multi-fidelity (MFBO) optimization loops.
//!
//! Each iteration refits the surrogate by maximum likelihood, maximizes the
//! acquisition, evaluates the objective once and augments the data of the
//! evaluated fidelity only. Runs stop at the iteration cap or when no
//! fidelity fits in the remaining budget, whichever comes first.

mod history;
mod initial;
mod ledger;
mod recommend;

pub use history::{EvalRecord, HistoryWriter, Phase, RunHistory};
pub use initial::{build_initial_doe, initial_counts, InitialDoeOptions};
pub use ledger::BudgetLedger;
pub use recommend::{recommend, Recommendation, RecommendationRule};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{
    coefficient_of_variation, estimate_rho_at, log_ei, maximize, maximize_mf, ucb, vf_log_ei_at, vf_ucb_at,
    AcquisitionContext, MaximizeOptions, UcbWeights,
};
use crate::error::{Error, Result};
use crate::gp::{FitOptions, GaussianProcess, Kernel, Posterior};
use crate::mtgp::{MtFitOptions, MtParams, MultiTaskGp, NoiseMode, TaskCovariance};
use crate::objectives::Objective;
use crate::scalar::Scalar;
use history::finite;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionKind {
    #[serde(rename = "logei")]
    LogEi,
    #[serde(rename = "ucb")]
    Ucb,
    #[serde(rename = "vf-logei")]
    VfLogEi,
    #[serde(rename = "vf-ucb")]
    VfUcb,
}

impl AcquisitionKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::LogEi => "logei",
            Self::Ucb => "ucb",
            Self::VfLogEi => "vf-logei",
            Self::VfUcb => "vf-ucb",
        }
    }

    fn is_ucb(self) -> bool {
        matches!(self, Self::Ucb | Self::VfUcb)
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logei" => Ok(Self::LogEi),
            "ucb" => Ok(Self::Ucb),
            "vf-logei" => Ok(Self::VfLogEi),
            "vf-ucb" => Ok(Self::VfUcb),
            other => Err(Error::InvalidArgument(format!("unknown acquisition `{other}`"))),
        }
    }
}

/// Where `ρ(m)` for the variable-fidelity acquisitions comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoSource {
    /// Pearson correlation of the responses at designs evaluated at both
    /// fidelities; falls back to the model when fewer than three exist.
    #[default]
    Coincident,
    /// Correlation implied by the fitted task covariance.
    Model,
}

#[derive(Clone, Debug)]
pub struct LoopOptions<T> {
    pub kernel: Kernel,
    /// The single-fidelity loop scores with LogEI or UCB; the
    /// multi-fidelity loop uses the variable-fidelity form of either.
    pub acquisition: AcquisitionKind,
    /// UCB exploration weight.
    pub beta: f64,
    pub iterations: usize,
    /// Optimization budget `B`, in the objective's cost units. Required for
    /// the multi-fidelity loop.
    pub budget: Option<f64>,
    pub seed: u64,
    pub fit: FitOptions<T>,
    pub noise: NoiseMode,
    /// Start each fit from the previous iteration's hyperparameters too.
    pub warm_start: bool,
    pub maximize: MaximizeOptions,
    /// Designs within this distance of a failed evaluation (same fidelity)
    /// are never proposed again.
    pub exclusion_radius: f64,
    pub rho: RhoSource,
    /// Probe points for the coefficients of variation behind VF-UCB.
    pub cv_probes: usize,
    /// Spend leftover budget checking lower-fidelity incumbents at the
    /// highest fidelity before recommending.
    pub promote: bool,
}

impl<T: Scalar> Default for LoopOptions<T> {
    fn default() -> Self {
        Self {
            kernel: Kernel::Matern52,
            acquisition: AcquisitionKind::LogEi,
            beta: 2.0,
            iterations: 50,
            budget: None,
            seed: 0,
            fit: FitOptions::default(),
            noise: NoiseMode::Shared,
            warm_start: true,
            maximize: MaximizeOptions::default(),
            exclusion_radius: 1e-2,
            rho: RhoSource::Coincident,
            cv_probes: 256,
            promote: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Iterations,
    Budget,
}

#[derive(Clone, Debug)]
pub struct RunOutcome<T> {
    pub history: RunHistory<T>,
    pub recommendation: Recommendation<T>,
    pub ledger: BudgetLedger,
    pub stop: StopReason,
}

/// A run that stopped on an error, with everything evaluated so far.
#[derive(Debug, Error)]
#[error("optimization aborted after {} records: {source}", history.len())]
pub struct RunAborted<T: Scalar> {
    pub history: RunHistory<T>,
    #[source]
    pub source: Error,
}

/// Called with every new record, e.g. to persist it.
pub type Observer<'a, T> = dyn FnMut(&EvalRecord<T>) -> Result<()> + 'a;

/// Seed for one purpose within one iteration, independent of how many
/// random numbers earlier iterations consumed.
pub fn iteration_seed(seed: u64, iteration: usize, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 8) | purpose);
    rng.next_u64()
}

/// Bayesian optimization of the highest fidelity of `objective`, starting
/// from (or resuming) `history`.
///
/// `history` must hold the initial data at the highest fidelity and may
/// contain loop records of an interrupted run with the same options; the
/// loop then continues where that run stopped.
pub fn run_bo<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    history: RunHistory<T>,
    opts: &LoopOptions<T>,
    observer: &mut Observer<'_, T>,
) -> std::result::Result<RunOutcome<T>, RunAborted<T>> {
    run(objective, history, opts, observer, false)
}

/// Multi-fidelity Bayesian optimization under the cost ledger.
///
/// With one fidelity, proposals are identical to [`run_bo`] with budget
/// `B` and the same seed.
pub fn run_mfbo<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    history: RunHistory<T>,
    opts: &LoopOptions<T>,
    observer: &mut Observer<'_, T>,
) -> std::result::Result<RunOutcome<T>, RunAborted<T>> {
    run(objective, history, opts, observer, true)
}

enum Surrogate<T: Scalar> {
    Single(GaussianProcess<T>),
    Multi(MultiTaskGp<T>),
}

impl<T: Scalar> Surrogate<T> {
    fn predict(&self, x: &[T], m: usize) -> Posterior<T> {
        match self {
            Self::Single(gp) => gp.predict(x),
            Self::Multi(gp) => gp.predict_level(x, m),
        }
    }

    fn params(&self) -> MtParams<T> {
        match self {
            Self::Single(gp) => MtParams::new(*gp.params(), TaskCovariance::identity(1)),
            Self::Multi(gp) => gp.params().clone(),
        }
    }
}

struct Run<'o, T: Scalar, O: ?Sized> {
    objective: &'o O,
    opts: &'o LoopOptions<T>,
    multi: bool,
    /// Fidelities the loop may choose from, 1-based.
    levels: Vec<usize>,
    history: RunHistory<T>,
    ledger: BudgetLedger,
    excluded: Vec<(Vec<T>, usize)>,
    warm: Option<MtParams<T>>,
}

fn run<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    history: RunHistory<T>,
    opts: &LoopOptions<T>,
    observer: &mut Observer<'_, T>,
    multi: bool,
) -> std::result::Result<RunOutcome<T>, RunAborted<T>> {
    let mut state = match Run::new(objective, history, opts, multi) {
        Ok(s) => s,
        Err((history, source)) => return Err(RunAborted { history, source }),
    };
    match state.execute(observer) {
        Ok((stop, recommendation)) => Ok(RunOutcome {
            history: state.history,
            recommendation,
            ledger: state.ledger,
            stop,
        }),
        Err(source) => Err(RunAborted {
            history: state.history,
            source,
        }),
    }
}

impl<'o, T: Scalar, O: Objective<T> + ?Sized> Run<'o, T, O> {
    fn new(
        objective: &'o O,
        history: RunHistory<T>,
        opts: &'o LoopOptions<T>,
        multi: bool,
    ) -> std::result::Result<Self, (RunHistory<T>, Error)> {
        let spec = objective.spec();
        let top = spec.fidelities();
        let check = || -> Result<BudgetLedger> {
            if history.costs != spec.costs || history.sense != spec.sense {
                return Err(Error::InvalidArgument("history does not belong to this objective".into()));
            }
            if !multi && history.records().iter().any(|r| r.fidelity != top) {
                return Err(Error::InvalidArgument(
                    "single-fidelity runs use the highest fidelity only".into(),
                ));
            }
            let budget = match (opts.budget, multi) {
                (Some(b), _) => b,
                (None, false) => f64::INFINITY,
                (None, true) => {
                    return Err(Error::InvalidArgument("multi-fidelity runs need a budget".into()));
                }
            };
            let mut ledger = BudgetLedger::new(budget, spec.costs.clone())?;
            for r in history.records().iter().filter(|r| r.phase != Phase::Initial) {
                ledger.charge(r.fidelity)?;
            }
            let hf = history.doe(top)?;
            let first = hf.y[0];
            if hf.len() < 2 || hf.y.iter().all(|&v| v == first) {
                return Err(Error::InsufficientData(
                    "the initial data needs at least two distinct high-fidelity values".into(),
                ));
            }
            if multi {
                history.mfdoe()?;
            }
            Ok(ledger)
        };
        let ledger = match check() {
            Ok(l) => l,
            Err(e) => return Err((history, e)),
        };
        let excluded = history
            .records()
            .iter()
            .filter(|r| !r.is_success())
            .map(|r| (r.x.clone(), r.fidelity))
            .collect();
        let warm = history.records().iter().rev().find_map(|r| r.model.clone());
        Ok(Self {
            objective,
            opts,
            multi,
            levels: if multi { (1..=top).collect() } else { vec![top] },
            history,
            ledger,
            excluded,
            warm,
        })
    }

    fn top(&self) -> usize {
        self.ledger.n_levels()
    }

    fn execute(&mut self, observer: &mut Observer<'_, T>) -> Result<(StopReason, Recommendation<T>)> {
        let finished = self.history.records().iter().any(|r| r.phase == Phase::Promotion);
        let mut stop = StopReason::Iterations;
        if !finished {
            for i in self.history.last_iteration() + 1..=self.opts.iterations {
                if !self.levels.iter().any(|&m| self.ledger.can_afford(m)) {
                    stop = StopReason::Budget;
                    break;
                }
                self.iterate(i, observer)?;
            }
            if stop == StopReason::Iterations && !self.levels.iter().any(|&m| self.ledger.can_afford(m)) {
                stop = StopReason::Budget;
            }
        }
        let rule = if !self.multi || self.top() == 1 {
            RecommendationRule::BestObserved
        } else if self.opts.promote && !finished {
            self.promote(observer)?
        } else {
            RecommendationRule::HighFidelityObserved
        };
        let mut rec = recommend(&self.history)?;
        rec.rule = rule;
        Ok((stop, rec))
    }

    fn fit(&self, i: usize) -> Result<Surrogate<T>> {
        let mut fit = self.opts.fit.clone();
        fit.seed = iteration_seed(self.opts.seed, i, 0);
        let warm = if self.opts.warm_start { self.warm.clone() } else { None };
        if self.multi {
            let data = self.history.mfdoe()?;
            let mt = MtFitOptions {
                base: fit,
                noise: self.opts.noise,
                warm_start: warm,
            };
            Ok(Surrogate::Multi(MultiTaskGp::fit(&data, self.opts.kernel, &mt)?))
        } else {
            fit.warm_start = warm.map(|w| w.base);
            let data = self.history.doe(self.top())?;
            Ok(Surrogate::Single(GaussianProcess::fit(&data, self.opts.kernel, &fit)?))
        }
    }

    fn context(&self, model: &Surrogate<T>, i: usize) -> Result<AcquisitionContext<T>> {
        let top = self.top();
        let y_best = self
            .history
            .best(top)
            .and_then(|r| r.value)
            .ok_or_else(|| Error::InsufficientData("no high-fidelity value".into()))?;
        let sense = self.objective.spec().sense;
        let beta = T::lit(self.opts.beta);
        let Surrogate::Multi(gp) = model else {
            return Ok(AcquisitionContext::single(y_best, sense, beta));
        };
        if top == 1 {
            return Ok(AcquisitionContext::single(y_best, sense, beta));
        }
        let data = self.history.mfdoe()?;
        let crs: Vec<T> = self.objective.spec().cost_ratios().into_iter().map(T::lit).collect();
        let rho: Vec<T> = (1..=top)
            .map(|m| {
                let model_rho = || gp.params().task.correlation(m, top);
                match self.opts.rho {
                    RhoSource::Model => model_rho(),
                    RhoSource::Coincident => estimate_rho_at(&data, m).unwrap_or_else(|_| model_rho()),
                }
            })
            .collect();
        let mut ctx = AcquisitionContext::multi(y_best, sense, beta, crs, rho)?;
        if self.opts.acquisition.is_ucb() {
            let cv = coefficient_of_variation(gp, data.dim(), self.opts.cv_probes, iteration_seed(self.opts.seed, i, 2));
            ctx.ucb_weights = cv.into_iter().map(UcbWeights::from_cv).collect();
        }
        Ok(ctx)
    }

    fn is_excluded(&self, x: &[T], m: usize) -> bool {
        let r2 = self.opts.exclusion_radius * self.opts.exclusion_radius;
        self.excluded.iter().any(|(e, em)| {
            *em == m && e.iter().zip(x).map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2)).sum::<f64>() <= r2
        })
    }

    fn iterate(&mut self, i: usize, observer: &mut Observer<'_, T>) -> Result<()> {
        let model = self.fit(i)?;
        let ctx = self.context(&model, i)?;
        let vf = ctx.n_levels() > 1;
        let ucb_kind = self.opts.acquisition.is_ucb();
        let affordable: Vec<bool> = (1..=self.top()).map(|m| self.ledger.can_afford(m)).collect();
        let score = |x: &[T], m: usize| -> T {
            if !affordable[m - 1] || self.is_excluded(x, m) {
                return T::neg_infinity();
            }
            let p = model.predict(x, m);
            match (ucb_kind, vf) {
                (false, true) => vf_log_ei_at(&p, m, &ctx),
                (false, false) => log_ei(&p, &ctx),
                (true, true) => vf_ucb_at(&p, m, &ctx),
                (true, false) => ucb(&p, &ctx),
            }
        };
        let mut mopts = self.opts.maximize;
        mopts.seed = iteration_seed(self.opts.seed, i, 1);
        let dim = self.objective.spec().dim();
        let (x, m) = if self.multi {
            let c = maximize_mf(score, dim, self.top(), &mopts);
            (c.x, c.fidelity)
        } else {
            let top = self.top();
            (maximize(|x: &[T]| score(x, top), dim, &mopts).x, top)
        };
        let params = model.params();
        self.warm = Some(params.clone());
        self.evaluate(Phase::Iteration, i, x, m, Some(params), observer)
    }

    fn evaluate(
        &mut self,
        phase: Phase,
        i: usize,
        x: Vec<T>,
        m: usize,
        model: Option<MtParams<T>>,
        observer: &mut Observer<'_, T>,
    ) -> Result<()> {
        self.ledger.charge(m)?;
        let t = Instant::now();
        let out = self.objective.evaluate(&x, m).map_err(|e| e.to_string()).and_then(finite);
        let wall = t.elapsed().as_secs_f64();
        if let Err(e) = &out {
            log::warn!("iteration {i}: evaluation at fidelity {m} failed: {e}");
            self.excluded.push((x.clone(), m));
        }
        let rec = self.history.append(phase, i, x, m, out, wall, model);
        observer(rec)
    }

    /// Evaluates lower-fidelity incumbents at the highest fidelity while
    /// the budget allows.
    fn promote(&mut self, observer: &mut Observer<'_, T>) -> Result<RecommendationRule> {
        let top = self.top();
        let i = self.history.last_iteration();
        let mut promoted = false;
        let mut skipped = false;
        for m in (1..top).rev() {
            let Some(inc) = self.history.best(m).map(|r| r.x.clone()) else {
                continue;
            };
            let known = self.history.records().iter().any(|r| r.fidelity == top && r.x == inc);
            if known {
                continue;
            }
            if self.ledger.can_afford(top) {
                self.evaluate(Phase::Promotion, i, inc, top, None, observer)?;
                promoted = true;
            } else {
                skipped = true;
            }
        }
        Ok(match (promoted, skipped) {
            (_, true) => RecommendationRule::NoHeadroom,
            (true, false) => RecommendationRule::Promoted,
            (false, false) => RecommendationRule::HighFidelityObserved,
        })
    }
}
