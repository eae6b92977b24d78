//! Objective providers: synthetic benchmarks, an external-process simulator
//! adapter, force–displacement ingestion and a persistent evaluation cache.
//!
//! Every objective takes designs in the unit hypercube and a 1-based
//! fidelity `m`; physical units only appear at the adapter boundary.

mod benchmarks;
mod cache;
mod ea;
mod external;

pub use benchmarks::{benchmark, benchmark_names, probe_correlation, tunable_pair, Benchmark, PROBE_POINTS};
pub use cache::{cache_key, CacheEntry, CachedObjective, EvalCache};
pub use ea::{ea_normalized, read_curve_csv, CurveError, ForceDisplacementCurve};
pub use external::{ExternalConfig, ExternalObjective, Request, Response, PROTOCOL_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::acquisition::Sense;
use crate::error::{Error as CoreError, Result};
use crate::sampling::Bounds;
use crate::scalar::Scalar;

/// Why one objective evaluation produced no value.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("design outside the unit hypercube")]
    OutOfDomain,
    #[error("fidelity {fidelity} not in 1..={max}")]
    BadFidelity { fidelity: usize, max: usize },
    #[error("request {id}: simulator timed out after {seconds:.1} s")]
    Timeout { id: String, seconds: f64 },
    #[error("request {id}: simulator exited with {status}: {stderr}")]
    ProcessFailed { id: String, status: String, stderr: String },
    #[error("request {id}: malformed response: {message}")]
    MalformedResponse { id: String, message: String },
    #[error("request {id}: simulator reported an error: {message}")]
    Reported { id: String, message: String },
    #[error("{0}")]
    Other(String),
}

/// Location and value of a known global optimum, unit-cube coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Static description of an objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub name: String,
    /// Bumped whenever evaluations would change; part of the cache key.
    pub version: String,
    pub bounds: Bounds<f64>,
    /// Cost of one evaluation per fidelity, lowest fidelity first.
    pub costs: Vec<f64>,
    pub sense: Sense,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum: Option<KnownOptimum>,
    /// LF/HF Pearson correlation over the probe grid, two-fidelity pairs only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<f64>,
}

impl ObjectiveSpec {
    pub fn new(name: impl Into<String>, bounds: Bounds<f64>, costs: Vec<f64>, sense: Sense) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            version: "1".into(),
            bounds,
            costs,
            sense,
            optimum: None,
            correlation: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.costs.is_empty() {
            return Err(CoreError::InvalidArgument("an objective needs at least one fidelity".into()));
        }
        if self.costs.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(CoreError::InvalidArgument("costs must be positive".into()));
        }
        if self.costs.windows(2).any(|w| w[1] < w[0]) {
            return Err(CoreError::InvalidArgument("costs must be nondecreasing in fidelity".into()));
        }
        if let Some(o) = &self.optimum {
            if o.x.len() != self.dim() {
                return Err(CoreError::DimensionMismatch { expected: self.dim(), got: o.x.len() });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn fidelities(&self) -> usize {
        self.costs.len()
    }

    /// `CR(m) = c(m)/c(M)` for `m = 1..=M`.
    pub fn cost_ratios(&self) -> Vec<f64> {
        let top = self.costs[self.costs.len() - 1];
        self.costs.iter().map(|c| c / top).collect()
    }
}

/// A (possibly multi-fidelity) black-box objective on the unit hypercube.
pub trait Objective<T: Scalar>: Send + Sync {
    fn spec(&self) -> &ObjectiveSpec;

    /// Evaluates fidelity `m` (1-based) at `x ∈ [0,1]^D`.
    fn evaluate(&self, x: &[T], m: usize) -> Result<T, EvalError>;
}

impl<T: Scalar, O: Objective<T> + ?Sized> Objective<T> for &O {
    fn spec(&self) -> &ObjectiveSpec {
        (**self).spec()
    }

    fn evaluate(&self, x: &[T], m: usize) -> Result<T, EvalError> {
        (**self).evaluate(x, m)
    }
}

impl<T: Scalar, O: Objective<T> + ?Sized> Objective<T> for Box<O> {
    fn spec(&self) -> &ObjectiveSpec {
        (**self).spec()
    }

    fn evaluate(&self, x: &[T], m: usize) -> Result<T, EvalError> {
        (**self).evaluate(x, m)
    }
}

/// Checks the shared preconditions of [`Objective::evaluate`].
pub fn check_request<T: Scalar>(spec: &ObjectiveSpec, x: &[T], m: usize) -> Result<(), EvalError> {
    if m == 0 || m > spec.fidelities() {
        return Err(EvalError::BadFidelity { fidelity: m, max: spec.fidelities() });
    }
    if x.len() != spec.dim() || x.iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
        return Err(EvalError::OutOfDomain);
    }
    Ok(())
}

/// An objective backed by a closure `(x, m) -> value`, for mocks and
/// user-defined analytic functions.
pub struct FnObjective<F> {
    spec: ObjectiveSpec,
    f: F,
}

impl<F> FnObjective<F> {
    pub fn new(spec: ObjectiveSpec, f: F) -> Self {
        Self { spec, f }
    }
}

impl<T, F> Objective<T> for FnObjective<F>
where
    T: Scalar,
    F: Fn(&[T], usize) -> Result<T, EvalError> + Send + Sync,
{
    fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    fn evaluate(&self, x: &[T], m: usize) -> Result<T, EvalError> {
        check_request(&self.spec, x, m)?;
        (self.f)(x, m)
    }
}
