//! Bayesian data-driven design toolkit.
//!
//! * [`sampling`]: Sobol' sequences, Saltelli collections, bound scaling.
//! * [`sensitivity`]: first-order and total-effect Sobol' indices with
//!   bootstrap intervals and convergence scans.
//! * [`gp`] and [`mtgp`]: single-output and multi-task (multi-fidelity)
//!   Gaussian-process regression with maximum-likelihood fitting.
//! * [`acquisition`]: EI, LogEI, UCB and their variable-fidelity variants,
//!   plus multi-start maximization.
//! * [`optimizer`]: the single- and multi-fidelity optimization loops with
//!   budget accounting and recommendation.
//! * [`objectives`]: synthetic multi-fidelity benchmarks, an external
//!   simulator adapter, force–displacement ingestion and an evaluation cache.
//!
//! The numerical core is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! at the crate root fix `f64`, which is what the CLI uses.

pub mod error;
pub mod linalg;
pub mod optim;
pub mod scalar;

pub mod gp;
pub mod mtgp;
pub mod acquisition;
pub mod sampling;
pub mod sensitivity;
pub mod optimizer;

pub mod objectives;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DesignMatrix = sampling::DesignMatrix<f64>;
pub type Bounds = sampling::Bounds<f64>;
pub type SaltelliSet = sampling::SaltelliSet<f64>;
pub type SaltelliEvaluations = sensitivity::SaltelliEvaluations<f64>;
pub type SensitivityReport = sensitivity::SensitivityReport<f64>;
pub type Doe = gp::Doe<f64>;
pub type KernelParams = gp::KernelParams<f64>;
pub type GaussianProcess = gp::GaussianProcess<f64>;
pub type Posterior = gp::Posterior<f64>;
pub type MfDoe = mtgp::MfDoe<f64>;
pub type MultiTaskGp = mtgp::MultiTaskGp<f64>;
pub type MtParams = mtgp::MtParams<f64>;
pub type AcquisitionContext = acquisition::AcquisitionContext<f64>;
pub type RunHistory = optimizer::RunHistory<f64>;
pub type EvalRecord = optimizer::EvalRecord<f64>;
pub type Recommendation = optimizer::Recommendation<f64>;
pub type LoopOptions = optimizer::LoopOptions<f64>;
pub type RunOutcome = optimizer::RunOutcome<f64>;
