//! Single-output Gaussian-process regression.
//!
//! Responses are standardized before fitting; the prior mean is zero in
//! standardized units. Predictions are mapped back to raw units.

mod doe;
mod kernel;
mod model;

pub use doe::{Doe, Standardization};
pub use kernel::{kernel_matern52, kernel_rbf, Kernel, KernelParams};
pub use model::{
    fit_mle, gram, nll, posterior, FitOptions, FitReport, GaussianProcess, ModelRecord, ParamBounds,
    Posterior, MODEL_SCHEMA_VERSION,
};

pub(crate) use model::{nll_from_gram, predict_core, Pairwise};
