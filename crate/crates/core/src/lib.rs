//! Multivariate Hawkes processes: simulation, regularized maximum likelihood,
//! and variational EM with per-parameter prior scales.

pub mod error;
pub mod events;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod likelihood;
pub mod metrics;
pub mod mle;
pub mod model;
pub mod optim;
pub mod simulate;
pub mod vi;

pub use error::{HawkesError, Result};
pub use events::{Event, EventSequence};
pub use kernel::KernelSpec;
pub use likelihood::{log_likelihood, log_likelihood_grad, window_log_likelihood, ExcitationFeatures};
pub use model::{branching_matrix, intensity, spectral_radius, stationary_rates, ModelParams};
