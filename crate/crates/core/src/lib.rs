//! Noisy-ABC maximum likelihood estimation for hidden Markov models whose
//! observation density can be sampled from but not evaluated.
//!
//! Every model is written as `Y = tau_theta(X, U)` with `U ~ nu_theta(. | X)`.
//! Adding kernel noise of scale `epsilon` to `psi(tau)` gives an extended HMM
//! on `Z = (X, U)` with tractable densities, so standard particle filters
//! deliver likelihood and score estimates, and stochastic gradient ascent
//! finds the noisy-ABC MLE.

pub mod diagnostics;
pub mod error;
pub mod gradcheck;
pub mod iid;
pub mod kalman;
pub mod mle;
pub mod model;
pub mod models;
pub mod observation;
pub mod params;
pub mod rng;
pub mod smc;
pub mod special;

pub use error::{Error, Result};
pub use model::{is_static, simulate, ExtendedState, Model, Simulation};
pub use models::{build_model, ModelOptions, MODEL_NAMES};
pub use observation::{corrupt_observations, psi_transform, Kernel, NoisySeries, Transform};
pub use params::{Constraint, Domain, ParameterVector};
pub use rng::Streams;
