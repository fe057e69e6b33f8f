use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or auxiliary value lies outside its admissible set.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid run configuration (bad epsilon, particle count, dimensions...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A model function produced a non-finite value.
    #[error("non-finite evaluation in {what} at theta={theta:?}, x={x:?}, u={u:?}")]
    Evaluation {
        what: &'static str,
        theta: Vec<f64>,
        x: Vec<f64>,
        u: Vec<f64>,
    },

    /// Every particle weight vanished.
    #[error("particle degeneracy at step {step} (theta={theta:?}, epsilon={epsilon})")]
    Degeneracy {
        step: usize,
        theta: Vec<f64>,
        epsilon: f64,
    },

    /// A non-finite gradient or parameter update.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures that originate in floating-point arithmetic rather
    /// than in user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Evaluation { .. } | Error::Degeneracy { .. } | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
