use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma function pole at x = {0}")]
    Pole(f64),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("quadrature did not reach its tolerance{}: {msg}", eps.map(|e| format!(" at eps = {e:e}")).unwrap_or_default())]
    Quadrature { msg: String, eps: Option<f64> },
    #[error("ill-conditioned asymptotic fit (condition estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("claim parameters outside the validity domain: {0}")]
    Validity(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn quadrature(msg: impl Into<String>) -> Self {
        Error::Quadrature { msg: msg.into(), eps: None }
    }

    /// Attaches the regularization parameter at which a quadrature failure happened.
    pub fn at_eps(self, eps: f64) -> Self {
        match self {
            Error::Quadrature { msg, eps: None } => Error::Quadrature { msg, eps: Some(eps) },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
