use thiserror::Error;

use crate::eig::SchurFactorization;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Precondition violated (bad index, size mismatch, out-of-range parameter).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not invertible")]
    NotInvertible,

    /// The QR iteration hit its cap. The partial factorization is still a
    /// valid unitary similarity, just not triangular.
    #[error("Schur iteration did not converge after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        partial: Box<SchurFactorization>,
    },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("eigenvalue clusters are too close to decouple (gap {gap:e}); retry with a larger ctol")]
    IllConditionedClusters { gap: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("numeric range exceeded: {0}")]
    NumericRange(String),

    #[error("at index {index}: {source}")]
    AtIndex { index: usize, source: Box<Error> },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_index(index: usize, source: Error) -> Self {
        Error::AtIndex {
            index,
            source: Box::new(source),
        }
    }

    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NoConvergence { .. }
            | Error::NotPsd { .. }
            | Error::IllConditionedClusters { .. }
            | Error::NumericRange(_)
            | Error::NotInvertible
            | Error::Internal(_) => true,
            Error::AtIndex { source, .. } => source.is_numeric(),
            Error::Domain(_) | Error::NonFinite(_) | Error::Capacity(_) => false,
        }
    }
}
