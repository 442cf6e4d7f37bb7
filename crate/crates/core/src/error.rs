use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A gain or exponent violates the admissibility condition of the law being built.
    #[error("inadmissible parameters: requires {constraint} (value {value}, bound {bound})")]
    Inadmissible {
        constraint: String,
        value: f64,
        bound: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An empirical search (gain tuning, probes) found no acceptable value.
    #[error("search failed: {0}")]
    Search(String),
}

impl Error {
    pub(crate) fn inadmissible(constraint: impl Into<String>, value: f64, bound: f64) -> Self {
        Error::Inadmissible {
            constraint: constraint.into(),
            value,
            bound,
        }
    }

    pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension {
                what,
                expected,
                got,
            })
        }
    }
}
