use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// `Tr A^{-s}` diverges unless `s > d/2`.
    #[error("trace of A^-{exponent} diverges: exponent must exceed d/2 = {half_dim}")]
    Divergence { exponent: f64, half_dim: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A named invariant of a domain type was violated.
    #[error("constraint `{constraint}` violated: {detail}")]
    Constraint { constraint: String, detail: String },

    #[error("ratio undefined: denominator ball has zero hits (numerator hits {numerator_hits})")]
    UndefinedRatio {
        numerator_hits: u64,
        denominator_hits: u64,
    },

    #[error("no candidate ball received any sample ({candidates} candidates, {samples} samples)")]
    NoHits { candidates: usize, samples: usize },
}

impl Error {
    pub(crate) fn constraint(name: &str, detail: impl Into<String>) -> Self {
        Error::Constraint {
            constraint: name.to_string(),
            detail: detail.into(),
        }
    }

    /// Name of the violated constraint, if this is a validation failure.
    pub fn constraint_name(&self) -> Option<&str> {
        match self {
            Error::Constraint { constraint, .. } => Some(constraint),
            Error::Divergence { .. } => Some("exponent > d/2"),
            _ => None,
        }
    }
}

pub(crate) fn check_len(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left, right })
    }
}
