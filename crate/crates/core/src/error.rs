use num_complex::Complex64;

/// Error type shared across the crate.
///
/// The CLI maps variants onto its exit-code contract: validation and parse
/// failures exit 1, numerical failures exit 2, I/O failures exit 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("model validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error(
        "z = {z} is in the spectrum (smallest singular value {distance:.3e} of the collocation \
         matrix at the nearest probe {nearest})"
    )]
    InSpectrum {
        z: Complex64,
        nearest: Complex64,
        distance: f64,
    },

    #[error(
        "numerically ambiguous rank at tolerance {tol:.3e}: singular values straddle the \
         threshold (gap ratio {gap_ratio:.2}); candidate partial multiplicities {lower:?} or {upper:?}"
    )]
    AmbiguousRank {
        tol: f64,
        gap_ratio: f64,
        lower: Vec<usize>,
        upper: Vec<usize>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code for the CLI contract (0 is success and never produced here).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse(_) | Error::Domain(_) => 1,
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}
