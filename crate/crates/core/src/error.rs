//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (non-positive parameter, bad flag combination).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data fails a structural validation (symmetry, sizes, format).
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical operation failed (singular solve, indefinite operator,
    /// corrector divergence). The message names the failing solve.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Refusal required by the internal-resonance policy: with a second-order
    /// internal resonance declared, only the second-order normal form may be
    /// used to build a ROM.
    #[error("resonance policy: {0}")]
    ResonancePolicy(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 validation/config, 3 numerical,
    /// 4 resonance-policy refusal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) | Error::Io(_) => 2,
            Error::Numerical(_) => 3,
            Error::ResonancePolicy(_) => 4,
        }
    }
}
