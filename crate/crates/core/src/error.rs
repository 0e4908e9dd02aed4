use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vortex collision: minimum pairwise distance {min_distance:e} is below {tolerance:e}")]
    Collision { min_distance: f64, tolerance: f64 },

    #[error("not a rotation: {0}")]
    NotRotation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("implicit midpoint did not converge at step {step} (last increment {increment:e})")]
    MidpointNonconvergence { step: usize, increment: f64 },

    #[error("integration left the domain at step {step}: {source}")]
    DomainExit {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
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
