//! Harness-level errors: file I/O and parsing on top of the numeric
//! errors of the core crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("relative error undefined: reference matrix is zero")]
    UndefinedReference,

    #[error(transparent)]
    Core(#[from] chordal_core::Error),

    #[error("{0}")]
    Invalid(String),
}

impl HarnessError {
    /// Process exit code per the CLI contract: 2 for input/parse errors,
    /// 3 for numerical failures, 4 for precondition violations.
    pub fn exit_code(&self) -> u8 {
        use chordal_core::Error as Core;
        match self {
            HarnessError::Parse { .. } | HarnessError::Io { .. } => 2,
            HarnessError::Invalid(_) | HarnessError::UndefinedReference => 4,
            HarnessError::Core(core) => match core {
                Core::Stall
                | Core::Singularity { .. }
                | Core::DegenerateColumn(_)
                | Core::DegenerateDirection
                | Core::SingularConstraint
                | Core::NotPositiveDefinite
                | Core::NotPsd(_) => 3,
                Core::ShapeMismatch { .. }
                | Core::ZeroColumn(_)
                | Core::NotSymmetric(_)
                | Core::OffManifold(_)
                | Core::EmptyProblem
                | Core::Precondition(_) => 4,
            },
        }
    }
}
