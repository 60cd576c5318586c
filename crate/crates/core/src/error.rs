use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("closed loop is not Hurwitz (spectral abscissa {abscissa:.3e}); offending eigenvalues: {offending:?}")]
    NotHurwitz {
        abscissa: f64,
        offending: Vec<(f64, f64)>,
    },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("LMI problem infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("ill-conditioned result (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("invalid hold length {delta} (time step {t_step})")]
    InvalidDelta { delta: f64, t_step: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_) | Error::SingularSystem(_) | Error::IllConditioned(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
