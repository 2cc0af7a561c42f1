use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid network widths: {0}")]
    InvalidWidths(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "exhaustive piece enumeration supports at most {limit} hidden units, network has {hidden}; \
         use sampling mode instead"
    )]
    BudgetExceeded { hidden: usize, limit: usize },

    #[error("basis columns are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("corrupted sampling plan: row {index} has zero probability")]
    ZeroProbabilityRow { index: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
