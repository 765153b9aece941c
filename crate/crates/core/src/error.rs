use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument is outside the domain where the operation is defined.
    #[error("invalid {param}: {reason}")]
    Domain { param: String, reason: String },

    /// A search hit its node cap before reaching an answer.
    #[error("node budget of {budget} exceeded after expanding {nodes} nodes")]
    BudgetExceeded { nodes: u64, budget: u64 },

    #[error("flip precondition violated: {0}")]
    FlipPreconditionViolated(String),

    #[error("no constraint admits a qualifying tuple pair for the swap")]
    NoFlipPairFound,

    #[error("flips are defined for binary constraints only, found arity {0}")]
    UnsupportedArity(usize),

    #[error("encoding needs {clauses} clauses, over the budget of {budget}")]
    Size { clauses: u64, budget: u64 },

    #[error("model decodes to value {value} for variable {var} (domain size {d})")]
    InvalidModel { var: usize, value: u64, d: u32 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An instance or certificate file failed validation.
    #[error("{location}: {message}")]
    Load { location: String, message: String },

    #[error("only {found} of {wanted} qualifying instances after {attempts} attempts")]
    SamplingExhausted {
        wanted: usize,
        found: usize,
        attempts: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(param: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            param: param.into(),
            reason: reason.into(),
        }
    }
}
