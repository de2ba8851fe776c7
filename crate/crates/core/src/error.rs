use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("coupling `{kind}` cannot be used with model `{model}`: {reason}")]
    IncompatibleCoupling {
        kind: String,
        model: String,
        reason: String,
    },

    #[error(
        "chains did not meet within the transition budget of {budget} \
         (lag {lag}, reached t = {t}, {cost_units} transitions consumed)"
    )]
    MeetingBudgetExceeded {
        budget: u64,
        lag: usize,
        t: usize,
        cost_units: u64,
    },

    #[error("maximal coupling rejection loop exceeded {cap} iterations (near-singular density ratio)")]
    RejectionCapExceeded { cap: u64 },

    #[error("invalid selection probabilities: {0}")]
    InvalidSelection(String),

    #[error("empty stream: reservoir sampling needs at least one item")]
    EmptyStream,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
