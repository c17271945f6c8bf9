use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A first-renewal law with negative mass or partial sums above one.
    #[error("invalid first-renewal distribution: {0}")]
    InvalidDistribution(String),

    /// A sequence that cannot be the renewal probabilities of any renewal process.
    #[error("inconsistent renewal sequence: {0}")]
    InconsistentSequence(String),

    #[error("unknown renewal family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid observation model: {0}")]
    InvalidModel(String),

    #[error("unsupported epsilon rule: {0}")]
    UnsupportedRule(String),

    /// U_N = 0: the bias never enters the observations within the horizon.
    #[error("non-identifiable: expected renewal count is zero within the horizon")]
    NonIdentifiable,

    /// The interval width does not converge (transient process).
    #[error("divergent interval: {0}")]
    Divergent(String),

    #[error("interval already corrected")]
    AlreadyCorrected,

    #[error("invalid fit window: {0}")]
    InvalidWindow(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("malformed observation data: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
