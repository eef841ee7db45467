use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matching labeling: {0}")]
    InvalidLabeling(String),
    #[error("invalid matching matrix: {0}")]
    InvalidMatching(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("no candidate record pairs")]
    EmptyCandidates,
    #[error("instance too large for exact enumeration: {0} bipartite matchings (limit {1})")]
    TooLarge(u128, u128),
    #[error("loss configuration outside the estimator's regime: {0}")]
    LossRegime(String),
    #[error("posterior violates the one-to-one column-sum property at file-1 record {record}: sum = {sum}")]
    ColumnSum { record: usize, sum: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
