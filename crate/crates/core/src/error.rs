//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("sample budget {budget} exceeds train size {train_len}")]
    BudgetExceedsTrain { budget: usize, train_len: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("unknown {entity} index {index}")]
    UnknownIndex { entity: &'static str, index: usize },

    #[error("missing leaderboard cell: {0}")]
    MissingCell(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
