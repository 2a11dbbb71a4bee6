use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] pwls::Error),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("column selected twice: {0:?}")]
    DuplicateColumn(String),

    #[error("{0}")]
    Usage(String),

    #[error("bad benchmark config: {0}")]
    Config(String),

    #[error("equivalence check failed: beta gap {beta_gap:e}, sigma gap {sigma_gap:e}")]
    EquivalenceFailed { beta_gap: f64, sigma_gap: f64 },
}

impl CliError {
    /// Stable identifier printed in front of the message.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Read { .. } => "read_failed",
            CliError::Write { .. } => "write_failed",
            CliError::Csv(_) => "malformed_csv",
            CliError::BadRow { .. } => "bad_row",
            CliError::UnknownColumn(_) => "unknown_column",
            CliError::DuplicateColumn(_) => "duplicate_column",
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "bad_config",
            CliError::EquivalenceFailed { .. } => "equivalence_failed",
        }
    }

    /// `error[code]: message` on a single line.
    pub fn diagnostic(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.code())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
