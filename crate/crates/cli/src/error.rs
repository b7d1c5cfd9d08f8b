use patdrift_core::Error as CoreError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a path to an I/O error.
pub fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Schema,
    Config,
    Invariant,
    Other,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Other => 1,
            ErrorKind::Schema => 2,
            ErrorKind::Config => 3,
            ErrorKind::Invariant => 4,
        }
    }
}

impl CliError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => match e {
                CoreError::MalformedSymbol { .. }
                | CoreError::DuplicateSymbol(_)
                | CoreError::Schema { .. }
                | CoreError::Format(_)
                | CoreError::Csv(_) => ErrorKind::Schema,
                CoreError::Config(_) | CoreError::InvalidArgument(_) => ErrorKind::Config,
                CoreError::Invariant(_) | CoreError::MissingIndicator { .. } => ErrorKind::Invariant,
                _ => ErrorKind::Other,
            },
            CliError::Usage(_) => ErrorKind::Config,
            CliError::Json(e) if e.is_data() || e.is_syntax() => ErrorKind::Config,
            CliError::Csv(_) => ErrorKind::Schema,
            _ => ErrorKind::Other,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: ErrorKind,
    exit_code: i32,
    message: &'a str,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

/// One-line JSON document for stderr.
pub fn error_json(kind: ErrorKind, message: &str) -> String {
    let report = ErrorReport { error: ErrorBody { kind, exit_code: kind.exit_code(), message } };
    serde_json::to_string(&report).expect("error report serializes")
}
