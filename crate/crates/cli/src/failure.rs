use deepmatch::Error;
use serde::Serialize;

/// Failures the CLI distinguishes by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    MissingInput(String),
    /// A check the command exists to perform did not pass.
    Invariant(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::MissingInput(m) => write!(f, "missing input: {m}"),
            Failure::Invariant(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_MISSING_INPUT: i32 = 4;
pub const EXIT_BAD_DATA: i32 = 5;
pub const EXIT_INVARIANT: i32 = 6;

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

pub fn classify(err: &anyhow::Error) -> ErrorRecord {
    let (kind, exit_code) = err
        .chain()
        .find_map(|cause| {
            if let Some(f) = cause.downcast_ref::<Failure>() {
                return Some(match f {
                    Failure::Config(_) => ("config", EXIT_CONFIG),
                    Failure::MissingInput(_) => ("missing_input", EXIT_MISSING_INPUT),
                    Failure::Invariant(_) => ("invariant", EXIT_INVARIANT),
                });
            }
            if let Some(e) = cause.downcast_ref::<Error>() {
                return Some(match e {
                    Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                        ("missing_input", EXIT_MISSING_INPUT)
                    }
                    Error::Diverged { .. } | Error::AllRejected => ("invariant", EXIT_INVARIANT),
                    Error::InvalidArgument(_) => ("config", EXIT_CONFIG),
                    Error::Io(_) => ("io", EXIT_OTHER),
                    _ => ("bad_data", EXIT_BAD_DATA),
                });
            }
            if let Some(io) = cause.downcast_ref::<std::io::Error>() {
                if io.kind() == std::io::ErrorKind::NotFound {
                    return Some(("missing_input", EXIT_MISSING_INPUT));
                }
            }
            None
        })
        .unwrap_or(("other", EXIT_OTHER));
    ErrorRecord { kind, exit_code, message: format!("{err:#}") }
}
