//! CLI error type with exit-code classification: 1 usage, 2 data, 3 numeric.

use std::fmt;

use wbe_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration (exit 1).
    Usage(String),
    /// Malformed or insufficient input data (exit 2).
    Data {
        stage: &'static str,
        message: String,
    },
    /// Numeric failure inside a stage (exit 3).
    Numeric {
        stage: &'static str,
        source: CoreError,
    },
    Io {
        stage: &'static str,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } | CliError::Io { .. } => 2,
            CliError::Numeric { .. } => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data { .. } => "data",
            CliError::Numeric { .. } => "numeric",
            CliError::Io { .. } => "io",
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "cli",
            CliError::Data { stage, .. }
            | CliError::Numeric { stage, .. }
            | CliError::Io { stage, .. } => stage,
        }
    }

    /// One-line JSON for stderr so callers can parse failures.
    pub fn to_json(&self) -> String {
        let message = match self {
            CliError::Usage(m) => m.clone(),
            CliError::Data { message, .. } | CliError::Io { message, .. } => message.clone(),
            CliError::Numeric { source, .. } => source.to_string(),
        };
        format!(
            "{{\"error\":{{\"kind\":\"{}\",\"stage\":\"{}\",\"exit_code\":{},\"message\":{}}}}}",
            self.kind(),
            self.stage(),
            self.exit_code(),
            serde_json::to_string(&message).unwrap_or_else(|_| "\"\"".into())
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data { stage, message } => write!(f, "data error in {stage}: {message}"),
            CliError::Numeric { stage, source } => write!(f, "numeric error in {stage}: {source}"),
            CliError::Io { stage, message } => write!(f, "io error in {stage}: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Classify a core error raised in `stage`. Shape and availability problems
/// count as data errors, genuine numerical breakdowns as numeric.
pub fn from_core(stage: &'static str, e: CoreError) -> CliError {
    use CoreError::*;
    match e {
        EmptyInput
        | TooShort { .. }
        | NonFinite
        | UnsortedDates
        | Gaps
        | LengthMismatch { .. }
        | NoOverlap { .. }
        | FlowHistoryTooShort { .. }
        | InsufficientCalibrationSamples { .. }
        | WindowTooLong { .. }
        | NoViableCandidate
        | ExtrapolationRefused
        | DegreesOfFreedom { .. }
        | InvalidInput(_)
        | InvalidScenario(_)
        | BadStep { .. }
        | WeeklyOnly { .. }
        | EvenWindow { .. }
        | DimensionMismatch { .. }
        | BadLevel
        | BadAlpha => CliError::Data {
            stage,
            message: e.to_string(),
        },
        _ => CliError::Numeric { stage, source: e },
    }
}

pub fn io_err(stage: &'static str, e: std::io::Error) -> CliError {
    CliError::Io {
        stage,
        message: e.to_string(),
    }
}
