//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An operation received an empty series or sample set.
    EmptyInput,
    /// A series is shorter than the operation requires.
    TooShort { needed: usize, got: usize },
    /// A value is NaN or infinite where a finite number is required.
    NonFinite,
    /// Scattered-series dates are not strictly increasing.
    UnsortedDates,
    /// The grid step is not one of the supported spacings.
    BadStep { step_days: u32 },
    /// Block averaging only supports weekly slots.
    WeeklyOnly { step_days: u32 },
    /// The requested point lies outside the sampled hull.
    ExtrapolationRefused,
    /// The series contains missing entries that must be filled first.
    Gaps,
    /// A centered window must have odd length.
    EvenWindow { k: usize },
    /// A smoothing window exceeds the series length.
    WindowTooLong { k: usize, len: usize },
    /// No candidate parameter was applicable to the series.
    NoViableCandidate,
    /// A local fit neighborhood collapsed onto a single abscissa.
    DegenerateNeighborhood,
    /// Two series share no (or too few) common dates.
    NoOverlap { needed: usize, got: usize },
    /// Paired inputs differ in length.
    LengthMismatch { left: usize, right: usize },
    /// A statistic is undefined on a constant series.
    ConstantSeries,
    /// MSIM is undefined when |x| + |y| = 0 for a pair.
    ZeroDenominator { index: usize },
    /// The operation requires strictly positive data.
    NonPositive,
    /// AIC in least-squares form is undefined at SSE = 0.
    PerfectFit,
    /// A cross-validation fold failed to fit.
    LoocvFold { fold: usize, cause: String },
    /// No biomarker was available to normalize the sample.
    NormalizationImpossible,
    /// A biomarker concentration of zero cannot normalize.
    ZeroBiomarker,
    /// Calibration requires samples with all biomarkers and flow.
    InsufficientCalibrationSamples { needed: usize, got: usize },
    /// The flow-percentile rule needs a long enough history.
    FlowHistoryTooShort { needed: usize, got: usize },
    /// Every biomarker is a low-side outlier; no surrogate applies.
    SampleUnusable,
    /// The design matrix is rank deficient.
    SingularDesign,
    /// No residual degrees of freedom remain.
    DegreesOfFreedom { n: usize, params: usize },
    /// Feature dimension differs from the fitted model.
    DimensionMismatch { expected: usize, got: usize },
    /// The confidence level must lie strictly inside (0, 1).
    BadLevel,
    /// The SES smoothing parameter must lie in (0, 1].
    BadAlpha,
    /// Box-Cox inversion left the transform's domain.
    BoxCoxDomain,
    /// Scenario parameters violate an invariant.
    InvalidScenario(String),
    /// Catch-all for precondition violations.
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput => write!(f, "empty input"),
            Error::TooShort { needed, got } => {
                write!(
                    f,
                    "series too short: need at least {needed} points, got {got}"
                )
            }
            Error::NonFinite => write!(f, "non-finite value"),
            Error::UnsortedDates => write!(f, "dates must be strictly increasing"),
            Error::BadStep { step_days } => {
                write!(f, "unsupported grid step of {step_days} days (use 1 or 7)")
            }
            Error::WeeklyOnly { step_days } => {
                write!(f, "block averaging requires 7-day slots, got {step_days}")
            }
            Error::ExtrapolationRefused => write!(f, "extrapolation refused"),
            Error::Gaps => write!(f, "gaps must be filled before this operation"),
            Error::EvenWindow { k } => write!(f, "window must be odd, got {k}"),
            Error::WindowTooLong { k, len } => {
                write!(f, "window {k} exceeds series length {len}")
            }
            Error::NoViableCandidate => write!(f, "no viable candidate parameter"),
            Error::DegenerateNeighborhood => write!(f, "degenerate local neighborhood"),
            Error::NoOverlap { needed, got } => {
                write!(
                    f,
                    "insufficient overlap: need {needed} shared dates, got {got}"
                )
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::ConstantSeries => write!(f, "undefined on a constant series"),
            Error::ZeroDenominator { index } => {
                write!(f, "zero denominator at pair {index}")
            }
            Error::NonPositive => write!(f, "Box-Cox requires positive data"),
            Error::PerfectFit => write!(f, "perfect fit, AIC undefined in this form"),
            Error::LoocvFold { fold, cause } => {
                write!(f, "cross-validation fold {fold} failed: {cause}")
            }
            Error::NormalizationImpossible => write!(f, "normalization impossible"),
            Error::ZeroBiomarker => write!(f, "zero biomarker"),
            Error::InsufficientCalibrationSamples { needed, got } => write!(
                f,
                "calibration needs {needed} samples with all biomarkers and flow, got {got}"
            ),
            Error::FlowHistoryTooShort { needed, got } => {
                write!(f, "flow history too short: need {needed} values, got {got}")
            }
            Error::SampleUnusable => write!(f, "sample unusable"),
            Error::SingularDesign => write!(f, "singular design"),
            Error::DegreesOfFreedom { n, params } => {
                write!(
                    f,
                    "no residual degrees of freedom ({n} rows, {params} parameters)"
                )
            }
            Error::DimensionMismatch { expected, got } => {
                write!(
                    f,
                    "dimension mismatch: expected {expected} features, got {got}"
                )
            }
            Error::BadLevel => write!(f, "confidence level must lie in (0, 1)"),
            Error::BadAlpha => write!(f, "smoothing parameter must lie in (0, 1]"),
            Error::BoxCoxDomain => write!(f, "Box-Cox inversion out of domain"),
            Error::InvalidScenario(msg) => write!(f, "invalid scenario: {msg}"),
            Error::InvalidInput(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {}
