//! The JSON run report. Every number in it is reproducible from inputs,
//! configuration and seed; floats are serialized at 12 significant digits
//! under a versioned schema tag.

use serde::{Serialize, Serializer};

pub const REPORT_SCHEMA: &str = "wbe-report/1";

/// Round to 12 significant digits so report bytes are stable.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

/// An f64 that serializes at 12 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(sig12(self.0))
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub seed: u64,
    pub stages_run: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resample: Option<ResampleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression: Option<RegressionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forecast: Option<ForecastSummary>,
}

impl RunReport {
    pub fn new(seed: u64) -> Self {
        RunReport {
            schema: REPORT_SCHEMA,
            seed,
            stages_run: Vec::new(),
            warnings: Vec::new(),
            synth: None,
            preprocess: None,
            resample: None,
            smoothing: None,
            regression: None,
            evaluation: None,
            forecast: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serialization");
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub duration_days: usize,
    pub n_samples: usize,
    pub sampling: String,
    pub waves: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PreprocessSummary {
    pub samples_in: usize,
    pub points_out: usize,
    pub flow_outliers: usize,
    pub biomarker_substituted: usize,
    pub biomarker_values_dropped: usize,
    pub samples_unusable: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationSummary {
    pub nh4: Num,
    pub ntot: Num,
    pub cod: Num,
    pub source: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResampleSummary {
    pub mode: String,
    pub step_days: u32,
    pub len: usize,
    pub missing_slots: usize,
    pub gaps_filled: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingSummary {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighbors_kl: Option<usize>,
    pub selected_by: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loocv_rmse: Option<Num>,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LagRow {
    pub lag: usize,
    pub r: Num,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub value: Num,
    pub t: Num,
    pub p: Num,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub r_squared: Num,
    pub rmse: Num,
    pub loocv: Num,
    pub residual_sd: Num,
    pub dof: usize,
    pub coefficients: Vec<CoefficientSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionSummary {
    pub target: String,
    pub covariates: Vec<String>,
    pub n_rows: usize,
    pub best_lag: usize,
    pub best_lag_r: Num,
    pub significance_threshold: Num,
    pub lag_table: Vec<LagRow>,
    pub linear: FitSummary,
    pub polynomial: FitSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationCellSummary {
    pub method: String,
    pub parameter: String,
    pub transform: String,
    pub horizon_steps: usize,
    pub horizon_days: u32,
    pub rmse: Num,
    pub aic: Num,
    pub n_origins: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Num>,
    pub lambda_fitted_on: &'static str,
    pub warmup: usize,
    pub scoring: String,
    pub cells: Vec<EvaluationCellSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best: Option<EvaluationCellSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForecastSummary {
    pub method: String,
    pub parameter: String,
    pub transform: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Num>,
    pub horizon_steps: usize,
    pub horizon_days: u32,
    pub values: Vec<ForecastValue>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForecastValue {
    pub date: String,
    pub value: Num,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_rounds_to_twelve_digits() {
        assert_eq!(sig12(1.0 / 3.0), 0.333333333333);
        assert_eq!(sig12(0.0), 0.0);
        assert_eq!(sig12(123456789012345.0), 123456789012000.0);
        assert_eq!(sig12(-2.5e-7), -2.5e-7);
    }

    #[test]
    fn report_serializes_with_schema_tag() {
        let report = RunReport::new(7);
        let json = report.to_json();
        assert!(json.contains("\"schema\": \"wbe-report/1\""));
        assert!(json.contains("\"seed\": 7"));
    }

    #[test]
    fn num_serialization_is_rounded() {
        #[derive(Serialize)]
        struct W {
            x: Num,
        }
        let json = serde_json::to_string(&W { x: Num(1.0 / 3.0) }).unwrap();
        assert_eq!(json, "{\"x\":0.333333333333}");
    }
}
