//! Pipeline configuration: a flat, line-based `key = value` format with
//! dotted section prefixes. Text from `#` to the end of a line is a
//! comment, blank lines are ignored, unknown keys are errors, and every
//! key has a default, so an empty file is a valid configuration.

use std::str::FromStr;

use wbe_core::forecast::{ErrorScoring, TransformKind};
use wbe_core::preprocess::{Biomarker, NormalizationPolicy};
use wbe_core::synthetic::{SamplingSchedule, Wave};
use wbe_core::{BiomarkerConfig, Scenario, TimePoint};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    WeeklyBlock,
    DailyLinear,
    DailyShepard,
}

impl ResampleMode {
    pub fn step_days(&self) -> u32 {
        match self {
            ResampleMode::WeeklyBlock => 7,
            _ => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ResampleMode::WeeklyBlock => "weekly_block",
            ResampleMode::DailyLinear => "daily_linear",
            ResampleMode::DailyShepard => "daily_shepard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherMethod {
    /// SMA with the LOOCV-selected window.
    Auto,
    Sma,
    Loess,
    /// Pass the resampled series through unsmoothed; downstream stages
    /// refuse it unless `--allow-raw` is given.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionTarget {
    Incidence,
    NewInfections,
    None,
}

impl RegressionTarget {
    pub fn label(&self) -> &'static str {
        match self {
            RegressionTarget::Incidence => "incidence",
            RegressionTarget::NewInfections => "new_infections",
            RegressionTarget::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Covariate {
    Tests,
    VariantShare,
}

impl Covariate {
    pub fn label(&self) -> &'static str {
        match self {
            Covariate::Tests => "tests",
            Covariate::VariantShare => "variant_share",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecastMethodChoice {
    Ses,
    Ar,
    /// Take the best cell of the post-sample grid.
    Grid,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub biomarker: BiomarkerConfig,
    /// Estimate calibration factors from the data before normalizing.
    pub calibrate_auto: bool,
    /// Apply the 90th-percentile flow rule when enough history exists.
    pub flow_rule: bool,
    pub resampling: ResampleMode,
    pub shepard_power: f64,
    pub smoother: SmootherMethod,
    pub window_k: Option<usize>,
    pub neighbors_kl: Option<usize>,
    pub sma_candidates: Vec<usize>,
    pub loess_candidates: Vec<usize>,
    pub target: RegressionTarget,
    pub max_lag: Option<usize>,
    pub covariates: Vec<Covariate>,
    /// Catchment population for the per-100k incidence scaling.
    pub population: f64,
    pub polynomial_order: usize,
    pub confidence_level: f64,
    pub forecast_method: ForecastMethodChoice,
    pub forecast_transform: Option<TransformKind>,
    pub ses_alpha: f64,
    pub ar_order: usize,
    pub horizon_days: u32,
    pub eval_ses_alphas: Vec<f64>,
    pub eval_ar_orders: Vec<usize>,
    pub eval_transforms: Vec<TransformKind>,
    pub eval_horizons_days: Vec<u32>,
    pub eval_p_max: usize,
    pub eval_scoring: ErrorScoring,
    pub synth: Scenario,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            biomarker: BiomarkerConfig::default(),
            calibrate_auto: false,
            flow_rule: true,
            resampling: ResampleMode::WeeklyBlock,
            shepard_power: 2.0,
            smoother: SmootherMethod::Auto,
            window_k: None,
            neighbors_kl: None,
            sma_candidates: vec![3, 5, 7, 9],
            loess_candidates: vec![7, 9, 11, 15, 21],
            target: RegressionTarget::Incidence,
            max_lag: None,
            covariates: vec![Covariate::Tests, Covariate::VariantShare],
            population: 2.0e6,
            polynomial_order: 3,
            confidence_level: 0.90,
            forecast_method: ForecastMethodChoice::Ar,
            forecast_transform: None,
            ses_alpha: 0.1,
            ar_order: 5,
            horizon_days: 7,
            eval_ses_alphas: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            eval_ar_orders: (1..=10).collect(),
            eval_transforms: vec![
                TransformKind::None,
                TransformKind::Difference,
                TransformKind::BoxCoxDifference,
            ],
            eval_horizons_days: vec![7, 14],
            eval_p_max: 10,
            eval_scoring: ErrorScoring::HorizonEndpoint,
            synth: Scenario::default(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| usage(format!("config: cannot parse '{value}' for key '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let trimmed = value.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|item| parse_num::<T>(key, item))
        .collect()
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            // everything from '#' to end of line is a comment
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "config line {}: expected 'key = value'",
                    lineno + 1
                ))
            })?;
            cfg.apply(key.trim(), value.trim())
                .map_err(|e| usage(format!("config line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "biomarker.policy" => {
                self.biomarker.policy = match value {
                    "fallback" => NormalizationPolicy::FallbackOrder,
                    "mean" => NormalizationPolicy::MeanOfAvailable,
                    other => return Err(usage(format!("unknown policy '{other}'"))),
                }
            }
            "biomarker.fallback_order" => {
                let order: Result<Vec<Biomarker>> = value
                    .split(',')
                    .map(|b| b.parse().map_err(|e: wbe_core::Error| usage(e.to_string())))
                    .collect();
                self.biomarker.fallback_order = order?;
            }
            "biomarker.calibrate" => {
                self.calibrate_auto = match value {
                    "auto" => true,
                    "fixed" => false,
                    other => return Err(usage(format!("unknown calibrate mode '{other}'"))),
                }
            }
            "biomarker.load.nh4" => self.biomarker.loads.nh4 = parse_num(key, value)?,
            "biomarker.load.ntot" => self.biomarker.loads.ntot = parse_num(key, value)?,
            "biomarker.load.cod" => self.biomarker.loads.cod = parse_num(key, value)?,
            "biomarker.calibration.nh4" => self.biomarker.calibration.nh4 = parse_num(key, value)?,
            "biomarker.calibration.ntot" => {
                self.biomarker.calibration.ntot = parse_num(key, value)?
            }
            "biomarker.calibration.cod" => self.biomarker.calibration.cod = parse_num(key, value)?,
            "biomarker.cap.nh4" => self.biomarker.outlier_caps.nh4 = Some(parse_num(key, value)?),
            "biomarker.cap.ntot" => self.biomarker.outlier_caps.ntot = Some(parse_num(key, value)?),
            "biomarker.cap.cod" => self.biomarker.outlier_caps.cod = Some(parse_num(key, value)?),
            "outliers.flow_rule" => {
                self.flow_rule = match value {
                    "auto" => true,
                    "off" => false,
                    other => return Err(usage(format!("unknown flow rule '{other}'"))),
                }
            }
            "resampling.mode" => {
                self.resampling = match value {
                    "weekly_block" => ResampleMode::WeeklyBlock,
                    "daily_linear" => ResampleMode::DailyLinear,
                    "daily_shepard" => ResampleMode::DailyShepard,
                    other => return Err(usage(format!("unknown resampling mode '{other}'"))),
                }
            }
            "resampling.shepard_power" => self.shepard_power = parse_num(key, value)?,
            "smoother.method" => {
                self.smoother = match value {
                    "auto" => SmootherMethod::Auto,
                    "sma" => SmootherMethod::Sma,
                    "loess" => SmootherMethod::Loess,
                    "none" => SmootherMethod::None,
                    other => return Err(usage(format!("unknown smoother '{other}'"))),
                }
            }
            "smoother.window_k" => {
                self.window_k = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "smoother.neighbors_kl" => {
                self.neighbors_kl = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "smoother.sma_candidates" => self.sma_candidates = parse_list(key, value)?,
            "smoother.loess_candidates" => self.loess_candidates = parse_list(key, value)?,
            "regression.target" => {
                self.target = match value {
                    "incidence" => RegressionTarget::Incidence,
                    "new_infections" => RegressionTarget::NewInfections,
                    "none" => RegressionTarget::None,
                    other => return Err(usage(format!("unknown regression target '{other}'"))),
                }
            }
            "regression.max_lag" => {
                self.max_lag = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "regression.covariates" => {
                let mut covs = Vec::new();
                for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    covs.push(match item {
                        "tests" => Covariate::Tests,
                        "variant_share" => Covariate::VariantShare,
                        other => return Err(usage(format!("unknown covariate '{other}'"))),
                    });
                }
                self.covariates = covs;
            }
            "regression.population" => self.population = parse_num(key, value)?,
            "regression.polynomial_order" => self.polynomial_order = parse_num(key, value)?,
            "regression.confidence_level" => self.confidence_level = parse_num(key, value)?,
            "forecast.method" => {
                self.forecast_method = match value {
                    "ses" => ForecastMethodChoice::Ses,
                    "ar" => ForecastMethodChoice::Ar,
                    "grid" => ForecastMethodChoice::Grid,
                    other => return Err(usage(format!("unknown forecast method '{other}'"))),
                }
            }
            "forecast.transform" => {
                self.forecast_transform = if value == "default" {
                    None
                } else {
                    Some(
                        value
                            .parse()
                            .map_err(|e: wbe_core::Error| usage(e.to_string()))?,
                    )
                }
            }
            "forecast.ses_alpha" => self.ses_alpha = parse_num(key, value)?,
            "forecast.ar_order" => self.ar_order = parse_num(key, value)?,
            "forecast.horizon_days" => self.horizon_days = parse_num(key, value)?,
            "evaluate.ses_alphas" => self.eval_ses_alphas = parse_list(key, value)?,
            "evaluate.ar_orders" => self.eval_ar_orders = parse_list(key, value)?,
            "evaluate.transforms" => {
                let kinds: Result<Vec<TransformKind>> = value
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|e: wbe_core::Error| usage(e.to_string()))
                    })
                    .collect();
                self.eval_transforms = kinds?;
            }
            "evaluate.horizons_days" => self.eval_horizons_days = parse_list(key, value)?,
            "evaluate.p_max" => self.eval_p_max = parse_num(key, value)?,
            "evaluate.scoring" => {
                self.eval_scoring = match value {
                    "endpoint" => ErrorScoring::HorizonEndpoint,
                    "averaged" => ErrorScoring::AveragedOverHorizon,
                    other => return Err(usage(format!("unknown scoring '{other}'"))),
                }
            }
            "synth.start" => {
                self.synth.start = value
                    .parse::<TimePoint>()
                    .map_err(|e| usage(e.to_string()))?
            }
            "synth.duration_days" => self.synth.duration_days = parse_num(key, value)?,
            "synth.population" => self.synth.population = parse_num(key, value)?,
            "synth.shed_load" => self.synth.shed_load = parse_num(key, value)?,
            "synth.flow_base" => self.synth.flow_base = parse_num(key, value)?,
            "synth.sampling" => {
                self.synth.sampling = value
                    .parse::<SamplingSchedule>()
                    .map_err(|e| usage(e.to_string()))?
            }
            "synth.noise.virus" => self.synth.noise.virus = parse_num(key, value)?,
            "synth.noise.biomarker" => self.synth.noise.biomarker = parse_num(key, value)?,
            "synth.noise.flow" => self.synth.noise.flow = parse_num(key, value)?,
            "synth.noise.indicator" => self.synth.noise.indicator = parse_num(key, value)?,
            "synth.rain_probability" => self.synth.rain_probability = parse_num(key, value)?,
            "synth.detection_fraction" => self.synth.detection_fraction = parse_num(key, value)?,
            "synth.report_lag_days" => self.synth.report_lag_days = parse_num(key, value)?,
            "synth.tests_per_day" => self.synth.tests_per_day = parse_num(key, value)?,
            "synth.waves" => {
                let mut waves = Vec::new();
                for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let parts: Vec<&str> = item.split(':').collect();
                    if parts.len() != 3 {
                        return Err(usage(format!(
                            "wave '{item}' must be peak_day:peak_prevalence:width_days"
                        )));
                    }
                    waves.push(Wave {
                        peak_day: parse_num(key, parts[0])?,
                        peak_prevalence: parse_num(key, parts[1])?,
                        width_days: parse_num(key, parts[2])?,
                    });
                }
                self.synth.waves = waves;
            }
            other => return Err(usage(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.biomarker
            .validate()
            .map_err(|e| usage(format!("biomarker config: {e}")))?;
        if self.resampling == ResampleMode::WeeklyBlock && self.smoother == SmootherMethod::Loess {
            return Err(usage(
                "weekly resampling cannot feed the daily LOESS smoother; \
                 use resampling.mode = daily_linear or smoother.method = sma",
            ));
        }
        if let Some(k) = self.window_k {
            if k % 2 == 0 {
                return Err(usage(format!("smoother.window_k must be odd, got {k}")));
            }
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(usage("regression.confidence_level must be in (0, 1)"));
        }
        if self.population <= 0.0 {
            return Err(usage("regression.population must be positive"));
        }
        if self.horizon_days == 0 {
            return Err(usage("forecast.horizon_days must be positive"));
        }
        if self.eval_horizons_days.is_empty() {
            return Err(usage("evaluate.horizons_days must not be empty"));
        }
        if self.polynomial_order < 1 {
            return Err(usage("regression.polynomial_order must be at least 1"));
        }
        Ok(())
    }

    /// Horizon in grid steps for a given grid; errors when the requested
    /// number of days is not a multiple of the step.
    pub fn horizon_steps(&self, days: u32, step_days: u32) -> Result<usize> {
        if !days.is_multiple_of(step_days) || days == 0 {
            return Err(usage(format!(
                "a horizon of {days} days does not fit a {step_days}-day grid"
            )));
        }
        Ok((days / step_days) as usize)
    }

    /// Default lag search range: two weeks on a daily grid, four steps on a
    /// weekly one.
    pub fn lag_range(&self, step_days: u32) -> usize {
        self.max_lag.unwrap_or(if step_days == 7 { 4 } else { 14 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let cfg = PipelineConfig::parse("").unwrap();
        assert_eq!(cfg.resampling, ResampleMode::WeeklyBlock);
        assert_eq!(cfg.biomarker.loads.cod, 120.0);
        assert_eq!(cfg.horizon_days, 7);
    }

    #[test]
    fn comments_and_overrides() {
        let text = "\n# comment\nresampling.mode = daily_linear\nsmoother.method = loess   # inline comment\nsmoother.neighbors_kl = 11\nforecast.method = ses\nforecast.ses_alpha = 0.7\n";
        let cfg = PipelineConfig::parse(text).unwrap();
        assert_eq!(cfg.resampling, ResampleMode::DailyLinear);
        assert_eq!(cfg.smoother, SmootherMethod::Loess);
        assert_eq!(cfg.neighbors_kl, Some(11));
        assert_eq!(cfg.forecast_method, ForecastMethodChoice::Ses);
        assert_eq!(cfg.ses_alpha, 0.7);
    }

    #[test]
    fn unknown_key_is_rejected_with_line_number() {
        let err = PipelineConfig::parse("nope = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn weekly_block_plus_loess_is_inconsistent() {
        let err = PipelineConfig::parse("smoother.method = loess\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn waves_parse() {
        let cfg = PipelineConfig::parse("synth.waves = 90:0.004:25, 250:0.008:30\n").unwrap();
        assert_eq!(cfg.synth.waves.len(), 2);
        assert_eq!(cfg.synth.waves[1].peak_day, 250.0);
        assert!(PipelineConfig::parse("synth.waves = 90:0.004\n").is_err());
    }

    #[test]
    fn horizon_steps_must_divide() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.horizon_steps(7, 7).unwrap(), 1);
        assert_eq!(cfg.horizon_steps(14, 1).unwrap(), 14);
        assert!(cfg.horizon_steps(10, 7).is_err());
    }
}
