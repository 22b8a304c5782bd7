//! Stage orchestration in the recommended order: normalize, screen
//! outliers, resample to an equal grid, smooth, then regression against the
//! epidemic indicator, post-sample evaluation and forecasting. Stage outputs
//! are CSV files plus one JSON run report; all randomness comes from the
//! single seed.

use std::collections::BTreeMap;
use std::path::Path;

use wbe_core::forecast::{
    boxcox_mle, fit_and_forecast, fit_transform, post_sample_evaluate, walk_forward,
    EvaluationCell, EvaluationReport, EvaluationSpec, Method, TransformKind,
};
use wbe_core::metrics::significance_threshold;
use wbe_core::preprocess::{
    calibrate_biomarkers, flag_flow_outliers, normalize, screen_biomarker, BiomarkerFences,
};
use wbe_core::regression::{
    confidence_band, cross_correlate, fit_linear, fit_polynomial, predict, DesignMatrix,
    RegressionFit,
};
use wbe_core::series::{RegularSeries, ScatteredSeries};
use wbe_core::smoothing::{
    loess_on_grid, match_loess_to_reference, select_sma_window, sma, sma_loocv,
};
use wbe_core::synthetic::{generate, SamplingSchedule};
use wbe_core::{NormalizedPoint, Sample, TimePoint};

use crate::config::{
    Covariate, ForecastMethodChoice, PipelineConfig, RegressionTarget, ResampleMode, SmootherMethod,
};
use crate::csv_io::{
    fmt_value, long_format_csv, read_input, regular_series_csv, write_atomic, IngestData,
    PipelineInput,
};
use crate::error::{from_core, CliError, Result};
use crate::logger;
use crate::report::{
    CalibrationSummary, CoefficientSummary, EvaluationCellSummary, EvaluationSummary, FitSummary,
    ForecastSummary, ForecastValue, LagRow, Num, PreprocessSummary, RegressionSummary,
    ResampleSummary, RunReport, SmoothingSummary, SynthSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Preprocess,
    Resample,
    Smooth,
    Regress,
    Evaluate,
    Forecast,
}

impl Stage {
    pub fn parse(name: &str) -> Result<Stage> {
        match name {
            "preprocess" => Ok(Stage::Preprocess),
            "resample" => Ok(Stage::Resample),
            "smooth" => Ok(Stage::Smooth),
            "regress" => Ok(Stage::Regress),
            "evaluate" => Ok(Stage::Evaluate),
            "forecast" => Ok(Stage::Forecast),
            other => Err(CliError::Usage(format!(
                "unknown stage '{other}' (expected preprocess, resample, smooth, regress, evaluate or forecast)"
            ))),
        }
    }
}

/// Which stages a command executes.
#[derive(Debug, Clone, Copy)]
pub struct StagePlan {
    pub resample: bool,
    pub smooth: bool,
    pub regress: bool,
    pub evaluate: bool,
    pub forecast: bool,
}

impl StagePlan {
    /// Everything in the recommended order, optionally cut after a stage.
    pub fn full_run(upto: Option<Stage>) -> StagePlan {
        let upto = upto.unwrap_or(Stage::Forecast);
        StagePlan {
            resample: upto >= Stage::Resample,
            smooth: upto >= Stage::Smooth,
            regress: upto >= Stage::Regress,
            evaluate: upto >= Stage::Evaluate,
            forecast: upto >= Stage::Forecast,
        }
    }

    pub fn preprocess_only() -> StagePlan {
        StagePlan {
            resample: false,
            smooth: false,
            regress: false,
            evaluate: false,
            forecast: false,
        }
    }

    pub fn through_smooth() -> StagePlan {
        StagePlan {
            resample: true,
            smooth: true,
            ..Self::preprocess_only()
        }
    }

    pub fn regress_only() -> StagePlan {
        StagePlan {
            regress: true,
            ..Self::through_smooth()
        }
    }

    pub fn evaluate_only() -> StagePlan {
        StagePlan {
            evaluate: true,
            ..Self::through_smooth()
        }
    }

    /// Forecast needs the evaluation grid only when the method is `grid`.
    pub fn forecast_only(need_grid: bool) -> StagePlan {
        StagePlan {
            evaluate: need_grid,
            forecast: true,
            ..Self::through_smooth()
        }
    }
}

/// Generate a synthetic scenario and write it in the ingest schema.
pub fn run_synth(cfg: &PipelineConfig, outdir: &Path, seed: u64) -> Result<RunReport> {
    std::fs::create_dir_all(outdir).map_err(|e| crate::error::io_err("synth", e))?;
    let mut scenario = cfg.synth.clone();
    scenario.seed = seed;
    let data = generate(&scenario).map_err(|e| from_core("synth", e))?;

    // ingest-schema CSV: one row per day, sample cells only on sampled days
    let sample_of: BTreeMap<TimePoint, &Sample> =
        data.samples.iter().map(|s| (s.date, s)).collect();
    let mut csv = String::from(
        "date,c_virus_cpl,flow_m3d,nh4_mgl,cod_mgl,ntot_mgl,tests,variant_share_pct,new_infections\n",
    );
    let opt = |v: Option<f64>| v.map(fmt_value).unwrap_or_default();
    for i in 0..scenario.duration_days {
        let date = scenario.start.plus_days(i as i64);
        let (virus, flow, nh4, cod, ntot) = match sample_of.get(&date) {
            Some(s) => (Some(s.c_virus), s.flow, s.c_nh4, s.c_cod, s.c_ntot),
            None => (None, None, None, None, None),
        };
        csv.push_str(&format!(
            "{date},{},{},{},{},{},{},{},{}\n",
            opt(virus),
            opt(flow),
            opt(nh4),
            opt(cod),
            opt(ntot),
            opt(data.tests.value_at(date)),
            opt(data.variant_share.value_at(date)),
            opt(data.new_infections.value_at(date)),
        ));
    }
    write_atomic(&outdir.join("input.csv"), &csv)?;

    let truth = long_format_csv(&[
        ("prevalence", data.truth_prevalence.iter_present().collect()),
        (
            "new_infections",
            data.new_infections.iter_present().collect(),
        ),
        ("tests", data.tests.iter_present().collect()),
        ("variant_share", data.variant_share.iter_present().collect()),
    ]);
    write_atomic(&outdir.join("truth.csv"), &truth)?;

    let mut report = RunReport::new(seed);
    report.stages_run.push("synth".into());
    report.synth = Some(SynthSummary {
        duration_days: scenario.duration_days,
        n_samples: data.samples.len(),
        sampling: match scenario.sampling {
            SamplingSchedule::Daily => "daily".into(),
            SamplingSchedule::TwiceWeekly => "twice_weekly".into(),
            SamplingSchedule::Irregular => "irregular".into(),
        },
        waves: scenario.waves.len(),
    });
    write_atomic(&outdir.join("report.json"), &report.to_json())?;
    Ok(report)
}

/// Everything the stages pass between each other.
struct PipelineState {
    indicators: Option<IngestData>,
    signal: ScatteredSeries<f64>,
    resampled: Option<RegularSeries<f64>>,
    filled: Option<RegularSeries<f64>>,
    smoothed: Option<RegularSeries<f64>>,
    evaluation: Option<EvaluationReport<f64>>,
}

pub fn run_pipeline(
    cfg: &PipelineConfig,
    input: &Path,
    outdir: &Path,
    seed: u64,
    allow_raw: bool,
    plan: StagePlan,
) -> Result<RunReport> {
    std::fs::create_dir_all(outdir).map_err(|e| crate::error::io_err("ingest", e))?;
    let mut report = RunReport::new(seed);

    logger::info("stage: ingest + preprocess");
    let mut state = match read_input(input)? {
        PipelineInput::Raw(data) => {
            report.warnings.extend(data.warnings.iter().cloned());
            let signal = preprocess_stage(cfg, &data, outdir, &mut report)?;
            report.stages_run.push("preprocess".into());
            PipelineState {
                indicators: Some(data),
                signal,
                resampled: None,
                filled: None,
                smoothed: None,
                evaluation: None,
            }
        }
        PipelineInput::Series(signal) => {
            report
                .warnings
                .push("input is a date,value series; preprocess skipped".into());
            PipelineState {
                indicators: None,
                signal,
                resampled: None,
                filled: None,
                smoothed: None,
                evaluation: None,
            }
        }
    };

    if plan.resample {
        logger::info("stage: resample");
        resample_stage(cfg, &mut state, outdir, &mut report)?;
        report.stages_run.push("resample".into());
    }
    if plan.smooth {
        logger::info("stage: smooth");
        smooth_stage(cfg, &mut state, outdir, &mut report)?;
        report.stages_run.push("smooth".into());
    }

    let raw_gate = |stage: &'static str| -> Result<()> {
        if cfg.smoother == SmootherMethod::None && !allow_raw {
            return Err(CliError::Usage(format!(
                "refusing to run {stage} on an un-smoothed series; pass --allow-raw to override"
            )));
        }
        Ok(())
    };

    if plan.regress && cfg.target != RegressionTarget::None {
        logger::info("stage: regress");
        raw_gate("regression")?;
        regress_stage(cfg, &state, outdir, &mut report)?;
        report.stages_run.push("regress".into());
    }
    if plan.evaluate {
        logger::info("stage: evaluate");
        raw_gate("post-sample evaluation")?;
        evaluate_stage(cfg, &mut state, outdir, &mut report)?;
        report.stages_run.push("evaluate".into());
    }
    if plan.forecast {
        logger::info("stage: forecast");
        raw_gate("forecasting")?;
        forecast_stage(cfg, &state, outdir, &mut report)?;
        report.stages_run.push("forecast".into());
    }

    write_atomic(&outdir.join("report.json"), &report.to_json())?;
    Ok(report)
}

fn preprocess_stage(
    cfg: &PipelineConfig,
    data: &IngestData,
    outdir: &Path,
    report: &mut RunReport,
) -> Result<ScatteredSeries<f64>> {
    const STAGE: &str = "preprocess";
    if data.samples.is_empty() {
        return Err(CliError::Data {
            stage: STAGE,
            message: "no samples in input".into(),
        });
    }

    let mut bio = cfg.biomarker.clone();
    let mut calibration = None;
    if cfg.calibrate_auto {
        match calibrate_biomarkers(&data.samples, &bio) {
            Ok(factors) => {
                bio.calibration = factors;
                calibration = Some(CalibrationSummary {
                    nh4: Num(factors.nh4),
                    ntot: Num(factors.ntot),
                    cod: Num(factors.cod),
                    source: "estimated".into(),
                });
            }
            Err(e) => {
                report
                    .warnings
                    .push(format!("calibration fell back to configured factors: {e}"));
            }
        }
    }

    let fences = BiomarkerFences::from_samples(&data.samples).map_err(|e| from_core(STAGE, e))?;

    let mut screened = Vec::with_capacity(data.samples.len());
    let mut substituted = 0usize;
    let mut dropped_values = 0usize;
    let mut unusable = 0usize;
    for sample in &data.samples {
        match screen_biomarker(sample, &fences, &bio) {
            Ok(outcome) => {
                substituted += usize::from(outcome.substituted.is_some());
                dropped_values += outcome.dropped.len();
                screened.push((outcome.sample, outcome.substituted.is_some()));
            }
            Err(wbe_core::Error::SampleUnusable) => {
                unusable += 1;
                report.warnings.push(format!(
                    "sample {} unusable: every biomarker is a low-side outlier",
                    sample.date
                ));
            }
            Err(e) => return Err(from_core(STAGE, e)),
        }
    }

    let flows: Vec<f64> = data.samples.iter().filter_map(|s| s.flow).collect();
    let flow_flags = if cfg.flow_rule && flows.len() >= 365 {
        let samples_only: Vec<Sample> = screened.iter().map(|(s, _)| s.clone()).collect();
        flag_flow_outliers(&samples_only, &flows).map_err(|e| from_core(STAGE, e))?
    } else {
        if cfg.flow_rule {
            report.warnings.push(format!(
                "flow outlier rule skipped: need 365 flow values, have {}",
                flows.len()
            ));
        }
        vec![false; screened.len()]
    };

    let mut points: Vec<NormalizedPoint> = Vec::with_capacity(screened.len());
    for ((sample, was_substituted), flow_outlier) in screened.iter().zip(&flow_flags) {
        match normalize(sample, &bio) {
            Ok(mut point) => {
                point.flow_outlier = *flow_outlier;
                point.biomarker_substituted = *was_substituted;
                points.push(point);
            }
            Err(e) => {
                unusable += 1;
                report
                    .warnings
                    .push(format!("sample {} not normalized: {e}", sample.date));
            }
        }
    }

    let mut csv = String::from("date,value,biomarker_used,flow_outlier,biomarker_substituted\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            p.date,
            fmt_value(p.l_virus),
            p.biomarker_used,
            p.flow_outlier,
            p.biomarker_substituted
        ));
    }
    write_atomic(&outdir.join("normalized.csv"), &csv)?;

    // flow-flagged samples are excluded from the downstream series
    let kept: Vec<(TimePoint, f64)> = points
        .iter()
        .filter(|p| !p.flow_outlier)
        .map(|p| (p.date, p.l_virus))
        .collect();
    let flow_outliers = points.len() - kept.len();
    let signal = ScatteredSeries::new(kept).map_err(|e| from_core(STAGE, e))?;

    report.preprocess = Some(PreprocessSummary {
        samples_in: data.samples.len(),
        points_out: signal.len(),
        flow_outliers,
        biomarker_substituted: substituted,
        biomarker_values_dropped: dropped_values,
        samples_unusable: unusable,
        calibration,
    });
    Ok(signal)
}

fn resample_stage(
    cfg: &PipelineConfig,
    state: &mut PipelineState,
    outdir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    const STAGE: &str = "resample";
    let series = match cfg.resampling {
        ResampleMode::WeeklyBlock => state.signal.block_average_downsample(7),
        ResampleMode::DailyLinear => state.signal.linear_interpolate(1),
        ResampleMode::DailyShepard => state.signal.shepard_interpolate(1, cfg.shepard_power),
    }
    .map_err(|e| from_core(STAGE, e))?;

    let missing = series.values().iter().filter(|v| v.is_none()).count();
    let (filled, gaps_filled) = series.fill_gaps_linear().map_err(|e| from_core(STAGE, e))?;
    if gaps_filled > 0 {
        report.warnings.push(format!(
            "{gaps_filled} empty slot(s) after downsampling were filled by linear interpolation"
        ));
    }

    write_atomic(&outdir.join("resampled.csv"), &regular_series_csv(&series))?;
    report.resample = Some(ResampleSummary {
        mode: cfg.resampling.label().into(),
        step_days: series.step_days(),
        len: series.len(),
        missing_slots: missing,
        gaps_filled,
    });
    state.resampled = Some(series);
    state.filled = Some(filled);
    Ok(())
}

fn smooth_stage(
    cfg: &PipelineConfig,
    state: &mut PipelineState,
    outdir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    const STAGE: &str = "smooth";
    let filled = state.filled.as_ref().expect("resample ran first");

    let mut summary = SmoothingSummary {
        method: String::new(),
        window_k: None,
        neighbors_kl: None,
        selected_by: "config".into(),
        loocv_rmse: None,
        len: 0,
    };

    let smoothed = match cfg.smoother {
        SmootherMethod::None => {
            summary.method = "none".into();
            filled.clone()
        }
        SmootherMethod::Auto | SmootherMethod::Sma => {
            let k = match (cfg.smoother, cfg.window_k) {
                (SmootherMethod::Sma, Some(k)) => k,
                _ => {
                    summary.selected_by = "loocv".into();
                    select_sma_window(filled, &cfg.sma_candidates)
                        .map_err(|e| from_core(STAGE, e))?
                }
            };
            summary.method = "sma".into();
            summary.window_k = Some(k);
            summary.loocv_rmse = sma_loocv(filled, k).ok().map(Num);
            sma(filled, k).map_err(|e| from_core(STAGE, e))?
        }
        SmootherMethod::Loess => {
            let neighbors = match cfg.neighbors_kl {
                Some(k) => k,
                None => {
                    // mirror the reference procedure: weekly block average,
                    // SMA with the LOOCV window, then the neighbor count
                    // that best matches it
                    summary.selected_by = "reference-match".into();
                    let weekly = state
                        .signal
                        .block_average_downsample(7)
                        .and_then(|w| w.fill_gaps_linear().map(|(f, _)| f))
                        .map_err(|e| from_core(STAGE, e))?;
                    let k = select_sma_window(&weekly, &cfg.sma_candidates)
                        .map_err(|e| from_core(STAGE, e))?;
                    let reference = sma(&weekly, k).map_err(|e| from_core(STAGE, e))?;
                    match_loess_to_reference(&state.signal, &reference, &cfg.loess_candidates)
                        .map_err(|e| from_core(STAGE, e))?
                }
            };
            summary.method = "loess".into();
            summary.neighbors_kl = Some(neighbors);
            loess_on_grid(&state.signal, cfg.resampling.step_days(), neighbors)
                .map_err(|e| from_core(STAGE, e))?
        }
    };

    write_atomic(&outdir.join("smoothed.csv"), &regular_series_csv(&smoothed))?;
    let overlay = long_format_csv(&[
        ("raw", state.signal.points().to_vec()),
        ("smoothed", smoothed.iter_present().collect()),
    ]);
    write_atomic(&outdir.join("overlay.csv"), &overlay)?;

    let trimmed = smoothed
        .trim_missing_ends()
        .map_err(|e| from_core(STAGE, e))?;
    summary.len = trimmed.len();
    report.smoothing = Some(summary);
    state.smoothed = Some(trimmed);
    Ok(())
}

/// Indicator series lookup by exact date.
fn indicator_map(points: &[(TimePoint, f64)]) -> BTreeMap<TimePoint, f64> {
    points.iter().copied().collect()
}

/// Aggregate an indicator onto the signal grid. Weekly grids take the
/// ISO-week sum (`sum = true`) or mean; daily grids join by exact date
/// (or a trailing 7-day sum when summing).
fn indicator_on_grid(
    points: &BTreeMap<TimePoint, f64>,
    grid: &RegularSeries<f64>,
    sum_over_week: bool,
) -> RegularSeries<f64> {
    let step = grid.step_days();
    let mut values: Vec<Option<f64>> = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let date = grid.date_at(i);
        let value = if step == 7 {
            let monday = date.iso_week_monday();
            let week: Vec<f64> = (0..7)
                .filter_map(|o| points.get(&monday.plus_days(o)).copied())
                .collect();
            if sum_over_week {
                (week.len() == 7).then(|| week.iter().sum())
            } else if week.is_empty() {
                None
            } else {
                Some(week.iter().sum::<f64>() / week.len() as f64)
            }
        } else if sum_over_week {
            let window: Vec<f64> = (-6..=0)
                .filter_map(|o| points.get(&date.plus_days(o)).copied())
                .collect();
            (window.len() == 7).then(|| window.iter().sum())
        } else {
            points.get(&date).copied()
        };
        values.push(value);
    }
    RegularSeries::new(grid.start(), step, values).expect("grid construction")
}

fn fit_summary(fit: &RegressionFit<f64>, names: &[String]) -> FitSummary {
    FitSummary {
        r_squared: Num(fit.r_squared),
        rmse: Num(fit.rmse),
        loocv: Num(fit.loocv),
        residual_sd: Num(fit.residual_sd),
        dof: fit.dof,
        coefficients: fit
            .coefficients
            .iter()
            .zip(&fit.t_stats)
            .zip(names)
            .map(|((&value, t), name)| CoefficientSummary {
                name: name.clone(),
                value: Num(value),
                t: Num(t.t),
                p: Num(t.p),
                significant: t.significant,
            })
            .collect(),
    }
}

fn regress_stage(
    cfg: &PipelineConfig,
    state: &PipelineState,
    outdir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    const STAGE: &str = "regress";
    let signal = state.smoothed.as_ref().expect("smooth ran first");
    let data = state.indicators.as_ref().ok_or_else(|| CliError::Data {
        stage: STAGE,
        message: "regression needs indicator columns; the input was a bare series".into(),
    })?;
    if data.new_infections.is_empty() {
        return Err(CliError::Data {
            stage: STAGE,
            message: "regression target requires the new_infections column".into(),
        });
    }

    let infections = indicator_map(&data.new_infections);
    let step = signal.step_days();
    let per_100k = 1.0e5 / cfg.population;
    let target_series = match cfg.target {
        RegressionTarget::Incidence => {
            let mut t = indicator_on_grid(&infections, signal, true);
            t = scale_series(&t, per_100k);
            t
        }
        RegressionTarget::NewInfections => indicator_on_grid(&infections, signal, step == 7),
        RegressionTarget::None => unreachable!("guarded by caller"),
    };

    let table = cross_correlate(signal, &target_series, cfg.lag_range(step))
        .map_err(|e| from_core(STAGE, e))?;
    let lag = table.best_lag;

    let mut lag_csv = String::from("lag,r,n,significant\n");
    for e in &table.entries {
        let sig = e.r.abs() > significance_threshold::<f64>(e.n).unwrap_or(f64::INFINITY);
        lag_csv.push_str(&format!("{},{},{},{}\n", e.lag, fmt_value(e.r), e.n, sig));
    }
    write_atomic(&outdir.join("lag_table.csv"), &lag_csv)?;

    // covariates join at the signal date, the target at signal date + lag
    let covariate_series: Vec<(Covariate, RegularSeries<f64>)> = cfg
        .covariates
        .iter()
        .map(|&c| {
            let points = match c {
                Covariate::Tests => &data.tests,
                Covariate::VariantShare => &data.variant_share,
            };
            (c, indicator_on_grid(&indicator_map(points), signal, false))
        })
        .collect();
    for (c, series) in &covariate_series {
        if !series.iter_present().any(|_| true) {
            return Err(CliError::Data {
                stage: STAGE,
                message: format!("covariate column '{}' has no values", c.label()),
            });
        }
    }

    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut target: Vec<f64> = Vec::new();
    for (date, x) in signal.iter_present() {
        let y = match target_series.value_at(date.plus_days(lag as i64 * step as i64)) {
            Some(y) => y,
            None => continue,
        };
        let mut row = vec![x];
        let mut complete = true;
        for (_, series) in &covariate_series {
            // incomplete rows are dropped, never imputed
            match series.value_at(date) {
                Some(v) => row.push(v),
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            dates.push(date);
            rows.push(row);
            target.push(y);
        }
    }

    let design =
        DesignMatrix::new(rows.clone(), target.clone(), true).map_err(|e| from_core(STAGE, e))?;
    let linear = fit_linear(&design).map_err(|e| from_core(STAGE, e))?;

    let x_only: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let poly =
        fit_polynomial(&x_only, &target, cfg.polynomial_order).map_err(|e| from_core(STAGE, e))?;

    let fitted = predict(&linear, &rows).map_err(|e| from_core(STAGE, e))?;
    let band =
        confidence_band(&linear, &rows, cfg.confidence_level).map_err(|e| from_core(STAGE, e))?;
    let mut band_csv = String::from("date,observed,lower,fit,upper\n");
    for (((date, y), f), (lo, hi)) in dates.iter().zip(&target).zip(&fitted).zip(&band) {
        band_csv.push_str(&format!(
            "{date},{},{},{},{}\n",
            fmt_value(*y),
            fmt_value(*lo),
            fmt_value(*f),
            fmt_value(*hi)
        ));
    }
    write_atomic(&outdir.join("regression_band.csv"), &band_csv)?;

    let mut linear_names = vec!["intercept".to_string(), "signal".to_string()];
    linear_names.extend(cfg.covariates.iter().map(|c| c.label().to_string()));
    let poly_names: Vec<String> = std::iter::once("intercept".to_string())
        .chain((1..=cfg.polynomial_order).map(|k| format!("signal^{k}")))
        .collect();

    report.regression = Some(RegressionSummary {
        target: cfg.target.label().into(),
        covariates: cfg.covariates.iter().map(|c| c.label().into()).collect(),
        n_rows: design.n_rows(),
        best_lag: table.best_lag,
        best_lag_r: Num(table.best_r),
        significance_threshold: Num(table.threshold),
        lag_table: table
            .entries
            .iter()
            .map(|e| LagRow {
                lag: e.lag,
                r: Num(e.r),
                n: e.n,
            })
            .collect(),
        linear: fit_summary(&linear, &linear_names),
        polynomial: fit_summary(&poly, &poly_names),
    });
    Ok(())
}

fn scale_series(series: &RegularSeries<f64>, factor: f64) -> RegularSeries<f64> {
    let values = series
        .values()
        .iter()
        .map(|v| v.map(|x| x * factor))
        .collect();
    RegularSeries::new(series.start(), series.step_days(), values).expect("scaling keeps shape")
}

fn evaluation_spec(cfg: &PipelineConfig, step: u32) -> Result<EvaluationSpec<f64>> {
    let mut horizons = cfg
        .eval_horizons_days
        .iter()
        .map(|&d| cfg.horizon_steps(d, step))
        .collect::<Result<Vec<usize>>>()?;
    horizons.sort_unstable();
    horizons.dedup();
    Ok(EvaluationSpec {
        ses_alphas: cfg.eval_ses_alphas.clone(),
        ar_orders: cfg.eval_ar_orders.clone(),
        transforms: cfg.eval_transforms.clone(),
        horizons,
        p_max: cfg.eval_p_max,
        scoring: cfg.eval_scoring,
        lambda: None,
    })
}

fn cell_summary(cell: &EvaluationCell<f64>, step: u32) -> EvaluationCellSummary {
    EvaluationCellSummary {
        method: cell.method.name().into(),
        parameter: cell.method.parameter_label(),
        transform: cell.transform.to_string(),
        horizon_steps: cell.horizon,
        horizon_days: cell.horizon as u32 * step,
        rmse: Num(cell.rmse),
        aic: Num(cell.aic),
        n_origins: cell.n_origins,
    }
}

fn evaluate_stage(
    cfg: &PipelineConfig,
    state: &mut PipelineState,
    outdir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    const STAGE: &str = "evaluate";
    let signal = state.smoothed.as_ref().expect("smooth ran first");
    let step = signal.step_days();
    let mut spec = evaluation_spec(cfg, step)?;
    if spec.transforms.contains(&TransformKind::BoxCoxDifference)
        && signal.iter_present().any(|(_, v)| v <= 0.0)
    {
        // Box-Cox needs strictly positive data; evaluate the rest of the
        // grid instead of aborting
        spec.transforms
            .retain(|&t| t != TransformKind::BoxCoxDifference);
        report.warnings.push(
            "series is not strictly positive; Box-Cox cells dropped from the evaluation grid"
                .into(),
        );
        if spec.transforms.is_empty() {
            return Err(CliError::Data {
                stage: STAGE,
                message: "no applicable transforms remain for evaluation".into(),
            });
        }
    }
    let evaluation = post_sample_evaluate(signal, &spec).map_err(|e| from_core(STAGE, e))?;

    let mut csv =
        String::from("method,parameter,transform,horizon_steps,horizon_days,rmse,aic,n_origins\n");
    for cell in &evaluation.cells {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            cell.method.name(),
            cell.method.parameter_label(),
            cell.transform,
            cell.horizon,
            cell.horizon as u32 * step,
            fmt_value(cell.rmse),
            fmt_value(cell.aic),
            cell.n_origins
        ));
    }
    write_atomic(&outdir.join("evaluation.csv"), &csv)?;

    // forecast-vs-observation pairs for the best cell at the shortest horizon
    let h_min = *spec.horizons.iter().min().unwrap();
    if let Some(best) = evaluation.best_at_horizon(h_min) {
        let dense = signal.dense_values().map_err(|e| from_core(STAGE, e))?;
        let lambda = if best.transform == TransformKind::BoxCoxDifference {
            evaluation.lambda
        } else {
            None
        };
        let runs = walk_forward(
            &dense,
            best.method,
            best.transform,
            lambda,
            best.horizon,
            best.horizon,
            evaluation.warmup,
        )
        .map_err(|e| from_core(STAGE, e))?;
        let mut scatter = String::from("origin_date,target_date,forecast,observed\n");
        for of in &runs {
            let target_idx = of.origin + best.horizon - 1;
            scatter.push_str(&format!(
                "{},{},{},{}\n",
                signal.date_at(of.origin - 1),
                signal.date_at(target_idx),
                fmt_value(of.forecasts[best.horizon - 1]),
                fmt_value(dense[target_idx])
            ));
        }
        write_atomic(&outdir.join("post_sample_scatter.csv"), &scatter)?;
    }

    report.evaluation = Some(EvaluationSummary {
        lambda: evaluation.lambda.map(Num),
        lambda_fitted_on: "full-series",
        warmup: evaluation.warmup,
        scoring: evaluation.scoring.to_string(),
        cells: evaluation
            .cells
            .iter()
            .map(|c| cell_summary(c, step))
            .collect(),
        best: evaluation
            .best_at_horizon(h_min)
            .map(|c| cell_summary(c, step)),
    });
    state.evaluation = Some(evaluation);
    Ok(())
}

fn forecast_stage(
    cfg: &PipelineConfig,
    state: &PipelineState,
    outdir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    const STAGE: &str = "forecast";
    let signal = state.smoothed.as_ref().expect("smooth ran first");
    let step = signal.step_days();
    let horizon = cfg.horizon_steps(cfg.horizon_days, step)?;

    let positive = signal.iter_present().all(|(_, v)| v > 0.0);
    let (method, transform) = match cfg.forecast_method {
        ForecastMethodChoice::Ses => (
            Method::Ses {
                alpha: cfg.ses_alpha,
            },
            cfg.forecast_transform.unwrap_or(TransformKind::Difference),
        ),
        ForecastMethodChoice::Ar => {
            // an explicitly configured Box-Cox on non-positive data still
            // errors honestly below; only the default degrades
            let transform = match cfg.forecast_transform {
                Some(t) => t,
                None if positive => TransformKind::BoxCoxDifference,
                None => {
                    report.warnings.push(
                        "series is not strictly positive; AR forecast defaults to differencing alone"
                            .into(),
                    );
                    TransformKind::Difference
                }
            };
            (
                Method::Ar {
                    order: cfg.ar_order,
                },
                transform,
            )
        }
        ForecastMethodChoice::Grid => {
            let evaluation = state.evaluation.as_ref().ok_or_else(|| {
                CliError::Usage("forecast.method = grid requires the evaluate stage".into())
            })?;
            let best = evaluation.best_at_horizon(horizon).ok_or_else(|| {
                CliError::Usage(format!(
                    "forecast.horizon_days = {} is not one of evaluate.horizons_days",
                    cfg.horizon_days
                ))
            })?;
            (best.method, best.transform)
        }
    };

    let dense = signal.dense_values().map_err(|e| from_core(STAGE, e))?;
    let lambda = if transform == TransformKind::BoxCoxDifference {
        match state.evaluation.as_ref().and_then(|e| e.lambda) {
            Some(l) => Some(l),
            None => Some(boxcox_mle(&dense).map_err(|e| from_core(STAGE, e))?),
        }
    } else {
        None
    };

    let values = fit_and_forecast(signal, method, transform, lambda, horizon)
        .map_err(|e| from_core(STAGE, e))?;

    let last = signal.date_at(signal.len() - 1);
    let mut csv = String::from("date,forecast,method,transform\n");
    let mut out_values = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let date = last.plus_days((i as i64 + 1) * step as i64);
        csv.push_str(&format!(
            "{date},{},{},{}\n",
            fmt_value(*v),
            method.name(),
            transform
        ));
        out_values.push(ForecastValue {
            date: date.to_string(),
            value: Num(*v),
        });
    }
    write_atomic(&outdir.join("forecast.csv"), &csv)?;

    // Q-Q data of the transformed series against the standard normal, for
    // the visual normality check
    let (_, z) = fit_transform(transform, lambda, &dense).map_err(|e| from_core(STAGE, e))?;
    write_atomic(&outdir.join("qq.csv"), &qq_csv(&z))?;

    report.forecast = Some(ForecastSummary {
        method: method.name().into(),
        parameter: method.parameter_label(),
        transform: transform.to_string(),
        lambda: lambda.map(Num),
        horizon_steps: horizon,
        horizon_days: cfg.horizon_days,
        values: out_values,
    });
    Ok(())
}

/// Standardized sample quantiles against standard normal quantiles.
fn qq_csv(z: &[f64]) -> String {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let mut out = String::from("theoretical,sample\n");
    for (i, v) in sorted.iter().enumerate() {
        let p = (i as f64 + 0.5) / n as f64;
        let theoretical = wbe_core::dist::normal_quantile(p);
        let standardized = if sd > 0.0 { (v - mean) / sd } else { 0.0 };
        out.push_str(&format!(
            "{},{}\n",
            fmt_value(theoretical),
            fmt_value(standardized)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monday(week: i64) -> TimePoint {
        "2021-03-01"
            .parse::<TimePoint>()
            .unwrap()
            .plus_days(7 * week)
    }

    fn daily_map(start: TimePoint, values: &[f64]) -> BTreeMap<TimePoint, f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (start.plus_days(i as i64), v))
            .collect()
    }

    #[test]
    fn weekly_sum_needs_a_complete_week() {
        let grid = RegularSeries::from_values(monday(0), 7, vec![0.0, 0.0]).unwrap();
        // week 0 complete (7 days of 2.0), week 1 only partially covered
        let mut points = daily_map(monday(0), &[2.0; 7]);
        points.insert(monday(1), 5.0);
        points.insert(monday(1).plus_days(1), 5.0);
        let out = indicator_on_grid(&points, &grid, true);
        assert_eq!(out.get(0), Some(14.0));
        assert_eq!(out.get(1), None);
    }

    #[test]
    fn weekly_mean_uses_available_days() {
        let grid = RegularSeries::from_values(monday(0), 7, vec![0.0]).unwrap();
        let mut points = BTreeMap::new();
        points.insert(monday(0), 10.0);
        points.insert(monday(0).plus_days(3), 20.0);
        let out = indicator_on_grid(&points, &grid, false);
        assert_eq!(out.get(0), Some(15.0));
    }

    #[test]
    fn daily_trailing_sum_needs_seven_days() {
        let start: TimePoint = "2021-03-01".parse().unwrap();
        let grid = RegularSeries::from_values(start, 1, vec![0.0; 10]).unwrap();
        let points = daily_map(start, &[1.0; 10]);
        let out = indicator_on_grid(&points, &grid, true);
        assert_eq!(out.get(5), None); // only six prior days exist
        assert_eq!(out.get(6), Some(7.0));
        assert_eq!(out.get(9), Some(7.0));
    }

    #[test]
    fn daily_exact_join_drops_missing_dates() {
        let start: TimePoint = "2021-03-01".parse().unwrap();
        let grid = RegularSeries::from_values(start, 1, vec![0.0; 3]).unwrap();
        let mut points = BTreeMap::new();
        points.insert(start.plus_days(1), 4.0);
        let out = indicator_on_grid(&points, &grid, false);
        assert_eq!(out.values(), &[None, Some(4.0), None]);
    }

    #[test]
    fn qq_data_is_monotone_and_standardized() {
        let z: Vec<f64> = (0..50)
            .map(|i| (i as f64 * 0.77).sin() * 3.0 + 1.0)
            .collect();
        let csv = qq_csv(&z);
        let rows: Vec<(f64, f64)> = csv
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(',');
                (
                    it.next().unwrap().parse().unwrap(),
                    it.next().unwrap().parse().unwrap(),
                )
            })
            .collect();
        assert_eq!(rows.len(), 50);
        for pair in rows.windows(2) {
            assert!(pair[0].0 <= pair[1].0);
            assert!(pair[0].1 <= pair[1].1);
        }
        let mean: f64 = rows.iter().map(|r| r.1).sum::<f64>() / 50.0;
        assert!(mean.abs() < 1e-9);
    }
}
