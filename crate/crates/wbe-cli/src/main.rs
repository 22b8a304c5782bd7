use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wbe_cli::config::{ForecastMethodChoice, PipelineConfig};
use wbe_cli::error::{io_err, CliError};
use wbe_cli::pipeline::{run_pipeline, run_synth, Stage, StagePlan};
use wbe_cli::{logger, Result};

const DEFAULT_SEED: u64 = 42;

/// Wastewater-based epidemiology data modelling: preprocessing, smoothing,
/// regression against epidemic indicators and short-term forecasting.
#[derive(Debug, Parser)]
#[command(name = "wbe", version, disable_help_subcommand = true)]
struct Cli {
    /// Pipeline configuration file (key = value lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Input CSV (sample schema or date,value series).
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,

    /// Output directory for stage files and the JSON report.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    output: PathBuf,

    /// Seed for all randomness (synthetic generation).
    #[arg(long, global = true, value_name = "N", default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Allow regression/forecasting on un-smoothed series.
    #[arg(long, global = true)]
    allow_raw: bool,

    /// Stop the full pipeline after this stage (run only).
    #[arg(long, global = true, value_name = "NAME")]
    stage: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scenario in the ingest CSV schema.
    Synth,
    /// Normalize and outlier-screen raw samples.
    Preprocess,
    /// Resample to an equal grid and smooth.
    Smooth,
    /// Lag analysis and regression against the epidemic indicator.
    Regress,
    /// Walk-forward post-sample evaluation of the forecast grid.
    Evaluate,
    /// Fit and emit a short-term forecast.
    Forecast,
    /// The full recommended pipeline.
    Run,
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err("config", e))?;
            PipelineConfig::parse(&text)
        }
    }
}

fn require_input(cli: &Cli) -> Result<&PathBuf> {
    cli.input
        .as_ref()
        .ok_or_else(|| CliError::Usage("this subcommand requires --input PATH".into()))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = load_config(&cli.config)?;
    if cli.stage.is_some() && !matches!(cli.command, Command::Run) {
        return Err(CliError::Usage(
            "--stage only applies to the run subcommand".into(),
        ));
    }
    match cli.command {
        Command::Synth => {
            run_synth(&cfg, &cli.output, cli.seed)?;
        }
        Command::Preprocess => {
            let input = require_input(cli)?;
            run_pipeline(
                &cfg,
                input,
                &cli.output,
                cli.seed,
                cli.allow_raw,
                StagePlan::preprocess_only(),
            )?;
        }
        Command::Smooth => {
            let input = require_input(cli)?;
            run_pipeline(
                &cfg,
                input,
                &cli.output,
                cli.seed,
                cli.allow_raw,
                StagePlan::through_smooth(),
            )?;
        }
        Command::Regress => {
            let input = require_input(cli)?;
            run_pipeline(
                &cfg,
                input,
                &cli.output,
                cli.seed,
                cli.allow_raw,
                StagePlan::regress_only(),
            )?;
        }
        Command::Evaluate => {
            let input = require_input(cli)?;
            run_pipeline(
                &cfg,
                input,
                &cli.output,
                cli.seed,
                cli.allow_raw,
                StagePlan::evaluate_only(),
            )?;
        }
        Command::Forecast => {
            let input = require_input(cli)?;
            let need_grid = cfg.forecast_method == ForecastMethodChoice::Grid;
            run_pipeline(
                &cfg,
                input,
                &cli.output,
                cli.seed,
                cli.allow_raw,
                StagePlan::forecast_only(need_grid),
            )?;
        }
        Command::Run => {
            let input = require_input(cli)?;
            let upto = match &cli.stage {
                None => None,
                Some(name) => Some(Stage::parse(name)?),
            };
            run_pipeline(
                &cfg,
                input,
                &cli.output,
                cli.seed,
                cli.allow_raw,
                StagePlan::full_run(upto),
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            logger::log(wbe_cli::logger::Level::Error, &e.to_string());
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
