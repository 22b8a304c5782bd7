//! Behavior of the `wbe` binary: exit codes, file contracts, stage
//! composition.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wbe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wbe"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(args: &[&str]) -> Output {
    let out = wbe().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth_input(dir: &Path) -> PathBuf {
    run_ok(&["synth", "--output", dir.to_str().unwrap(), "--seed", "11"]);
    dir.join("input.csv")
}

#[test]
fn missing_input_is_usage_error() {
    let out = wbe().arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("\"kind\":\"usage\""), "{stderr}");
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = wbe().args(["run", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = wbe().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "synth",
        "preprocess",
        "smooth",
        "regress",
        "evaluate",
        "forecast",
        "run",
    ] {
        assert!(stdout.contains(sub), "help does not mention {sub}");
    }
}

#[test]
fn malformed_csv_is_data_error_with_line_number() {
    let dir = tmp("bad_csv");
    let path = dir.join("bad.csv");
    fs::write(
        &path,
        "date,c_virus_cpl,flow_m3d,nh4_mgl,cod_mgl,ntot_mgl,tests,variant_share_pct,new_infections\n\
         2021-03-01,1,,,,,,,\n\
         2021-13-01,1,,,,,,,\n",
    )
    .unwrap();
    let out = wbe()
        .args([
            "run",
            "--input",
            path.to_str().unwrap(),
            "--output",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn duplicate_dates_are_rejected() {
    let dir = tmp("dup_csv");
    let path = dir.join("dup.csv");
    fs::write(
        &path,
        "date,c_virus_cpl,flow_m3d,nh4_mgl,cod_mgl,ntot_mgl,tests,variant_share_pct,new_infections\n\
         2021-03-01,1,,40,,,,,\n\
         2021-03-01,2,,40,,,,,\n",
    )
    .unwrap();
    let out = wbe()
        .args([
            "run",
            "--input",
            path.to_str().unwrap(),
            "--output",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate date"));
}

#[test]
fn numeric_failure_exits_three() {
    let dir = tmp("numeric");
    let path = dir.join("flat.csv");
    let mut csv = String::from("date,value\n");
    let start: wbe_core::TimePoint = "2021-03-01".parse().unwrap();
    for i in 0..60 {
        csv.push_str(&format!("{},5\n", start.plus_days(i)));
    }
    fs::write(&path, csv).unwrap();
    let conf = dir.join("conf");
    fs::write(
        &conf,
        "smoother.method = none\nresampling.mode = daily_linear\nforecast.method = ar\n",
    )
    .unwrap();
    let out = wbe()
        .args([
            "forecast",
            "--config",
            conf.to_str().unwrap(),
            "--allow-raw",
            "--input",
            path.to_str().unwrap(),
            "--output",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    // AR on a constant series has a singular lag matrix
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));
}

#[test]
fn raw_forecast_requires_allow_raw() {
    let dir = tmp("rawgate");
    let input = synth_input(&dir);
    let conf = dir.join("conf");
    fs::write(&conf, "smoother.method = none\n").unwrap();
    let out_dir = dir.join("out");
    let args = [
        "forecast",
        "--config",
        conf.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ];
    let refused = wbe().args(args).output().unwrap();
    assert_eq!(refused.status.code(), Some(1));
    let allowed = wbe().args(args).arg("--allow-raw").output().unwrap();
    assert_eq!(
        allowed.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&allowed.stderr)
    );
}

#[test]
fn stage_flag_stops_after_named_stage() {
    let dir = tmp("stages");
    let input = synth_input(&dir);
    let out_dir = dir.join("out");
    run_ok(&[
        "run",
        "--stage",
        "smooth",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out_dir.join("smoothed.csv").exists());
    assert!(out_dir.join("normalized.csv").exists());
    assert!(!out_dir.join("forecast.csv").exists());
    assert!(!out_dir.join("evaluation.csv").exists());

    let bad = wbe()
        .args(["run", "--stage", "nope", "--input", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));

    // --stage belongs to run alone
    let misplaced = wbe()
        .args([
            "smooth",
            "--stage",
            "regress",
            "--input",
            input.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(misplaced.status.code(), Some(1));
}

#[test]
fn full_run_emits_all_declared_files() {
    let dir = tmp("full");
    let input = synth_input(&dir);
    let out_dir = dir.join("out");
    run_ok(&[
        "run",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    for file in [
        "normalized.csv",
        "resampled.csv",
        "smoothed.csv",
        "overlay.csv",
        "lag_table.csv",
        "regression_band.csv",
        "evaluation.csv",
        "post_sample_scatter.csv",
        "forecast.csv",
        "qq.csv",
        "report.json",
    ] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
}

#[test]
fn auto_smoother_records_selected_window_in_report() {
    let dir = tmp("autok");
    let input = synth_input(&dir);
    let out_dir = dir.join("out");
    run_ok(&[
        "run",
        "--stage",
        "smooth",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    let report = fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(report.contains("\"selected_by\": \"loocv\""), "{report}");
    assert!(report.contains("\"window_k\""), "{report}");
    assert!(report.contains("\"schema\": \"wbe-report/1\""));
}

#[test]
fn overlay_has_expected_series_names() {
    let dir = tmp("overlay");
    let input = synth_input(&dir);
    let out_dir = dir.join("out");
    run_ok(&[
        "run",
        "--stage",
        "smooth",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    let overlay = fs::read_to_string(out_dir.join("overlay.csv")).unwrap();
    let names: std::collections::BTreeSet<&str> = overlay
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(
        names.into_iter().collect::<Vec<_>>(),
        vec!["raw", "smoothed"]
    );
}

#[test]
fn regression_band_is_ordered_rowwise() {
    let dir = tmp("band");
    let input = synth_input(&dir);
    let out_dir = dir.join("out");
    run_ok(&[
        "regress",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    let band = fs::read_to_string(out_dir.join("regression_band.csv")).unwrap();
    let mut rows = 0;
    for line in band.lines().skip(1) {
        let cells: Vec<f64> = line
            .split(',')
            .skip(2) // date, observed
            .map(|c| c.parse().unwrap())
            .collect();
        let (lower, fit, upper) = (cells[0], cells[1], cells[2]);
        assert!(lower <= fit && fit <= upper, "band disordered: {line}");
        rows += 1;
    }
    assert!(rows > 10);
}

#[test]
fn scatter_rows_match_reported_origin_count() {
    let dir = tmp("scatter");
    let input = synth_input(&dir);
    let out_dir = dir.join("out");
    run_ok(&[
        "evaluate",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    let scatter = fs::read_to_string(out_dir.join("post_sample_scatter.csv")).unwrap();
    let rows = scatter.lines().count() - 1;

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let best = &report["evaluation"]["best"];
    assert_eq!(rows as u64, best["n_origins"].as_u64().unwrap());
}

#[test]
fn nonpositive_series_drops_boxcox_cells_instead_of_aborting() {
    let dir = tmp("nonpositive");
    let path = dir.join("series.csv");
    let mut csv = String::from("date,value\n");
    let start: wbe_core::TimePoint = "2021-03-01".parse().unwrap();
    for i in 0..80u64 {
        // dips below zero mid-series; the hash term breaks the exact linear
        // recurrence a pure sinusoid would give the AR lag matrix
        let jitter = (i.wrapping_mul(2654435761) % 1000) as f64 / 1000.0 - 0.5;
        let v = 10.0 * ((i as f64) / 9.0).sin() + 0.1 * i as f64 - 2.0 + jitter;
        csv.push_str(&format!("{},{v}\n", start.plus_days(i as i64)));
    }
    fs::write(&path, csv).unwrap();
    let conf = dir.join("conf");
    fs::write(
        &conf,
        "smoother.method = none\nresampling.mode = daily_linear\nregression.target = none\nevaluate.ar_orders = 1,2\nevaluate.ses_alphas = 0.5\n",
    )
    .unwrap();
    let out_dir = dir.join("out");
    run_ok(&[
        "run",
        "--config",
        conf.to_str().unwrap(),
        "--allow-raw",
        "--input",
        path.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let warnings = report["warnings"].as_array().unwrap();
    assert!(
        warnings
            .iter()
            .any(|w| w.as_str().unwrap().contains("Box-Cox cells dropped")),
        "{warnings:?}"
    );
    // only none + difference cells remain: 3 methods x 2 transforms x 2 horizons
    assert_eq!(report["evaluation"]["cells"].as_array().unwrap().len(), 12);
    // the AR forecast default degraded to differencing alone
    assert_eq!(report["forecast"]["transform"], "difference");
}

#[test]
fn bare_series_run_requires_target_none() {
    // a full run on a date,value series has no indicator columns, so the
    // regression stage aborts unless it is configured away
    let dir = tmp("bare_series");
    let path = dir.join("series.csv");
    let mut csv = String::from("date,value\n");
    let start: wbe_core::TimePoint = "2021-03-01".parse().unwrap();
    for i in 0..40 {
        csv.push_str(&format!("{},{}\n", start.plus_days(i), 10 + i));
    }
    fs::write(&path, csv).unwrap();
    let out = wbe()
        .args([
            "run",
            "--allow-raw",
            "--input",
            path.to_str().unwrap(),
            "--output",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("indicator columns"));
}

#[test]
fn series_file_composes_with_forecast_stage() {
    let dir = tmp("compose");
    let input = synth_input(&dir);
    let out_dir = dir.join("out");
    run_ok(&[
        "run",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);

    // feed the smoothed stage output back in as a bare series
    let conf = dir.join("conf");
    fs::write(&conf, "smoother.method = none\n").unwrap();
    let out2 = dir.join("out2");
    run_ok(&[
        "forecast",
        "--config",
        conf.to_str().unwrap(),
        "--allow-raw",
        "--input",
        out_dir.join("smoothed.csv").to_str().unwrap(),
        "--output",
        out2.to_str().unwrap(),
    ]);
    let a: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out2.join("report.json")).unwrap()).unwrap();
    assert_eq!(a["forecast"]["values"], b["forecast"]["values"]);
}

#[test]
fn readme_config_block_parses() {
    // the documented grammar must stay in sync with the parser
    let readme =
        fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let block = readme
        .split("```ini")
        .nth(1)
        .expect("README has an ini config block")
        .split("```")
        .next()
        .unwrap();
    let cfg = wbe_cli::config::PipelineConfig::parse(block).unwrap();
    assert_eq!(cfg.synth.waves.len(), 3);
    assert_eq!(cfg.eval_ar_orders.len(), 10);
    assert_eq!(cfg.horizon_days, 7);
}
