//! CSV ingestion and emission. One ingest schema feeds the whole pipeline:
//!
//! `date,c_virus_cpl,flow_m3d,nh4_mgl,cod_mgl,ntot_mgl,tests,variant_share_pct,new_infections`
//!
//! Dates are ISO 8601 (YYYY-MM-DD), empty cells are missing values, rows are
//! sorted by date and duplicate dates are rejected. Rows with an empty virus
//! cell contribute indicator values only. Stage outputs use a `date,value`
//! series schema (extra columns allowed), which the pipeline also accepts as
//! input for a pre-normalized signal.
//!
//! All writes go through a temp-file-then-rename so readers never observe a
//! half-written file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use wbe_core::series::{RegularSeries, ScatteredSeries};
use wbe_core::{Sample, TimePoint};

use crate::error::{io_err, CliError, Result};
use crate::logger;

const INGEST_COLUMNS: [&str; 9] = [
    "date",
    "c_virus_cpl",
    "flow_m3d",
    "nh4_mgl",
    "cod_mgl",
    "ntot_mgl",
    "tests",
    "variant_share_pct",
    "new_infections",
];

/// Parsed input: plant samples plus daily indicator observations.
#[derive(Debug, Clone, Default)]
pub struct IngestData {
    pub samples: Vec<Sample>,
    pub new_infections: Vec<(TimePoint, f64)>,
    pub tests: Vec<(TimePoint, f64)>,
    pub variant_share: Vec<(TimePoint, f64)>,
    pub warnings: Vec<String>,
}

/// Pipeline input: either raw plant data or an already-normalized series.
#[derive(Debug, Clone)]
pub enum PipelineInput {
    Raw(IngestData),
    Series(ScatteredSeries<f64>),
}

fn data_err(message: String) -> CliError {
    CliError::Data {
        stage: "ingest",
        message,
    }
}

pub fn read_input(path: &Path) -> Result<PipelineInput> {
    let text = fs::read_to_string(path).map_err(|e| io_err("ingest", e))?;
    let header = text
        .lines()
        .next()
        .ok_or_else(|| data_err("empty file".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.contains(&"c_virus_cpl") {
        ingest_csv(&text).map(PipelineInput::Raw)
    } else if names.first() == Some(&"date") && names.get(1) == Some(&"value") {
        read_series(&text).map(PipelineInput::Series)
    } else {
        Err(data_err(format!(
            "unrecognized header '{header}': expected the sample schema or date,value"
        )))
    }
}

/// Parse the full ingest schema.
pub fn ingest_csv(text: &str) -> Result<IngestData> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| data_err("empty file".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();

    let mut warnings = Vec::new();
    let mut col_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (idx, name) in names.iter().enumerate() {
        if INGEST_COLUMNS.contains(name) {
            if col_of.insert(name, idx).is_some() {
                return Err(data_err(format!("duplicate column '{name}'")));
            }
        } else {
            warnings.push(format!("ignoring unknown column '{name}'"));
        }
    }
    let date_col = *col_of
        .get("date")
        .ok_or_else(|| data_err("missing 'date' column".into()))?;

    struct Row {
        line: usize,
        date: TimePoint,
        cells: Vec<Option<f64>>,
    }

    let mut rows: Vec<Row> = Vec::new();
    for (lineno, raw) in lines {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(data_err(format!(
                "line {line}: expected {} fields, got {}",
                names.len(),
                fields.len()
            )));
        }
        let date: TimePoint = fields[date_col]
            .parse()
            .map_err(|_| data_err(format!("line {line}: invalid date '{}'", fields[date_col])))?;
        let mut cells = vec![None; INGEST_COLUMNS.len()];
        for (slot, name) in INGEST_COLUMNS.iter().enumerate().skip(1) {
            if let Some(&idx) = col_of.get(name) {
                let cell = fields[idx];
                if !cell.is_empty() {
                    let value: f64 = cell
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| {
                            data_err(format!(
                                "line {line}: invalid number '{cell}' in column {name}"
                            ))
                        })?;
                    cells[slot] = Some(value);
                }
            }
        }
        rows.push(Row { line, date, cells });
    }

    rows.sort_by_key(|r| r.date);
    for pair in rows.windows(2) {
        if pair[0].date == pair[1].date {
            return Err(data_err(format!(
                "duplicate date {} (lines {} and {})",
                pair[0].date, pair[0].line, pair[1].line
            )));
        }
    }

    let mut data = IngestData {
        warnings,
        ..Default::default()
    };
    for row in &rows {
        if let Some(c_virus) = row.cells[1] {
            let sample = Sample::new(
                row.date,
                c_virus,
                row.cells[2],
                row.cells[3],
                row.cells[4],
                row.cells[5],
            )
            .map_err(|e| data_err(format!("line {}: {e}", row.line)))?;
            data.samples.push(sample);
        }
        if let Some(v) = row.cells[6] {
            data.tests.push((row.date, v));
        }
        if let Some(v) = row.cells[7] {
            data.variant_share.push((row.date, v));
        }
        if let Some(v) = row.cells[8] {
            data.new_infections.push((row.date, v));
        }
    }
    Ok(data)
}

/// Parse a `date,value` series file (extra columns ignored).
pub fn read_series(text: &str) -> Result<ScatteredSeries<f64>> {
    let mut points = Vec::new();
    for (lineno, raw) in text.lines().enumerate().skip(1) {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut fields = raw.split(',').map(str::trim);
        let date_field = fields.next().unwrap_or("");
        let value_field = fields.next().unwrap_or("");
        let date: TimePoint = date_field
            .parse()
            .map_err(|_| data_err(format!("line {line}: invalid date '{date_field}'")))?;
        if value_field.is_empty() {
            continue;
        }
        let value: f64 = value_field
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| data_err(format!("line {line}: invalid number '{value_field}'")))?;
        points.push((date, value));
    }
    points.sort_by_key(|&(d, _)| d);
    ScatteredSeries::new(points).map_err(|e| data_err(format!("series file: {e}")))
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp: PathBuf = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| io_err("emit", e))?;
        f.write_all(contents.as_bytes())
            .map_err(|e| io_err("emit", e))?;
        f.sync_all().map_err(|e| io_err("emit", e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err("emit", e))?;
    logger::debug(&format!("wrote {}", path.display()));
    Ok(())
}

pub fn fmt_value(v: f64) -> String {
    format!("{v}")
}

/// Regular series as `date,value` (missing slots keep an empty cell).
pub fn regular_series_csv(series: &RegularSeries<f64>) -> String {
    let mut out = String::from("date,value\n");
    for (i, slot) in series.values().iter().enumerate() {
        let date = series.date_at(i);
        match slot {
            Some(v) => out.push_str(&format!("{date},{}\n", fmt_value(*v))),
            None => out.push_str(&format!("{date},\n")),
        }
    }
    out
}

/// Long-format plot data: `date,series,value`, one block per named series,
/// consumable by any plotting tool.
pub fn long_format_csv(series_set: &[(&str, Vec<(TimePoint, f64)>)]) -> String {
    let mut out = String::from("date,series,value\n");
    for (name, points) in series_set {
        for (date, value) in points {
            out.push_str(&format!("{date},{name},{}\n", fmt_value(*value)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "date,c_virus_cpl,flow_m3d,nh4_mgl,cod_mgl,ntot_mgl,tests,variant_share_pct,new_infections";

    #[test]
    fn parses_full_row() {
        let text = format!("{HEADER}\n2021-03-01,120000,540000,38.2,610,52.0,45000,62.5,2100\n");
        let data = ingest_csv(&text).unwrap();
        assert_eq!(data.samples.len(), 1);
        let s = &data.samples[0];
        assert_eq!(s.c_virus, 120000.0);
        assert_eq!(s.flow, Some(540000.0));
        assert_eq!(s.c_nh4, Some(38.2));
        assert_eq!(s.c_cod, Some(610.0));
        assert_eq!(s.c_ntot, Some(52.0));
        assert_eq!(data.tests, vec![("2021-03-01".parse().unwrap(), 45000.0)]);
        assert_eq!(data.variant_share[0].1, 62.5);
        assert_eq!(data.new_infections[0].1, 2100.0);
    }

    #[test]
    fn empty_cells_become_missing() {
        let text = format!("{HEADER}\n2021-03-01,120000,,,610,,,,\n");
        let data = ingest_csv(&text).unwrap();
        let s = &data.samples[0];
        assert_eq!(s.c_nh4, None);
        assert_eq!(s.c_cod, Some(610.0));
        assert!(data.tests.is_empty());
    }

    #[test]
    fn indicator_only_rows_have_no_sample() {
        let text = format!("{HEADER}\n2021-03-01,,,,,,45000,10.0,2100\n");
        let data = ingest_csv(&text).unwrap();
        assert!(data.samples.is_empty());
        assert_eq!(data.new_infections.len(), 1);
    }

    #[test]
    fn bad_date_names_line() {
        let text = format!("{HEADER}\n2021-03-01,1,,,,,,,\n2021-13-01,1,,,,,,,\n");
        let err = ingest_csv(&text).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_number_names_line_and_column() {
        let text = format!("{HEADER}\n2021-03-01,abc,,,,,,,\n");
        let err = ingest_csv(&text).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("c_virus_cpl"), "{err}");
    }

    #[test]
    fn non_finite_numbers_are_rejected() {
        // "inf" and "nan" parse as f64 but are not valid measurements
        let text = format!("{HEADER}\n2021-03-01,1,,,,,inf,,\n");
        let err = ingest_csv(&text).unwrap_err();
        assert!(err.to_string().contains("invalid number 'inf'"), "{err}");
        let err = read_series("date,value\n2021-03-01,nan\n").unwrap_err();
        assert!(err.to_string().contains("invalid number"), "{err}");
    }

    #[test]
    fn duplicate_dates_rejected_and_rows_sorted() {
        let text = format!("{HEADER}\n2021-03-02,2,,,,,,,\n2021-03-01,1,,,,,,,\n");
        let data = ingest_csv(&text).unwrap();
        assert!(data.samples[0].date < data.samples[1].date);

        let text = format!("{HEADER}\n2021-03-01,1,,,,,,,\n2021-03-01,2,,,,,,,\n");
        let err = ingest_csv(&text).unwrap_err();
        assert!(
            err.to_string().contains("duplicate date 2021-03-01"),
            "{err}"
        );
    }

    #[test]
    fn unknown_column_warns_but_parses() {
        let text = "date,c_virus_cpl,ph\n2021-03-01,5,7.1\n";
        let data = ingest_csv(text).unwrap();
        assert_eq!(data.warnings.len(), 1);
        assert_eq!(data.samples.len(), 1);
    }

    #[test]
    fn series_file_roundtrip() {
        let series =
            RegularSeries::from_values("2021-03-01".parse().unwrap(), 7, vec![1.5, 2.5, 3.5])
                .unwrap();
        let text = regular_series_csv(&series);
        assert!(text.starts_with("date,value\n2021-03-01,1.5\n"));
        let back = read_series(&text).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.points()[2], ("2021-03-15".parse().unwrap(), 3.5));
    }

    #[test]
    fn long_format_has_one_block_per_series() {
        let d: TimePoint = "2021-03-01".parse().unwrap();
        let text = long_format_csv(&[
            ("raw", vec![(d, 1.0)]),
            ("sma", vec![(d, 2.0)]),
            ("loess", vec![(d, 3.0)]),
        ]);
        let names: std::collections::BTreeSet<&str> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(names.len(), 3);
    }
}
