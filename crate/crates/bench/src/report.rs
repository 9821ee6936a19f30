//! Benchmark report output: CSV with a fixed column set, or JSON mirroring
//! the same fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::rtf::BenchRun;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// Infer from a path extension; plain CSV when in doubt.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub const CSV_HEADER: &str = "duration_s,mixing,chunk_ms,left_context,wall_ms_mean,wall_ms_p95,rtf,modeled_peak_bytes,measured_peak_bytes";

/// One flattened report row; serializes to a JSON object with exactly the
/// CSV's columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub duration_s: f64,
    pub mixing: String,
    pub chunk_ms: f64,
    pub left_context: String,
    pub wall_ms_mean: f64,
    pub wall_ms_p95: f64,
    pub rtf: f64,
    pub modeled_peak_bytes: u64,
    pub measured_peak_bytes: u64,
}

pub fn report_rows(run: &BenchRun) -> Vec<ReportRow> {
    run.results
        .iter()
        .map(|r| ReportRow {
            duration_s: r.duration_s,
            mixing: run.mixing_label().to_string(),
            chunk_ms: run.chunk_ms,
            left_context: run.left_context.to_string(),
            wall_ms_mean: r.wall_ms_mean,
            wall_ms_p95: r.wall_ms_p95,
            rtf: r.rtf,
            modeled_peak_bytes: r.modeled_peak_bytes,
            measured_peak_bytes: r.measured_peak_bytes,
        })
        .collect()
}

/// Write the run to `path` in the requested format.
pub fn emit_report(run: &BenchRun, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    if run.results.is_empty() {
        return Err(BenchError::validation("benchmark run has no results to report"));
    }
    let file = File::create(&path)?;
    let mut out = BufWriter::new(file);
    let rows = report_rows(run);
    match format {
        ReportFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.duration_s,
                    r.mixing,
                    r.chunk_ms,
                    r.left_context,
                    r.wall_ms_mean,
                    r.wall_ms_p95,
                    r.rtf,
                    r.modeled_peak_bytes,
                    r.measured_peak_bytes
                )?;
            }
        }
        ReportFormat::Json => {
            let doc = serde_json::json!({
                "config_id": run.config_id,
                "rows": rows,
            });
            serde_json::to_writer_pretty(&mut out, &doc)
                .map_err(|e| BenchError::Io(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parse a CSV report back into rows (round-trip check and plotting input).
pub fn parse_report_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(&path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| BenchError::validation("empty report"))?;
    if header != CSV_HEADER {
        return Err(BenchError::validation(format!("unexpected header: {header}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(BenchError::validation(format!("row {i}: {} fields", fields.len())));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>().map_err(|_| BenchError::validation(format!("row {i}: bad number {s}")))
        };
        let parse_u = |s: &str| {
            s.parse::<u64>().map_err(|_| BenchError::validation(format!("row {i}: bad count {s}")))
        };
        rows.push(ReportRow {
            duration_s: parse_f(fields[0])?,
            mixing: fields[1].to_string(),
            chunk_ms: parse_f(fields[2])?,
            left_context: fields[3].to_string(),
            wall_ms_mean: parse_f(fields[4])?,
            wall_ms_p95: parse_f(fields[5])?,
            rtf: parse_f(fields[6])?,
            modeled_peak_bytes: parse_u(fields[7])?,
            measured_peak_bytes: parse_u(fields[8])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtf::BenchRow;
    use summix_core::encoder::MixingKind;

    fn sample_run() -> BenchRun {
        let mut run = BenchRun::new("test", MixingKind::SummaryMixing);
        run.results = vec![
            BenchRow {
                duration_s: 5.0,
                wall_ms_mean: 111.25,
                wall_ms_p95: 120.5,
                rtf: 0.02225,
                modeled_peak_bytes: 1_000_000,
                measured_peak_bytes: 1_200_000,
            },
            BenchRow {
                duration_s: 10.0,
                wall_ms_mean: 222.5,
                wall_ms_p95: 240.0,
                rtf: 0.02225,
                modeled_peak_bytes: 2_000_000,
                measured_peak_bytes: 2_100_000,
            },
        ];
        run
    }

    fn temp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("smx_report_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn csv_round_trip() {
        let run = sample_run();
        let path = temp("r.csv");
        emit_report(&run, ReportFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3); // header + 2 rows
        assert!(text.starts_with(CSV_HEADER));
        let rows = parse_report_csv(&path).unwrap();
        assert_eq!(rows, report_rows(&run));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn json_mirrors_fields() {
        let run = sample_run();
        let path = temp("r.json");
        emit_report(&run, ReportFormat::Json, &path).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(doc["rows"].as_array().unwrap().len(), 2);
        assert_eq!(doc["rows"][0]["mixing"], "summary");
        assert_eq!(doc["rows"][1]["duration_s"], 10.0);
        assert_eq!(doc["rows"][0]["left_context"], "infinite");
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let run = sample_run();
        let err = emit_report(&run, ReportFormat::Csv, "/nonexistent/dir/report.csv").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn format_inference() {
        assert_eq!(ReportFormat::from_path(Path::new("a.json")), ReportFormat::Json);
        assert_eq!(ReportFormat::from_path(Path::new("a.csv")), ReportFormat::Csv);
        assert_eq!(ReportFormat::from_path(Path::new("a")), ReportFormat::Csv);
    }
}
