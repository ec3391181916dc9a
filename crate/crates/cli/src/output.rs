//! Result writers: one per-round CSV per seed plus a summary JSON.
//!
//! Output is deterministic byte for byte: floats print in shortest
//! round-trip form, JSON fields are struct-ordered, and re-running an
//! identical experiment reproduces identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fedowen_core::sim::{ExperimentReport, RoundRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.into(), source }
}

/// Renders one seed's round log. Columns: round, selected_ids,
/// phi_0..phi_{n-1}, alpha (participants, aligned with selected_ids),
/// eval_accuracy, utility_calls. List cells join with ';'.
pub fn round_csv(records: &[RoundRecord], n_clients: usize) -> String {
    let mut out = String::from("round,selected_ids");
    for i in 0..n_clients {
        let _ = write!(out, ",phi_{i}");
    }
    out.push_str(",alpha,eval_accuracy,utility_calls\n");
    for record in records {
        let selected: Vec<String> = record.selected.iter().map(|s| s.to_string()).collect();
        let alpha: Vec<String> = record.alpha.iter().map(|a| a.to_string()).collect();
        let _ = write!(out, "{},{}", record.round, selected.join(";"));
        for phi in &record.phi {
            let _ = write!(out, ",{phi}");
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            alpha.join(";"),
            record.eval_accuracy,
            record.utility_calls
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub rounds: usize,
}

/// The JSON summary: config echo, per-seed final accuracies, mean/std.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: BTreeMap<String, String>,
    pub per_seed: Vec<SeedSummary>,
    pub mean_final_accuracy: f64,
    pub std_final_accuracy: f64,
}

pub fn build_summary(report: &ExperimentReport, config_echo: &[(String, String)]) -> Summary {
    Summary {
        config: config_echo.iter().cloned().collect(),
        per_seed: report
            .runs
            .iter()
            .map(|run| SeedSummary {
                seed: run.seed,
                initial_accuracy: run.initial_accuracy,
                final_accuracy: run.final_accuracy,
                rounds: run.records.len(),
            })
            .collect(),
        mean_final_accuracy: report.mean_final_accuracy,
        std_final_accuracy: report.std_final_accuracy,
    }
}

/// Writes the per-seed CSVs and the summary JSON under `dir`, returning
/// every path written.
pub fn write_results(
    report: &ExperimentReport,
    config_echo: &[(String, String)],
    n_clients: usize,
    dir: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for run in &report.runs {
        let path = dir.join(format!("rounds_seed{}.csv", run.seed));
        fs::write(&path, round_csv(&run.records, n_clients)).map_err(io_err(&path))?;
        written.push(path);
    }
    let summary = build_summary(report, config_echo);
    let path = dir.join("summary.json");
    let mut body = serde_json::to_string_pretty(&summary)
        .map_err(|source| OutputError::Json { path: path.clone(), source })?;
    body.push('\n');
    fs::write(&path, body).map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fedowen_core::sim::SeedRun;
    use tempfile::tempdir;

    fn tiny_report() -> ExperimentReport {
        let record = RoundRecord {
            round: 0,
            selected: vec![1, 2],
            phi: vec![0.0, 0.25, 0.5],
            alpha: vec![0.4, 0.6],
            eval_accuracy: 0.75,
            utility_calls: 8,
        };
        ExperimentReport {
            runs: vec![SeedRun {
                seed: 7,
                initial_accuracy: 0.2,
                final_accuracy: 0.75,
                records: vec![record],
            }],
            mean_final_accuracy: 0.75,
            std_final_accuracy: 0.0,
        }
    }

    #[test]
    fn csv_layout_matches_the_interface() {
        let report = tiny_report();
        let csv = round_csv(&report.runs[0].records, 3);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "round,selected_ids,phi_0,phi_1,phi_2,alpha,eval_accuracy,utility_calls"
        );
        assert_eq!(lines.next().unwrap(), "0,1;2,0,0.25,0.5,0.4;0.6,0.75,8");
    }

    #[test]
    fn empty_run_writes_a_header_only_csv() {
        let csv = round_csv(&[], 2);
        assert_eq!(csv, "round,selected_ids,phi_0,phi_1,alpha,eval_accuracy,utility_calls\n");
    }

    #[test]
    fn one_csv_per_seed_plus_a_summary() {
        let mut report = tiny_report();
        report.runs.push(SeedRun { seed: 8, ..report.runs[0].clone() });
        report.runs.push(SeedRun { seed: 9, ..report.runs[0].clone() });
        let dir = tempdir().unwrap();
        let echo = vec![("rounds".to_string(), "1".to_string())];
        let written = write_results(&report, &echo, 3, dir.path()).unwrap();
        assert_eq!(written.len(), 4);
        assert!(dir.path().join("rounds_seed7.csv").exists());
        assert!(dir.path().join("rounds_seed9.csv").exists());
        let summary: Summary =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary.per_seed.len(), 3);
        assert_eq!(summary.config["rounds"], "1");
    }

    #[test]
    fn rewriting_identical_results_is_byte_identical() {
        let report = tiny_report();
        let echo = vec![("rounds".to_string(), "1".to_string())];
        let dir = tempdir().unwrap();
        write_results(&report, &echo, 3, dir.path()).unwrap();
        let first = std::fs::read(dir.path().join("rounds_seed7.csv")).unwrap();
        let first_summary = std::fs::read(dir.path().join("summary.json")).unwrap();
        write_results(&report, &echo, 3, dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join("rounds_seed7.csv")).unwrap(), first);
        assert_eq!(std::fs::read(dir.path().join("summary.json")).unwrap(), first_summary);
    }
}
