//! Evaluation report files. The files written by `emit_report` are a
//! function of the report and header alone, so re-emitting gives identical
//! bytes. Wall-clock timings only go out through `write_timings`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lotus_core::eval::EvalReport;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{csv_err, io_err, Result};
use crate::metastore::VERSION;

#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub toolkit_version: String,
    pub config: RunConfig,
    pub task: String,
    pub metric: String,
}

impl ReportHeader {
    pub fn new(config: RunConfig, task: &str, metric: &str) -> Self {
        ReportHeader {
            toolkit_version: VERSION.into(),
            config,
            task: task.into(),
            metric: metric.into(),
        }
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Writes `scores.csv`, `ranks.csv`, `rope.csv`, `folds.csv` and
/// `summary.md` into `dir`, returning the paths in that order.
pub fn emit_report(report: &EvalReport, header: &ReportHeader, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = |name: &str| dir.join(name);

    let scores: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.dataset_id.clone(),
                r.method.clone(),
                r.score.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(&path("scores.csv"), &strings(&["dataset_id", "method", "score", "error"]), &scores)?;

    let mut rank_header = vec![String::from("dataset_id")];
    let mut rank_rows = Vec::new();
    if let Some(t) = &report.ranks {
        rank_header.extend(t.methods.iter().cloned());
        for (id, row) in t.datasets.iter().zip(&t.ranks) {
            let mut r = vec![id.clone()];
            r.extend(row.iter().map(f64::to_string));
            rank_rows.push(r);
        }
    }
    write_csv(&path("ranks.csv"), &rank_header, &rank_rows)?;

    let rope: Vec<Vec<String>> = report
        .rope
        .iter()
        .map(|r| {
            vec![
                r.method_a.clone(),
                r.method_b.clone(),
                r.posterior.p_a.to_string(),
                r.posterior.p_rope.to_string(),
                r.posterior.p_b.to_string(),
            ]
        })
        .collect();
    write_csv(&path("rope.csv"), &strings(&["method_a", "method_b", "p_a", "p_rope", "p_b"]), &rope)?;

    let folds: Vec<Vec<String>> = report
        .folds
        .iter()
        .map(|f| {
            vec![
                f.dataset_id.clone(),
                f.source_dataset.clone().unwrap_or_default(),
                f.distance.map(|d| d.to_string()).unwrap_or_default(),
                f.pipeline.as_ref().map(|p| p.to_string()).unwrap_or_default(),
                f.store_ids.join(" "),
            ]
        })
        .collect();
    write_csv(
        &path("folds.csv"),
        &strings(&["dataset_id", "source_dataset", "distance", "pipeline", "store_ids"]),
        &folds,
    )?;

    fs::write(path("summary.md"), summary(report, header)?).map_err(io_err(path("summary.md")))?;

    Ok(["scores.csv", "ranks.csv", "rope.csv", "folds.csv", "summary.md"]
        .iter()
        .map(|n| path(n))
        .collect())
}

pub fn write_timings(report: &EvalReport, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .timings
        .iter()
        .map(|t| vec![t.dataset_id.clone(), t.stage.clone(), t.seconds.to_string()])
        .collect();
    write_csv(path, &strings(&["dataset_id", "stage", "seconds"]), &rows)
}

fn summary(report: &EvalReport, header: &ReportHeader) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "# Evaluation: {} / {}\n", header.task, header.metric);
    let _ = writeln!(s, "toolkit {}\n", header.toolkit_version);
    let _ = writeln!(s, "```json\n{}\n```\n", serde_json::to_string_pretty(&header.config)?);

    let _ = writeln!(s, "## Mean score\n\n| method | mean | datasets |\n|---|---|---|");
    for m in &report.methods {
        let n = report.rows.iter().filter(|r| &r.method == m).count();
        let mean = report.mean_score(m).map_or_else(|| "-".into(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "| {m} | {mean} | {n} |");
    }

    if let Some(t) = &report.ranks {
        let _ = writeln!(s, "\n## Average rank\n\n| method | rank |\n|---|---|");
        for (m, r) in t.methods.iter().zip(&t.avg_ranks) {
            let _ = writeln!(s, "| {m} | {r:.3} |");
        }
        let cd = t.critical_difference.map_or_else(|| "n/a".into(), |c| format!("{c:.3}"));
        let _ = writeln!(s, "\nFriedman chi-square {:.3}; Nemenyi CD (0.05) {cd}", t.friedman);
    }

    if !report.rope.is_empty() {
        let _ = writeln!(s, "\n## Signed-rank posterior\n\n| a | b | P(a) | P(rope) | P(b) |\n|---|---|---|---|---|");
        for r in &report.rope {
            let p = r.posterior;
            let _ = writeln!(s, "| {} | {} | {:.3} | {:.3} | {:.3} |", r.method_a, r.method_b, p.p_a, p.p_rope, p.p_b);
        }
    }

    if !report.skipped.is_empty() {
        let _ = writeln!(s, "\n## Skipped\n");
        for (id, why) in &report.skipped {
            let _ = writeln!(s, "- {id}: {why}");
        }
    }
    Ok(s)
}
