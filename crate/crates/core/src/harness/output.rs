use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::monte_carlo::{Batch, MetricSummary, MonteCarloSummary, TrialRecord};
use super::trial::TrialTraces;
use super::HarnessError;

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials_csv(path: impl AsRef<Path>, records: &[TrialRecord]) -> Result<(), HarnessError> {
    write_rows(path.as_ref(), records)
}

pub fn read_trials_csv(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<TrialRecord>, _>>()?)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    metric: &'a str,
    n: usize,
    mean: f64,
    std: f64,
}

pub fn write_summary_csv(path: impl AsRef<Path>, s: &MonteCarloSummary) -> Result<(), HarnessError> {
    let metrics: [(&str, Option<&MetricSummary>); 5] = [
        ("avg_position_error", Some(&s.position_error)),
        ("dr_avg_error", Some(&s.dr_avg_error)),
        ("dr_final_error", Some(&s.dr_final_error)),
        ("measured_pair_error", s.measured_pair_error.as_ref()),
        ("unmeasured_pair_error", s.unmeasured_pair_error.as_ref()),
    ];
    let rows: Vec<SummaryRow> = metrics
        .iter()
        .filter_map(|(name, m)| {
            m.map(|m| SummaryRow {
                metric: name,
                n: m.n,
                mean: m.mean,
                std: m.std,
            })
        })
        .collect();
    write_rows(path.as_ref(), &rows)
}

pub fn write_cdf_csv(path: impl AsRef<Path>, s: &MonteCarloSummary) -> Result<(), HarnessError> {
    #[derive(Serialize)]
    struct Row {
        avg_position_error: f64,
        cumulative_probability: f64,
    }
    let rows: Vec<Row> = s
        .cdf
        .iter()
        .map(|&(e, p)| Row {
            avg_position_error: e,
            cumulative_probability: p,
        })
        .collect();
    write_rows(path.as_ref(), &rows)
}

pub fn write_boxplot_csv(path: impl AsRef<Path>, s: &MonteCarloSummary) -> Result<(), HarnessError> {
    #[derive(Serialize)]
    struct Row<'a> {
        case: &'a str,
        min: f64,
        q1: f64,
        median: f64,
        q3: f64,
        max: f64,
    }
    let b = s.boxplot;
    write_rows(
        path.as_ref(),
        &[Row {
            case: &s.case,
            min: b.min,
            q1: b.q1,
            median: b.median,
            q3: b.q3,
            max: b.max,
        }],
    )
}

/// Summary, CDF and boxplot tables for one case.
pub fn write_summary_tables(dir: &Path, s: &MonteCarloSummary) -> Result<(), HarnessError> {
    write_summary_csv(dir.join("summary.csv"), s)?;
    write_cdf_csv(dir.join(format!("cdf_{}.csv", s.case)), s)?;
    write_boxplot_csv(dir.join(format!("boxplot_{}.csv", s.case)), s)
}

pub fn write_traces(dir: &Path, traces: &TrialTraces) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_rows(&dir.join("truth.csv"), &traces.truth)?;
    write_rows(&dir.join("ekf.csv"), &traces.ekf)?;
    write_rows(&dir.join("pf.csv"), &traces.pf)?;
    write_rows(&dir.join("packets.csv"), &traces.packets)
}

/// Writes `trials.csv`, the summary tables and any recorded traces.
pub fn write_batch(dir: impl AsRef<Path>, batch: &Batch) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_trials_csv(dir.join("trials.csv"), &batch.records)?;
    write_summary_tables(dir, &batch.summary)?;
    for (i, r) in batch.results.iter().enumerate() {
        if let Some(t) = &r.traces {
            write_traces(&dir.join("traces").join(format!("trial_{i:04}")), t)?;
        }
    }
    Ok(())
}

/// Recomputes the summary tables of every batch under `dir` from its
/// `trials.csv`, either `dir` itself or its immediate subdirectories.
pub fn analyze(dir: impl AsRef<Path>) -> Result<Vec<MonteCarloSummary>, HarnessError> {
    let dir = dir.as_ref();
    let mut batch_dirs: Vec<PathBuf> = Vec::new();
    if dir.join("trials.csv").is_file() {
        batch_dirs.push(dir.to_path_buf());
    } else {
        for entry in fs::read_dir(dir)? {
            let p = entry?.path();
            if p.join("trials.csv").is_file() {
                batch_dirs.push(p);
            }
        }
        batch_dirs.sort();
    }
    if batch_dirs.is_empty() {
        return Err(HarnessError::Config(format!("no trials.csv under {}", dir.display())));
    }
    let mut out = Vec::new();
    for d in batch_dirs {
        let records = read_trials_csv(d.join("trials.csv"))?;
        if records.is_empty() {
            return Err(HarnessError::Config(format!("{} has no trials", d.display())));
        }
        let summary = MonteCarloSummary::from_records(&case_name(&d)?, &records);
        write_summary_tables(&d, &summary)?;
        out.push(summary);
    }
    Ok(out)
}

/// Case name from an existing `cdf_<case>.csv`, else the directory name.
fn case_name(dir: &Path) -> Result<String, HarnessError> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("cdf_")
                .and_then(|s| s.strip_suffix(".csv"))
                .map(str::to_owned)
        })
        .collect();
    names.sort();
    Ok(names.into_iter().next().unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "batch".into())
    }))
}

/// Short human-readable table of a summary.
pub fn format_summary(s: &MonteCarloSummary) -> String {
    let mut out = format!("case {} ({} trials)\n", s.case, s.n_trials);
    let mut line = |name: &str, m: Option<&MetricSummary>| match m {
        Some(m) => out.push_str(&format!("  {name:<24} mean {:>10.4}  std {:>10.4}\n", m.mean, m.std)),
        None => out.push_str(&format!("  {name:<24} n/a\n")),
    };
    line("avg position error [m]", Some(&s.position_error));
    line("dead reckoning final [m]", Some(&s.dr_final_error));
    line("measured pairs [m]", s.measured_pair_error.as_ref());
    line("unmeasured pairs [m]", s.unmeasured_pair_error.as_ref());
    if s.weight_resets > 0 || s.left_map_trials > 0 {
        out.push_str(&format!(
            "  flags: {} weight resets, {} trials left the map\n",
            s.weight_resets, s.left_map_trials
        ));
    }
    out
}
