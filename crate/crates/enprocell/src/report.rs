//! Output tables. Every file starts with the effective configuration as
//! `#@ key=value` comment lines, followed by plain CSV (or text / JSON
//! lines). Wall-clock times go to their own file so the rest stay
//! byte-identical between runs.

use std::path::Path;

use enprocell_core::classifier::{EpochRecord, Prediction};
use enprocell_core::{EvalReport, ProjectionBasis};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{SweepResult, Timing};

/// CSV text: `header` comment lines, a column row, then `rows`.
pub fn csv_table<I, R, S>(header: &str, columns: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(Vec::new());
    w.write_record(columns).map_err(to_io)?;
    for row in rows {
        w.write_record(row).map_err(to_io)?;
    }
    let body = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    Ok(format!("{header}{}", String::from_utf8(body).expect("csv of utf-8 fields")))
}

fn to_io(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Human-readable summary.
pub fn report_text(report: &EvalReport, config: &RunConfig) -> String {
    let mut s = config.header();
    s.push_str(&format!("cells     {}\n", report.n_cells));
    s.push_str(&format!("accuracy  {:.4}\n", report.accuracy));
    s.push_str(&format!("macro_f1  {:.4}\n\n", report.macro_f1));
    let width = report.labels.iter().map(String::len).max().unwrap_or(0).max(5);
    s.push_str(&format!("{:<width$}  precision  recall  f1      support\n", "label"));
    for c in &report.per_class {
        s.push_str(&format!(
            "{:<width$}  {:<9.4}  {:<6.4}  {:<6.4}  {}\n",
            c.label, c.precision, c.recall, c.f1, c.support
        ));
    }
    s
}

pub fn summary_csv(report: &EvalReport, config: &RunConfig) -> Result<String> {
    csv_table(
        &config.header(),
        &["accuracy", "macro_f1", "n_cells"],
        [[report.accuracy.to_string(), report.macro_f1.to_string(), report.n_cells.to_string()]],
    )
}

pub fn per_class_csv(report: &EvalReport, config: &RunConfig) -> Result<String> {
    csv_table(
        &config.header(),
        &["label", "precision", "recall", "f1", "support"],
        report.per_class.iter().map(|c| {
            [
                c.label.clone(),
                c.precision.to_string(),
                c.recall.to_string(),
                c.f1.to_string(),
                c.support.to_string(),
            ]
        }),
    )
}

/// Rows are true labels, columns predicted labels.
pub fn confusion_csv(report: &EvalReport, config: &RunConfig) -> Result<String> {
    let mut columns = vec!["truth"];
    columns.extend(report.labels.iter().map(String::as_str));
    csv_table(
        &config.header(),
        &columns,
        report.labels.iter().zip(&report.confusion).map(|(label, row)| {
            std::iter::once(label.clone()).chain(row.iter().map(ToString::to_string)).collect::<Vec<_>>()
        }),
    )
}

/// One JSON object per line: the report, then one per class.
pub fn report_jsonl(report: &EvalReport, config: &RunConfig) -> String {
    let cfg: serde_json::Map<String, serde_json::Value> =
        config.entries().into_iter().map(|(k, v)| (k.to_owned(), v.into())).collect();
    let mut lines = vec![json!({
        "record": "report",
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "n_cells": report.n_cells,
        "labels": report.labels,
        "confusion": report.confusion,
        "config": cfg,
    })];
    lines.extend(report.per_class.iter().map(|c| {
        json!({
            "record": "class",
            "label": c.label,
            "precision": c.precision,
            "recall": c.recall,
            "f1": c.f1,
            "support": c.support,
        })
    }));
    lines.iter().map(|l| format!("{l}\n")).collect()
}

/// Writes `report.txt`, `summary.csv`, `per_class.csv`, `confusion.csv`,
/// `report.jsonl` and (separately, since it varies run to run)
/// `timing.csv` into `dir`.
pub fn write_report_dir(dir: &Path, report: &EvalReport, config: &RunConfig) -> Result<()> {
    write_text(&dir.join("report.txt"), &report_text(report, config))?;
    write_text(&dir.join("summary.csv"), &summary_csv(report, config)?)?;
    write_text(&dir.join("per_class.csv"), &per_class_csv(report, config)?)?;
    write_text(&dir.join("confusion.csv"), &confusion_csv(report, config)?)?;
    write_text(&dir.join("report.jsonl"), &report_jsonl(report, config))?;
    let timing = csv_table(
        &config.header(),
        &["statistic", "seconds"],
        [["predict_wall_time".to_owned(), report.predict_wall_time.to_string()]],
    )?;
    write_text(&dir.join("timing.csv"), &timing)
}

pub fn loss_csv(history: &[EpochRecord], config: &RunConfig) -> Result<String> {
    csv_table(
        &config.header(),
        &["epoch", "train_loss", "val_loss", "val_accuracy"],
        history.iter().map(|r| {
            [
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.val_loss.to_string(),
                r.val_accuracy.to_string(),
            ]
        }),
    )
}

/// Eigenvalue spectra of both blocks. PCA fractions are of the total
/// variance of the training data, MDA fractions of the MDA eigenvalue sum.
pub fn spectra_csv(basis: &ProjectionBasis, config: &RunConfig) -> Result<String> {
    let mut rows = Vec::new();
    let mut push = |name: &str, values: &[f64], total: f64| {
        let mut acc = 0.0;
        for (i, v) in values.iter().enumerate() {
            acc += v;
            let frac = if total > 0.0 { acc / total } else { 0.0 };
            rows.push([name.to_owned(), i.to_string(), v.to_string(), frac.to_string()]);
        }
    };
    if let Some(mda) = &basis.mda {
        push("mda", &mda.eigenvalues, mda.eigenvalues.iter().sum());
    }
    push("pca", &basis.pca.eigenvalues, basis.pca.total_variance);
    csv_table(&config.header(), &["basis", "component_index", "eigenvalue", "cumulative_fraction"], rows)
}

pub fn sweep_csv(result: &SweepResult, config: &RunConfig) -> Result<String> {
    csv_table(
        &config.header(),
        &["n_pcs", "accuracy", "macro_f1"],
        result
            .rows
            .iter()
            .map(|r| [r.n_pcs.to_string(), r.accuracy.to_string(), r.macro_f1.to_string()]),
    )
}

/// `median` first, then `repeat_<i>` for each raw sample.
pub fn bench_csv(timing: &Timing, n_cells: usize, config: &RunConfig) -> Result<String> {
    let mut rows = vec![["median".to_owned(), timing.median.to_string(), n_cells.to_string()]];
    rows.extend(
        timing
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| [format!("repeat_{i}"), s.to_string(), n_cells.to_string()]),
    );
    csv_table(&config.header(), &["statistic", "seconds", "n_cells"], rows)
}

/// One row per cell; with `probs`, one extra column per class named after it.
pub fn predictions_csv(
    cell_ids: &[String],
    prediction: &Prediction,
    class_names: &[String],
    probs: bool,
    config: &RunConfig,
) -> Result<String> {
    let mut columns = vec!["cell_id", "predicted_label", "max_probability"];
    if probs {
        columns.extend(class_names.iter().map(String::as_str));
    }
    csv_table(
        &config.header(),
        &columns,
        cell_ids.iter().enumerate().map(|(i, id)| {
            let mut row = vec![
                id.clone(),
                prediction.labels[i].clone(),
                prediction.max_probability(i).to_string(),
            ];
            if probs {
                row.extend(prediction.probabilities.row(i).iter().map(ToString::to_string));
            }
            row
        }),
    )
}
