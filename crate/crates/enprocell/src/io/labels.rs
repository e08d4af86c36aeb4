use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use enprocell_core::{ExpressionMatrix, LabeledDataset};

use super::Delimiter;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LabelOptions {
    pub delimiter: Delimiter,
    /// Skip the first line.
    pub header: bool,
}

impl Default for LabelOptions {
    fn default() -> Self {
        LabelOptions {
            delimiter: Delimiter::Comma,
            header: false,
        }
    }
}

/// Joins a `cell_id,label[,batch]` table onto the cells of `matrix`.
///
/// Every cell must be labeled. Rows naming cells the matrix does not have
/// are dropped; one warning per such row is returned (and logged).
pub fn read_labels(path: &Path, matrix: ExpressionMatrix, options: LabelOptions) -> Result<(LabeledDataset, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.header)
        .flexible(true)
        .delimiter(options.delimiter.byte())
        .from_reader(file);

    let index: HashMap<&str, usize> = matrix.cell_ids().iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut labels: Vec<Option<String>> = vec![None; matrix.n_cells()];
    let mut batch: Vec<Option<String>> = vec![None; matrix.n_cells()];
    let mut width = None;
    let mut warnings = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if !(2..=3).contains(&record.len()) {
            return Err(Error::format(path, format!("line {line}: expected 2 or 3 fields, found {}", record.len())));
        }
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(Error::format(path, format!("line {line}: batch column present on some rows only")));
        }
        let id = record[0].trim();
        let Some(&cell) = index.get(id) else {
            let w = format!("{}: line {line}: unknown cell id {id:?}, row dropped", path.display());
            log::warn!("{w}");
            warnings.push(w);
            continue;
        };
        if labels[cell].is_some() {
            return Err(Error::format(path, format!("line {line}: cell {id:?} labeled twice")));
        }
        labels[cell] = Some(record[1].trim().to_owned());
        if record.len() == 3 {
            batch[cell] = Some(record[2].trim().to_owned());
        }
    }

    let missing: Vec<String> = labels
        .iter()
        .zip(matrix.cell_ids())
        .filter(|(l, _)| l.is_none())
        .map(|(_, id)| id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(enprocell_core::Error::UnlabeledCells(missing).into());
    }
    let labels = labels.into_iter().map(Option::unwrap).collect();
    let batch = (width == Some(3)).then(|| batch.into_iter().map(Option::unwrap).collect());
    Ok((LabeledDataset::new(matrix, labels, batch)?, warnings))
}

/// Writes `cell_id,label[,batch]` rows in matrix order, without a header.
pub fn write_labels(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for (i, (id, label)) in dataset.matrix.cell_ids().iter().zip(&dataset.labels).enumerate() {
        match &dataset.batch {
            Some(b) => writeln!(out, "{id},{label},{}", b[i]),
            None => writeln!(out, "{id},{label}"),
        }
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Label counts, for log messages.
pub fn summarize(dataset: &LabeledDataset) -> String {
    let counts: BTreeMap<&str, usize> = dataset.class_counts();
    counts.iter().map(|(l, c)| format!("{l}={c}")).collect::<Vec<_>>().join(" ")
}
