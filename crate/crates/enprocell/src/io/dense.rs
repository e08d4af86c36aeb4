use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use enprocell_core::{ExpressionMatrix, Matrix};

use super::{Delimiter, Orientation};
use crate::error::{Error, Result};

/// Reads a delimited text matrix: a header row of column ids (its first cell
/// is ignored) and one row per remaining line, row id first. The result is
/// always cells × genes.
pub fn read_dense(path: &Path, orientation: Orientation, delimiter: Delimiter) -> Result<ExpressionMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter.byte())
        .from_reader(file);

    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(Error::format(path, "empty file")),
    };
    let col_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let width = header.len();

    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(Error::format(
                path,
                format!("row {line} has {} fields, header has {width}", record.len()),
            ));
        }
        row_ids.push(record[0].to_owned());
        for (j, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.to_owned(),
                row: line,
                column: j + 1,
                message: format!("not a number: {field:?}"),
            })?;
            values.push(v);
        }
    }

    let as_read = Matrix::from_vec(row_ids.len(), col_ids.len(), values)?;
    let matrix = match orientation {
        Orientation::CellsAsRows => ExpressionMatrix::from_dense(&as_read, col_ids, row_ids),
        Orientation::GenesAsRows => ExpressionMatrix::from_dense(&as_read.transpose(), row_ids, col_ids),
    };
    matrix.map_err(|e| match e {
        enprocell_core::Error::Invalid(msg) => Error::format(path, msg),
        other => other.into(),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

/// Writes `matrix` in the layout [`read_dense`] reads. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_dense(matrix: &ExpressionMatrix, path: &Path, orientation: Orientation, delimiter: Delimiter) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let sep = delimiter.byte() as char;
    let dense = matrix.to_dense();
    let io = |e| Error::io(path, e);
    let (corner, cols, rows, values) = match orientation {
        Orientation::CellsAsRows => ("cell", matrix.gene_names(), matrix.cell_ids(), dense),
        Orientation::GenesAsRows => ("gene", matrix.cell_ids(), matrix.gene_names(), dense.transpose()),
    };
    write!(out, "{corner}").map_err(io)?;
    for c in cols {
        write!(out, "{sep}{c}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for (id, row) in rows.iter().zip(values.row_iter()) {
        write!(out, "{id}").map_err(io)?;
        for v in row {
            write!(out, "{sep}{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}
