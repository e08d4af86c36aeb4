use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use enprocell_core::ExpressionMatrix;

use crate::error::{Error, Result};

/// One id per line; for multi-column sidecars (10x `features.tsv`) the first
/// tab-separated field.
fn read_ids(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let id = line.split('\t').next().unwrap_or("").trim();
        if !id.is_empty() {
            ids.push(id.to_owned());
        }
    }
    Ok(ids)
}

/// Reads a MatrixMarket coordinate file laid out genes × cells, with its
/// gene and barcode sidecars, into a cells × genes matrix.
pub fn read_sparse_mtx(matrix_path: &Path, genes_path: &Path, barcodes_path: &Path) -> Result<ExpressionMatrix> {
    let genes = read_ids(genes_path)?;
    let barcodes = read_ids(barcodes_path)?;
    let file = File::open(matrix_path).map_err(|e| Error::io(matrix_path, e))?;
    let fmt = |msg: String| Error::format(matrix_path, msg);

    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| fmt("empty file".into()))?;
    let banner = banner.map_err(|e| Error::io(matrix_path, e))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    let supported = words.len() == 5
        && words[0] == "%%matrixmarket"
        && words[1] == "matrix"
        && words[2] == "coordinate"
        && (words[3] == "real" || words[3] == "integer")
        && words[4] == "general";
    if !supported {
        return Err(fmt(format!("unsupported MatrixMarket header {banner:?}")));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(matrix_path, e))?;
        let row = i as u64 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(fmt(format!("line {row}: expected 3 fields, found {}", fields.len())));
        }
        let parse_index = |col: usize| -> Result<usize> {
            fields[col].parse().map_err(|_| Error::Parse {
                path: matrix_path.to_owned(),
                row,
                column: col + 1,
                message: format!("not an index: {:?}", fields[col]),
            })
        };
        match size {
            None => {
                let dims = (parse_index(0)?, parse_index(1)?, parse_index(2)?);
                if dims.0 != genes.len() {
                    return Err(Error::format(
                        genes_path,
                        format!("{} gene ids for a matrix with {} genes", genes.len(), dims.0),
                    ));
                }
                if dims.1 != barcodes.len() {
                    return Err(Error::format(
                        barcodes_path,
                        format!("{} barcodes for a matrix with {} cells", barcodes.len(), dims.1),
                    ));
                }
                triplets.reserve(dims.2);
                size = Some(dims);
            }
            Some((n_genes, n_cells, _)) => {
                let (g, c) = (parse_index(0)?, parse_index(1)?);
                if g == 0 || g > n_genes || c == 0 || c > n_cells {
                    return Err(fmt(format!("line {row}: entry ({g}, {c}) outside {n_genes} x {n_cells}")));
                }
                let v: f64 = fields[2].parse().map_err(|_| Error::Parse {
                    path: matrix_path.to_owned(),
                    row,
                    column: 3,
                    message: format!("not a number: {:?}", fields[2]),
                })?;
                triplets.push((c - 1, g - 1, v));
            }
        }
    }
    let (_, _, nnz) = size.ok_or_else(|| fmt("missing size line".into()))?;
    if triplets.len() != nnz {
        return Err(fmt(format!("header declares {nnz} entries, file has {}", triplets.len())));
    }
    Ok(ExpressionMatrix::from_triplets(triplets, genes, barcodes)?)
}

/// `matrix.mtx`, the gene sidecar (`genes.tsv` or `features.tsv`) and
/// `barcodes.tsv` inside `dir`.
pub(crate) fn member_files(dir: &Path) -> Result<[PathBuf; 3]> {
    let genes = ["genes.tsv", "features.tsv"]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
        .ok_or_else(|| Error::format(dir, "no genes.tsv or features.tsv"))?;
    Ok([dir.join("matrix.mtx"), genes, dir.join("barcodes.tsv")])
}

/// Reads a 10x-style directory.
pub fn read_mtx_dir(dir: &Path) -> Result<ExpressionMatrix> {
    let [m, g, b] = member_files(dir)?;
    read_sparse_mtx(&m, &g, &b)
}

/// Writes `matrix` as a 10x-style directory (`matrix.mtx`, `genes.tsv`,
/// `barcodes.tsv`), creating `dir` if needed.
pub fn write_mtx_dir(matrix: &ExpressionMatrix, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write_ids = |name: &str, ids: &[String]| -> Result<()> {
        let p = dir.join(name);
        let mut out = BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?);
        for id in ids {
            writeln!(out, "{id}").map_err(|e| Error::io(&p, e))?;
        }
        out.flush().map_err(|e| Error::io(&p, e))
    };
    write_ids("genes.tsv", matrix.gene_names())?;
    write_ids("barcodes.tsv", matrix.cell_ids())?;

    let p = dir.join("matrix.mtx");
    let io = |e| Error::io(&p, e);
    let mut out = BufWriter::new(File::create(&p).map_err(io)?);
    writeln!(out, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
    writeln!(out, "{} {} {}", matrix.n_genes(), matrix.n_cells(), matrix.nnz()).map_err(io)?;
    for c in 0..matrix.n_cells() {
        let (genes, values) = matrix.row(c);
        for (g, v) in genes.iter().zip(values) {
            writeln!(out, "{} {} {v}", g + 1, c + 1).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
