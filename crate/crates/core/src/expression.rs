//! Cells × genes expression matrices and labeled datasets.
//!
//! Values are stored row-compressed (one sparse row per cell) whatever the
//! source format was; explicit zeros are never stored, so two matrices with
//! the same entries compare equal regardless of how they were built.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    gene_names: Vec<String>,
    cell_ids: Vec<String>,
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::invalid(format!("duplicate {what} '{n}'")));
        }
    }
    Ok(())
}

impl ExpressionMatrix {
    /// Builds a matrix from a dense cells × genes array.
    pub fn from_dense(values: &Matrix, gene_names: Vec<String>, cell_ids: Vec<String>) -> Result<Self> {
        if values.rows() != cell_ids.len() {
            return Err(Error::DimensionMismatch {
                context: "cell ids vs matrix rows",
                expected: values.rows(),
                found: cell_ids.len(),
            });
        }
        if values.cols() != gene_names.len() {
            return Err(Error::DimensionMismatch {
                context: "gene names vs matrix columns",
                expected: values.cols(),
                found: gene_names.len(),
            });
        }
        let mut indptr = Vec::with_capacity(values.rows() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in values.row_iter() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self::from_csr(indptr, indices, data, gene_names, cell_ids)
    }

    /// Builds a matrix from `(cell, gene, value)` entries. Repeated
    /// coordinates are summed.
    pub fn from_triplets<I>(triplets: I, gene_names: Vec<String>, cell_ids: Vec<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n_cells = cell_ids.len();
        let n_genes = gene_names.len();
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_cells];
        for (i, j, v) in triplets {
            if i >= n_cells || j >= n_genes {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside a {n_cells} x {n_genes} matrix"
                )));
            }
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        let mut indptr = Vec::with_capacity(n_cells + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                if v != 0.0 {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self::from_csr(indptr, indices, data, gene_names, cell_ids)
    }

    fn from_csr(
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
        gene_names: Vec<String>,
        cell_ids: Vec<String>,
    ) -> Result<Self> {
        check_unique(&gene_names, "gene name")?;
        check_unique(&cell_ids, "cell id")?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("expression values"));
        }
        debug_assert_eq!(indptr.len(), cell_ids.len() + 1);
        Ok(ExpressionMatrix {
            indptr,
            indices,
            values,
            gene_names,
            cell_ids,
        })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.cell_ids.len()
    }

    #[inline]
    pub fn n_genes(&self) -> usize {
        self.gene_names.len()
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    /// Stored entries of one cell as parallel `(gene indices, values)` slices,
    /// gene indices ascending.
    #[inline]
    pub fn row(&self, cell: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[cell], self.indptr[cell + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, cell: usize, gene: usize) -> f64 {
        let (idx, vals) = self.row(cell);
        idx.binary_search(&gene).map_or(0.0, |p| vals[p])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_cells(), self.n_genes());
        for i in 0..self.n_cells() {
            let (idx, vals) = self.row(i);
            let out = m.row_mut(i);
            for (&j, &v) in idx.iter().zip(vals) {
                out[j] = v;
            }
        }
        m
    }

    /// Sum of every stored value of each cell.
    pub fn cell_totals(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Map from gene name to column index.
    pub fn gene_index(&self) -> BTreeMap<&str, usize> {
        self.gene_names
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect()
    }

    /// Keeps the given gene columns, in the given order.
    pub fn select_genes(&self, genes: &[usize]) -> Result<Self> {
        let mut remap = vec![usize::MAX; self.n_genes()];
        for (new, &old) in genes.iter().enumerate() {
            if old >= self.n_genes() {
                return Err(Error::invalid(format!("gene index {old} out of range")));
            }
            remap[old] = new;
        }
        let mut indptr = Vec::with_capacity(self.n_cells() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..self.n_cells() {
            scratch.clear();
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                if remap[j] != usize::MAX {
                    scratch.push((remap[j], v));
                }
            }
            scratch.sort_unstable_by_key(|e| e.0);
            for &(j, v) in &scratch {
                indices.push(j);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        let names = genes.iter().map(|&g| self.gene_names[g].clone()).collect();
        Self::from_csr(indptr, indices, data, names, self.cell_ids.clone())
    }

    /// Keeps the named genes, in the given order.
    pub fn select_genes_by_name<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let index = self.gene_index();
        let mut cols = Vec::with_capacity(names.len());
        let mut missing = Vec::new();
        for n in names {
            match index.get(n.as_ref()) {
                Some(&c) => cols.push(c),
                None => missing.push(String::from(n.as_ref())),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingGenes(missing));
        }
        self.select_genes(&cols)
    }

    /// Keeps the given cells, in the given order.
    pub fn select_cells(&self, cells: &[usize]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(cells.len() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for &c in cells {
            if c >= self.n_cells() {
                return Err(Error::invalid(format!("cell index {c} out of range")));
            }
            let (idx, vals) = self.row(c);
            indices.extend_from_slice(idx);
            data.extend_from_slice(vals);
            indptr.push(indices.len());
        }
        let ids = cells.iter().map(|&c| self.cell_ids[c].clone()).collect();
        Self::from_csr(indptr, indices, data, self.gene_names.clone(), ids)
    }

    /// Same values under new cell ids.
    pub fn with_cell_ids(&self, cell_ids: Vec<String>) -> Result<Self> {
        if cell_ids.len() != self.n_cells() {
            return Err(Error::DimensionMismatch {
                context: "new cell ids",
                expected: self.n_cells(),
                found: cell_ids.len(),
            });
        }
        check_unique(&cell_ids, "cell id")?;
        Ok(ExpressionMatrix {
            cell_ids,
            ..self.clone()
        })
    }

    /// Stacks matrices that share one gene list. Cell ids must stay unique.
    pub fn concat_cells(parts: &[&ExpressionMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut ids = Vec::new();
        for p in parts {
            if p.gene_names != first.gene_names {
                return Err(Error::invalid("concatenated matrices must share gene lists"));
            }
            for i in 0..p.n_cells() {
                let (idx, vals) = p.row(i);
                indices.extend_from_slice(idx);
                data.extend_from_slice(vals);
                indptr.push(indices.len());
            }
            ids.extend(p.cell_ids.iter().cloned());
        }
        Self::from_csr(indptr, indices, data, first.gene_names.clone(), ids)
    }
}

/// Restricts every matrix to the genes they all share, sorted
/// lexicographically, so every output has the same column order.
pub fn intersect_genes(matrices: &[&ExpressionMatrix]) -> Result<Vec<ExpressionMatrix>> {
    if matrices.len() < 2 {
        return Err(Error::invalid("gene intersection needs at least two datasets"));
    }
    let common = common_genes(matrices);
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    matrices
        .iter()
        .map(|m| m.select_genes_by_name(&common))
        .collect()
}

fn common_genes(matrices: &[&ExpressionMatrix]) -> Vec<String> {
    let mut common: BTreeSet<&str> = matrices[0].gene_names().iter().map(String::as_str).collect();
    for m in &matrices[1..] {
        let these: BTreeSet<&str> = m.gene_names().iter().map(String::as_str).collect();
        common = common.intersection(&these).copied().collect();
    }
    common.into_iter().map(String::from).collect()
}

/// An expression matrix with a cell-type label (and optionally a batch id)
/// per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub matrix: ExpressionMatrix,
    pub labels: Vec<String>,
    pub batch: Option<Vec<String>>,
}

impl LabeledDataset {
    /// Validates label alignment and that every class has at least two cells.
    pub fn new(matrix: ExpressionMatrix, labels: Vec<String>, batch: Option<Vec<String>>) -> Result<Self> {
        if labels.len() != matrix.n_cells() {
            return Err(Error::DimensionMismatch {
                context: "labels vs cells",
                expected: matrix.n_cells(),
                found: labels.len(),
            });
        }
        if let Some(b) = &batch {
            if b.len() != matrix.n_cells() {
                return Err(Error::DimensionMismatch {
                    context: "batch ids vs cells",
                    expected: matrix.n_cells(),
                    found: b.len(),
                });
            }
        }
        let ds = LabeledDataset {
            matrix,
            labels,
            batch,
        };
        for (label, count) in ds.class_counts() {
            if count < 2 {
                return Err(Error::ClassTooSmall {
                    label: String::from(label),
                    count,
                    required: 2,
                });
            }
        }
        Ok(ds)
    }

    pub fn n_cells(&self) -> usize {
        self.matrix.n_cells()
    }

    /// Sorted distinct labels with their cell counts.
    pub fn class_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for l in &self.labels {
            *counts.entry(l.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<String> {
        self.class_counts().keys().map(|s| String::from(*s)).collect()
    }

    /// Label dictionary (sorted) and the per-cell index into it.
    pub fn encode_labels(&self) -> (Vec<String>, Vec<usize>) {
        let dict = self.classes();
        let ids = self
            .labels
            .iter()
            .map(|l| dict.binary_search(l).expect("label is in its own dictionary"))
            .collect();
        (dict, ids)
    }

    /// Keeps the given cells, in the given order. Class sizes are not
    /// revalidated.
    pub fn select_cells(&self, cells: &[usize]) -> Result<Self> {
        Ok(LabeledDataset {
            matrix: self.matrix.select_cells(cells)?,
            labels: cells.iter().map(|&c| self.labels[c].clone()).collect(),
            batch: self
                .batch
                .as_ref()
                .map(|b| cells.iter().map(|&c| b[c].clone()).collect()),
        })
    }

    /// Keeps only cells whose label is in `keep`.
    pub fn restrict_labels(&self, keep: &BTreeSet<String>) -> Result<Self> {
        let cells: Vec<usize> = (0..self.n_cells())
            .filter(|&i| keep.contains(&self.labels[i]))
            .collect();
        self.select_cells(&cells)
    }

    /// Cell indices sorted by cell id; the canonical order splits and
    /// protocols iterate in, so results never depend on file row order.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_cells()).collect();
        let ids = self.matrix.cell_ids();
        order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        order
    }

    pub fn with_matrix(&self, matrix: ExpressionMatrix) -> Result<Self> {
        LabeledDataset::new(matrix, self.labels.clone(), self.batch.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dense_roundtrip_and_access() {
        let m = Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.0, 0.0, 3.0]]).unwrap();
        let e = ExpressionMatrix::from_dense(&m, names("g", 3), names("c", 2)).unwrap();
        assert_eq!(e.nnz(), 3);
        assert_eq!(e.get(0, 2), 2.0);
        assert_eq!(e.get(1, 0), 0.0);
        assert_eq!(e.to_dense(), m);
        assert_eq!(e.cell_totals(), vec![3.0, 3.0]);
    }

    #[test]
    fn rejects_duplicates_and_nan() {
        let m = Matrix::zeros(2, 2);
        let err = ExpressionMatrix::from_dense(&m, strings(&["a", "a"]), names("c", 2));
        assert!(matches!(err, Err(Error::Invalid(msg)) if msg.contains("duplicate gene")));
        let err = ExpressionMatrix::from_dense(&m, names("g", 2), strings(&["x", "x"]));
        assert!(matches!(err, Err(Error::Invalid(msg)) if msg.contains("duplicate cell")));
        let mut bad = Matrix::zeros(1, 1);
        bad[(0, 0)] = f64::INFINITY;
        assert!(ExpressionMatrix::from_dense(&bad, names("g", 1), names("c", 1)).is_err());
    }

    #[test]
    fn triplets_sum_duplicates_and_check_bounds() {
        let e = ExpressionMatrix::from_triplets(
            [(0, 1, 2.0), (0, 1, 3.0), (1, 0, 1.0)],
            names("g", 2),
            names("c", 2),
        )
        .unwrap();
        assert_eq!(e.get(0, 1), 5.0);
        assert!(ExpressionMatrix::from_triplets([(2, 0, 1.0)], names("g", 2), names("c", 2)).is_err());
    }

    #[test]
    fn intersect_example() {
        let a = ExpressionMatrix::from_dense(
            &Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap(),
            strings(&["C", "A", "B"]),
            strings(&["x"]),
        )
        .unwrap();
        let b = ExpressionMatrix::from_dense(
            &Matrix::from_rows(&[[4.0, 5.0, 6.0]]).unwrap(),
            strings(&["B", "C", "D"]),
            strings(&["y"]),
        )
        .unwrap();
        let out = intersect_genes(&[&a, &b]).unwrap();
        assert_eq!(out[0].gene_names(), strings(&["B", "C"]).as_slice());
        assert_eq!(out[1].gene_names(), out[0].gene_names());
        assert_eq!(out[0].to_dense().row(0), &[3.0, 1.0]);
        assert_eq!(out[1].to_dense().row(0), &[4.0, 5.0]);

        let c = ExpressionMatrix::from_dense(&Matrix::zeros(1, 1), strings(&["Z"]), strings(&["z"])).unwrap();
        assert_eq!(intersect_genes(&[&a, &c]).unwrap_err(), Error::EmptyIntersection);
        assert!(intersect_genes(&[&a]).is_err());
    }

    #[test]
    fn labeled_dataset_validation() {
        let e = ExpressionMatrix::from_dense(&Matrix::zeros(3, 1), names("g", 1), names("c", 3)).unwrap();
        let err = LabeledDataset::new(e.clone(), strings(&["a", "a", "b"]), None).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { ref label, count: 1, .. } if label == "b"));
        assert!(LabeledDataset::new(e.clone(), strings(&["a", "a"]), None).is_err());
        let err = LabeledDataset::new(e, strings(&["b", "b", "b"]), Some(strings(&["p"]))).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { context: "batch ids vs cells", .. }));
    }

    #[test]
    fn encode_and_canonical_order() {
        let e = ExpressionMatrix::from_dense(&Matrix::zeros(4, 1), names("g", 1), strings(&["d", "b", "c", "a"])).unwrap();
        let ds = LabeledDataset::new(e, strings(&["y", "x", "y", "x"]), None).unwrap();
        let (dict, ids) = ds.encode_labels();
        assert_eq!(dict, strings(&["x", "y"]));
        assert_eq!(ids, vec![1, 0, 1, 0]);
        assert_eq!(ds.canonical_order(), vec![3, 1, 2, 0]);
    }
}
