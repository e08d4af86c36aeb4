//! Low-dimensional projection of preprocessed cells.
//!
//! The ensemble basis `S = [V | U]` concatenates the MDA directions `V` (one
//! per class) with the top principal components `U`. Cells are centered with
//! the PCA mean and multiplied by `S`.

mod mda;
mod pca;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use mda::{fisher_ratio, fit_mda, scatter, MdaBasis, Scatter, DEFAULT_EPSILON_SCALE};
pub use pca::{fit_pca, PcaBasis};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBasis {
    /// genes × (k + l): MDA columns first, then PCA columns.
    pub ensemble: Matrix,
    pub pca: PcaBasis,
    pub mda: Option<MdaBasis>,
    pub gene_names: Vec<String>,
}

impl ProjectionBasis {
    /// Concatenates `[V | U]` without re-orthogonalizing across the blocks.
    /// `mda = None` gives a PCA-only basis; a PCA basis with zero components
    /// gives an MDA-only one.
    pub fn ensemble(pca: PcaBasis, mda: Option<MdaBasis>, gene_names: Vec<String>) -> Result<Self> {
        let m = pca.n_genes();
        if gene_names.len() != m {
            return Err(Error::DimensionMismatch {
                context: "ensemble gene names",
                expected: m,
                found: gene_names.len(),
            });
        }
        let ensemble = match &mda {
            Some(mda) => {
                if mda.components.rows() != m {
                    return Err(Error::DimensionMismatch {
                        context: "ensemble MDA genes vs PCA genes",
                        expected: m,
                        found: mda.components.rows(),
                    });
                }
                mda.components.hstack(&pca.components)?
            }
            None => pca.components.clone(),
        };
        if ensemble.cols() == 0 {
            return Err(Error::invalid("ensemble basis has no components"));
        }
        Ok(ProjectionBasis {
            ensemble,
            pca,
            mda,
            gene_names,
        })
    }

    pub fn n_genes(&self) -> usize {
        self.ensemble.rows()
    }

    /// Output dimension `j = k + l`.
    pub fn n_components(&self) -> usize {
        self.ensemble.cols()
    }

    pub fn n_mda(&self) -> usize {
        self.mda.as_ref().map_or(0, MdaBasis::n_components)
    }
}

/// `(data - center) · S` for cells × genes `data`.
pub fn project(data: &Matrix, basis: &ProjectionBasis) -> Result<Matrix> {
    if data.cols() != basis.n_genes() {
        return Err(Error::DimensionMismatch {
            context: "project",
            expected: basis.n_genes(),
            found: data.cols(),
        });
    }
    let mut centered = data.clone();
    for i in 0..centered.rows() {
        for (v, c) in centered.row_mut(i).iter_mut().zip(&basis.pca.center) {
            *v -= c;
        }
    }
    centered.matmul(&basis.ensemble)
}

/// Moves every batch's centroid onto the global centroid: each row has its
/// batch's column means subtracted and the overall column means added back.
/// A single batch is returned unchanged.
pub fn align_batches<B: Ord>(projected: &Matrix, batch: &[B]) -> Result<Matrix> {
    check_batch_len(projected, batch)?;
    let distinct: BTreeMap<&B, ()> = batch.iter().map(|b| (b, ())).collect();
    if distinct.len() <= 1 {
        return Ok(projected.clone());
    }
    align_to(projected, batch, &projected.column_means())
}

/// Moves every batch's centroid onto `target`.
pub fn align_to<B: Ord>(projected: &Matrix, batch: &[B], target: &[f64]) -> Result<Matrix> {
    check_batch_len(projected, batch)?;
    let j = projected.cols();
    if target.len() != j {
        return Err(Error::DimensionMismatch {
            context: "alignment target",
            expected: j,
            found: target.len(),
        });
    }
    let mut groups: BTreeMap<&B, usize> = BTreeMap::new();
    for b in batch {
        let next = groups.len();
        groups.entry(b).or_insert(next);
    }
    let mut sums = vec![vec![0.0; j]; groups.len()];
    let mut counts = vec![0usize; groups.len()];
    for (row, b) in projected.row_iter().zip(batch) {
        let g = groups[b];
        counts[g] += 1;
        for (s, v) in sums[g].iter_mut().zip(row) {
            *s += v;
        }
    }
    let shifts: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.iter().zip(target).map(|(s, t)| t - s / c as f64).collect())
        .collect();
    let mut out = projected.clone();
    for (i, b) in batch.iter().enumerate() {
        let shift = &shifts[groups[b]];
        for (v, s) in out.row_mut(i).iter_mut().zip(shift) {
            *v += s;
        }
    }
    Ok(out)
}

fn check_batch_len<B>(projected: &Matrix, batch: &[B]) -> Result<()> {
    if batch.len() != projected.rows() {
        return Err(Error::DimensionMismatch {
            context: "batch ids vs rows",
            expected: projected.rows(),
            found: batch.len(),
        });
    }
    Ok(())
}
