//! Highly variable gene selection and per-gene scaling.
//!
//! Genes are ranked by the variance-to-mean ratio of their raw values. Each
//! cell is then scaled to a fixed library size, `log1p`-transformed and
//! z-scored per gene with statistics taken from the training cells only; the
//! [`PreprocessRecipe`] carries those statistics so query cells go through the
//! exact same transform.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::expression::ExpressionMatrix;
use crate::linalg::Matrix;

/// Library size every cell is normalized to before the log transform.
pub const DEFAULT_SIZE_FACTOR_TARGET: f64 = 10_000.0;

/// Number of highly variable genes kept by default.
pub const DEFAULT_HVG_COUNT: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessRecipe {
    pub hvg_count: usize,
    pub selected_genes: Vec<String>,
    /// Post-log training mean of each selected gene.
    pub per_gene_mean: Vec<f64>,
    /// Post-log training sample standard deviation of each selected gene; all
    /// strictly positive.
    pub per_gene_std: Vec<f64>,
    pub size_factor_target: f64,
}

/// Values of every gene column, gathered and sorted ascending so that sums
/// over them do not depend on cell order.
fn sorted_gene_columns(matrix: &ExpressionMatrix) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::new(); matrix.n_genes()];
    for i in 0..matrix.n_cells() {
        let (idx, vals) = matrix.row(i);
        for (&j, &v) in idx.iter().zip(vals) {
            cols[j].push(v);
        }
    }
    for c in &mut cols {
        c.sort_by(f64::total_cmp);
    }
    cols
}

/// Population mean and variance of one gene from its stored (nonzero) values.
fn mean_var(nonzero: &[f64], n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = nonzero.iter().sum::<f64>() / nf;
    let zeros = (n - nonzero.len()) as f64;
    let ss = nonzero.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() + zeros * mean * mean;
    (mean, ss / nf)
}

/// Ranks genes by the variance-to-mean ratio of their raw values and returns
/// the names of the top `count`.
///
/// Genes with zero mean are never selected. Equal ratios are ordered by gene
/// name. The result is independent of cell order.
pub fn select_hvg(matrix: &ExpressionMatrix, count: usize) -> Result<Vec<String>> {
    if count == 0 {
        return Err(Error::invalid("hvg count must be at least 1"));
    }
    if matrix.n_genes() == 0 || matrix.n_cells() == 0 {
        return Err(Error::invalid("cannot select genes from an empty matrix"));
    }
    let n = matrix.n_cells();
    let names = matrix.gene_names();
    let mut ranked: Vec<(f64, usize)> = sorted_gene_columns(matrix)
        .iter()
        .enumerate()
        .filter_map(|(j, col)| {
            let (mean, var) = mean_var(col, n);
            (mean != 0.0).then(|| (var / mean, j))
        })
        .collect();
    if ranked.is_empty() {
        return Err(Error::invalid("no gene has a nonzero mean"));
    }
    ranked.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => names[a.1].cmp(&names[b.1]),
        other => other,
    });
    ranked.truncate(count);
    Ok(ranked.into_iter().map(|(_, j)| names[j].clone()).collect())
}

/// Library-size normalization of one value: `log1p(value * target / total)`.
/// A cell with zero total maps every gene to zero.
#[inline]
pub fn log_normalize(value: f64, total: f64, target: f64) -> f64 {
    if total <= 0.0 {
        0.0
    } else {
        libm::log1p(value * target / total)
    }
}

/// `log1p` library-size-normalized values of the named genes, cells × genes.
/// Library sizes are taken over every gene of `matrix`.
fn log_normalized_columns(matrix: &ExpressionMatrix, genes: &[String], target: f64) -> Result<Matrix> {
    let index = matrix.gene_index();
    let mut cols = Vec::with_capacity(genes.len());
    let mut missing = Vec::new();
    for g in genes {
        match index.get(g.as_str()) {
            Some(&j) => cols.push(j),
            None => missing.push(g.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingGenes(missing));
    }
    // position of each source column in the output, if selected
    let mut slot = vec![usize::MAX; matrix.n_genes()];
    for (k, &j) in cols.iter().enumerate() {
        slot[j] = k;
    }
    let mut out = Matrix::zeros(matrix.n_cells(), genes.len());
    for i in 0..matrix.n_cells() {
        let (idx, vals) = matrix.row(i);
        let total: f64 = vals.iter().sum();
        let row = out.row_mut(i);
        for (&j, &v) in idx.iter().zip(vals) {
            if slot[j] != usize::MAX {
                row[slot[j]] = log_normalize(v, total, target);
            }
        }
    }
    Ok(out)
}

/// Fits the recipe on training cells: selects `hvg_count` genes, then records
/// the post-log mean and sample standard deviation of each. Genes that are
/// constant after the log transform are dropped.
pub fn fit_recipe(matrix: &ExpressionMatrix, hvg_count: usize) -> Result<PreprocessRecipe> {
    fit_recipe_with_target(matrix, hvg_count, DEFAULT_SIZE_FACTOR_TARGET)
}

pub fn fit_recipe_with_target(
    matrix: &ExpressionMatrix,
    hvg_count: usize,
    size_factor_target: f64,
) -> Result<PreprocessRecipe> {
    if !(size_factor_target > 0.0) || !size_factor_target.is_finite() {
        return Err(Error::invalid("size factor target must be positive"));
    }
    if matrix.n_cells() < 2 {
        return Err(Error::invalid("fitting a recipe needs at least two cells"));
    }
    let hvg = select_hvg(matrix, hvg_count)?;
    let logged = log_normalized_columns(matrix, &hvg, size_factor_target)?;
    let n = logged.rows() as f64;
    let means = logged.column_means();
    let mut ss = vec![0.0; hvg.len()];
    for row in logged.row_iter() {
        for ((s, &v), &m) in ss.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }

    let mut selected_genes = Vec::new();
    let mut per_gene_mean = Vec::new();
    let mut per_gene_std = Vec::new();
    for ((gene, mean), s) in hvg.into_iter().zip(means).zip(ss) {
        let std = libm::sqrt(s / (n - 1.0));
        // a constant column can still pick up rounding noise in its sum of squares
        if std > 1e-12 * mean.abs().max(1.0) {
            selected_genes.push(gene);
            per_gene_mean.push(mean);
            per_gene_std.push(std);
        }
    }
    if selected_genes.is_empty() {
        return Err(Error::invalid("every selected gene is constant after normalization"));
    }
    Ok(PreprocessRecipe {
        hvg_count,
        selected_genes,
        per_gene_mean,
        per_gene_std,
        size_factor_target,
    })
}

impl PreprocessRecipe {
    pub fn n_genes(&self) -> usize {
        self.selected_genes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.selected_genes.len();
        if self.per_gene_mean.len() != n || self.per_gene_std.len() != n {
            return Err(Error::invalid(format!(
                "recipe has {n} genes but {} means and {} stds",
                self.per_gene_mean.len(),
                self.per_gene_std.len()
            )));
        }
        if self.per_gene_std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("recipe standard deviations must be positive"));
        }
        if self.per_gene_mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("recipe means"));
        }
        Ok(())
    }
}

/// Transforms cells with a fitted recipe: cells × selected genes, z-scored
/// with the recipe's stored statistics.
pub fn apply_recipe(matrix: &ExpressionMatrix, recipe: &PreprocessRecipe) -> Result<Matrix> {
    let mut out = log_normalized_columns(matrix, &recipe.selected_genes, recipe.size_factor_target)?;
    for i in 0..out.rows() {
        for ((v, m), s) in out
            .row_mut(i)
            .iter_mut()
            .zip(&recipe.per_gene_mean)
            .zip(&recipe.per_gene_std)
        {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}
