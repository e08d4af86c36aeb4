use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, canonical_sign, dot, symmetric_eigen, Matrix};

/// Principal directions of the training cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    /// genes × l, orthonormal columns ordered by descending eigenvalue.
    pub components: Matrix,
    /// Variance of the data along each component.
    pub eigenvalues: Vec<f64>,
    /// Per-gene mean subtracted before projecting.
    pub center: Vec<f64>,
    /// Sum of per-gene variances of the training data.
    pub total_variance: f64,
}

impl PcaBasis {
    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    pub fn n_genes(&self) -> usize {
        self.center.len()
    }
}

/// Mean-centered copy of `data` and its column means.
pub(crate) fn center_columns(data: &Matrix) -> (Matrix, Vec<f64>) {
    let center = data.column_means();
    let mut centered = data.clone();
    for i in 0..centered.rows() {
        for (v, c) in centered.row_mut(i).iter_mut().zip(&center) {
            *v -= c;
        }
    }
    (centered, center)
}

/// Eigenvalues below this fraction of the largest are treated as null
/// directions whose vectors cannot be recovered from the Gram route.
const NULL_EIGEN_RATIO: f64 = 1e-10;

/// Fits `n_components` principal components of the rows of `data`
/// (cells × genes).
///
/// The covariance uses the `n - 1` normalization, so eigenvalues are the
/// variances of the projected data. With fewer cells than genes the
/// eigenproblem is solved on the cells × cells Gram matrix and mapped back.
/// Each component is signed so its largest-magnitude entry is positive.
pub fn fit_pca(data: &Matrix, n_components: usize) -> Result<PcaBasis> {
    let (n, m) = data.shape();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two cells"));
    }
    if !data.is_finite() {
        return Err(Error::NonFinite("PCA input"));
    }
    if n_components > n.min(m) {
        return Err(Error::invalid(alloc::format!(
            "{n_components} components requested from a {n} x {m} matrix"
        )));
    }
    let (centered, center) = center_columns(data);
    let denom = (n - 1) as f64;
    let total_variance = centered.as_slice().iter().map(|v| v * v).sum::<f64>() / denom;

    let (eigenvalues, vectors) = if n < m {
        gram_route(&centered, n_components, denom)?
    } else {
        let mut cov = centered.gram_columns();
        cov.scale(1.0 / denom);
        let eig = symmetric_eigen(&cov)?;
        let values = eig.values[..n_components].to_vec();
        let vectors = eig.vectors.into_iter().take(n_components).collect();
        (values, vectors)
    };

    let mut vectors = vectors;
    for v in &mut vectors {
        canonical_sign(v);
    }
    Ok(PcaBasis {
        components: Matrix::from_columns(m, &vectors)?,
        eigenvalues,
        center,
        total_variance,
    })
}

/// Top eigenpairs of `XᵀX / denom` through the eigenvectors of `X Xᵀ / denom`:
/// `u = Xᵀa / sqrt(denom λ)`. Null directions are completed orthonormally.
fn gram_route(centered: &Matrix, count: usize, denom: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = centered.cols();
    let mut gram = centered.gram_rows();
    gram.scale(1.0 / denom);
    let eig = symmetric_eigen(&gram)?;
    let top = eig.values.first().copied().unwrap_or(0.0);

    let mut values = Vec::with_capacity(count);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (lambda, a) in eig.values.iter().zip(&eig.vectors).take(count) {
        if top <= 0.0 || *lambda <= NULL_EIGEN_RATIO * top {
            break;
        }
        let mut u = vec_times_matrix(a, centered);
        let s = libm::sqrt(denom * lambda);
        u.iter_mut().for_each(|x| *x /= s);
        orthonormalize_against(&mut u, &vectors);
        values.push(*lambda);
        vectors.push(u);
    }
    let missing = count - vectors.len();
    if missing > 0 {
        vectors.extend(linalg::complete_orthonormal(&vectors, m, missing)?);
        values.extend(core::iter::repeat_n(0.0, missing));
    }
    Ok((values, vectors))
}

/// `aᵀ X` for a row-major X.
pub(crate) fn vec_times_matrix(a: &[f64], x: &Matrix) -> Vec<f64> {
    let mut out = alloc::vec![0.0; x.cols()];
    for (ai, row) in a.iter().zip(x.row_iter()) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += ai * r;
        }
    }
    out
}

/// Projects out `basis` from `v` twice, then normalizes.
pub(crate) fn orthonormalize_against(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
    }
    let nv = linalg::norm(v);
    if nv > 0.0 {
        v.iter_mut().for_each(|x| *x /= nv);
    }
}
