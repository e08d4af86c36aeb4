use alloc::vec;
use alloc::vec::Vec;

use super::pca::orthonormalize_against;
use crate::error::{Error, Result};
use crate::linalg::{self, canonical_sign, cholesky, solve_lower, solve_lower_transpose, symmetric_eigen, Matrix};

/// Default scale of the ridge added to the within-class scatter, relative to
/// its mean diagonal entry.
pub const DEFAULT_EPSILON_SCALE: f64 = 1e-6;

/// Class-separating directions from multiple discriminant analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct MdaBasis {
    /// genes × k, unit-length columns ordered by descending eigenvalue.
    pub components: Matrix,
    /// Generalized eigenvalues `(S_w + εI)⁻¹ S_b`, descending.
    pub eigenvalues: Vec<f64>,
    /// Mean of each class, indexed by class id.
    pub class_means: Vec<Vec<f64>>,
    /// The ε actually added to the diagonal of the within-class scatter.
    pub regularization: f64,
}

impl MdaBasis {
    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_means.len()
    }
}

/// Between-class and within-class scatter of labeled rows.
#[derive(Debug, Clone)]
pub struct Scatter {
    /// Columns `sqrt(n_i) (m_i - m)`, so that `S_b = F Fᵀ`.
    pub between_factor: Matrix,
    pub within: Matrix,
    pub class_means: Vec<Vec<f64>>,
}

impl Scatter {
    pub fn between(&self) -> Matrix {
        self.between_factor.gram_rows()
    }
}

fn check_labels(n_rows: usize, labels: &[usize]) -> Result<Vec<usize>> {
    if labels.len() != n_rows {
        return Err(Error::DimensionMismatch {
            context: "class labels vs rows",
            expected: n_rows,
            found: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    if k < 2 {
        return Err(Error::invalid("discriminant analysis needs at least two classes"));
    }
    for (c, &count) in counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::ClassTooSmall {
                label: alloc::format!("{c}"),
                count,
                required: 2,
            });
        }
    }
    Ok(counts)
}

/// Scatter matrices of `data` (rows × genes) under class ids `0..k`; every id
/// must occur at least twice.
pub fn scatter(data: &Matrix, labels: &[usize]) -> Result<Scatter> {
    let (n, m) = data.shape();
    let counts = check_labels(n, labels)?;
    let k = counts.len();

    let mut class_means = vec![vec![0.0; m]; k];
    for (row, &l) in data.row_iter().zip(labels) {
        for (s, v) in class_means[l].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (mean, &c) in class_means.iter_mut().zip(&counts) {
        mean.iter_mut().for_each(|v| *v /= c as f64);
    }
    let overall = data.column_means();

    let mut between_factor = Matrix::zeros(m, k);
    for (c, mean) in class_means.iter().enumerate() {
        let w = libm::sqrt(counts[c] as f64);
        for g in 0..m {
            between_factor[(g, c)] = w * (mean[g] - overall[g]);
        }
    }

    let mut deviations = data.clone();
    for (i, &l) in labels.iter().enumerate() {
        for (v, mu) in deviations.row_mut(i).iter_mut().zip(&class_means[l]) {
            *v -= mu;
        }
    }
    Ok(Scatter {
        between_factor,
        within: deviations.gram_columns(),
        class_means,
    })
}

/// Fisher ratio `vᵀ S_b v / vᵀ S_w v` of a direction.
pub fn fisher_ratio(scatter: &Scatter, v: &[f64]) -> f64 {
    let fv = super::pca::vec_times_matrix(v, &scatter.between_factor);
    let b = linalg::dot(&fv, &fv);
    let w = quadratic_form(&scatter.within, v);
    b / w
}

fn quadratic_form(a: &Matrix, v: &[f64]) -> f64 {
    a.row_iter()
        .zip(v)
        .map(|(row, vi)| vi * linalg::dot(row, v))
        .sum()
}

/// Fits one discriminant direction per class (capped at the gene count).
///
/// Solves `(S_w + εI)⁻¹ S_b v = λ v` with `ε = epsilon_scale · tr(S_w) / m`.
/// The ridge matrix is Cholesky-factored as `L Lᵀ`, the whitened between-class
/// scatter `L⁻¹ S_b L⁻ᵀ = B Bᵀ` (with `B = L⁻¹ F`) is diagonalized through the
/// small `Bᵀ B`, and `v = L⁻ᵀ w` maps back. At most `k - 1` eigenvalues are
/// nonzero; the remaining directions are taken from the whitened null space.
/// Components are scaled to unit length and signed so their largest entry is
/// positive.
pub fn fit_mda(data: &Matrix, labels: &[usize], epsilon_scale: f64) -> Result<MdaBasis> {
    if !data.is_finite() {
        return Err(Error::NonFinite("MDA input"));
    }
    if !(epsilon_scale > 0.0) || !epsilon_scale.is_finite() {
        return Err(Error::invalid("MDA regularization scale must be positive"));
    }
    let m = data.cols();
    if m == 0 {
        return Err(Error::invalid("MDA needs at least one gene"));
    }
    let sc = scatter(data, labels)?;
    let k = sc.class_means.len();
    let n_components = k.min(m);

    let mut epsilon = epsilon_scale * sc.within.trace() / m as f64;
    if epsilon <= 0.0 {
        // every class is a single point
        epsilon = epsilon_scale;
    }
    let mut ridge = sc.within.clone();
    for g in 0..m {
        ridge[(g, g)] += epsilon;
    }
    let l = cholesky(&ridge)?;
    let whitened = solve_lower(&l, &sc.between_factor)?;
    let small = whitened.gram_columns();
    let eig = symmetric_eigen(&small)?;
    let top = eig.values.first().copied().unwrap_or(0.0);

    let mut eigenvalues = Vec::with_capacity(n_components);
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(n_components);
    for (lambda, a) in eig.values.iter().zip(&eig.vectors).take(n_components) {
        if top <= 0.0 || *lambda <= 1e-12 * top {
            break;
        }
        // w = B a / sqrt(λ) is a unit eigenvector of B Bᵀ
        let mut w: Vec<f64> = (0..m)
            .map(|g| linalg::dot(whitened.row(g), a))
            .collect();
        orthonormalize_against(&mut w, &directions);
        eigenvalues.push(*lambda);
        directions.push(w);
    }
    let missing = n_components - directions.len();
    if missing > 0 {
        directions.extend(linalg::complete_orthonormal(&directions, m, missing)?);
        eigenvalues.extend(core::iter::repeat_n(0.0, missing));
    }

    let mut columns = Vec::with_capacity(n_components);
    for w in &directions {
        let mut v = solve_lower_transpose(&l, w)?;
        let nv = linalg::norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        canonical_sign(&mut v);
        columns.push(v);
    }
    Ok(MdaBasis {
        components: Matrix::from_columns(m, &columns)?,
        eigenvalues,
        class_means: sc.class_means,
        regularization: epsilon,
    })
}
