//! Small dense-matrix helpers shared by the geometry, structure and flow code.

use nalgebra::{DMatrix, DVector};

/// Singular-value threshold for rank and nondegeneracy decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Largest absolute entry; the `‖·‖∞` used for every residual in this crate.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank with singular values above [`RANK_TOL`].
pub fn rank(m: &DMatrix<f64>) -> usize {
    singular_values(m)
        .into_iter()
        .filter(|s| *s > RANK_TOL)
        .count()
}

pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn skew_residual(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m + m.transpose()))
}

pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |r, _| v[idx[r]])
}

pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

pub fn from_row_major(n: usize, data: &[f64]) -> Option<DMatrix<f64>> {
    (data.len() == n * n).then(|| DMatrix::from_row_slice(n, n, data))
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || m.clone().cholesky().is_some()
}

/// Eigen-decomposition of a `g`-self-adjoint operator `op` (so `g·op` is
/// symmetric) for positive definite `g`.
///
/// Returns ascending eigenvalues and a `g`-orthonormal eigenframe (columns).
pub fn g_self_adjoint_eigen(
    g: &DMatrix<f64>,
    op: &DMatrix<f64>,
) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = g.nrows();
    let chol = g.clone().cholesky()?;
    let l = chol.l();
    let bilinear = symmetric_part(&(g * op));
    let l_inv = l.clone().try_inverse()?;
    let reduced = symmetric_part(&(&l_inv * bilinear * l_inv.transpose()));
    let eig = reduced.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lt_inv = l_inv.transpose();
    let frame = DMatrix::from_fn(n, n, |r, c| {
        let w = eig.eigenvectors.column(order[c]);
        (lt_inv.row(r) * w)[(0, 0)]
    });
    Some((values, frame))
}

/// Eigenvalues of a general real matrix as `(re, im)` pairs, sorted by real part.
pub fn eigenvalues_general(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = m
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}
