//! Dense symmetric helpers shared by the preconditioner, target and oracle code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Asymmetry tolerance, relative to the largest entry magnitude.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn check_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::input(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Checks symmetry and returns `(A + Aᵀ)/2`.
pub fn symmetrized(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    check_square(a, what)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{what} has non-finite entries")));
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::domain(format!(
            "{what} is not symmetric (max |A - A^T| = {asym:e})"
        )));
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
pub fn sym_eigen(a: &DMatrix<f64>, what: &str) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let sym = symmetrized(a, what)?;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Like [`sym_eigen`] but rejects matrices that are not positive definite.
pub fn spd_eigen(a: &DMatrix<f64>, what: &str) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (values, vectors) = sym_eigen(a, what)?;
    if let Some((idx, &lam)) = values.iter().enumerate().find(|(_, &l)| l <= 0.0) {
        return Err(Error::domain(format!(
            "{what} is not positive definite: eigenvalue #{idx} = {lam:e}"
        )));
    }
    Ok((values, vectors))
}

/// `Q diag(f(λ)) Qᵀ`.
pub fn spectral_map(
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, &lam) in values.iter().enumerate() {
        let s = f(lam);
        scaled.column_mut(j).scale_mut(s);
    }
    let out = scaled * vectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Operator 2-norm of a symmetric matrix.
pub fn sym_spectral_norm(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn frobenius_rel(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (a - reference).norm() / reference.norm()
}
