//! Small dense helpers for the D x D matrices used throughout the fitters.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes `m` and raises every eigenvalue to at least `floor`.
pub(crate) fn eigen_floor(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let s = symmetrize(m);
    let eig = s.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return s;
    }
    let vals = eig.eigenvalues.map(|l| l.max(floor));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    symmetrize(&out)
}

/// Inverse of a symmetric positive definite matrix plus its log-determinant.
pub(crate) fn spd_inverse_logdet(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveSemidefinite("matrix has no Cholesky factor".into()))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok((symmetrize(&chol.inverse()), logdet))
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Errors unless `m` is square, symmetric and has no eigenvalue below `-tol`.
pub(crate) fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dims(format!("{what} is {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{what} has non-finite entries")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-9 * scale {
        return Err(Error::NotPositiveSemidefinite(format!("{what} is not symmetric")));
    }
    if m.nrows() > 0 && min_eigenvalue(m) < -1e-12 * scale {
        return Err(Error::NotPositiveSemidefinite(format!(
            "{what} has a negative eigenvalue"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn quad_form(p: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for r in 0..d {
        let mut row = 0.0;
        for c in 0..d {
            row += p[r * d + c] * x[c];
        }
        s += x[r] * row;
    }
    s
}

#[inline]
pub(crate) fn mat_vec(p: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for r in 0..d {
        let mut row = 0.0;
        for c in 0..d {
            row += p[r * d + c] * x[c];
        }
        out[r] = row;
    }
}

pub(crate) fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    crate::model::row_major(m)
}
