//! Small dense linear-algebra helpers shared by the rate and solver code.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type C64 = Complex64;

/// `1 / (2 ln 2)`: converts a natural log-det of a real-decomposed
/// covariance into bits per complex channel use.
pub const HALF_LOG2: f64 = 0.5 / std::f64::consts::LN_2;

/// Natural log-determinant of a symmetric positive definite matrix.
pub fn logdet_spd(a: &RMat) -> Result<f64> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Conditioning(format!("{}x{} matrix is not positive definite", a.nrows(), a.ncols())))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn inverse_spd(a: &RMat) -> Result<RMat> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Conditioning(format!("{}x{} matrix is not positive definite", a.nrows(), a.ncols())))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Log-determinant and inverse from one factorization.
pub fn logdet_inverse_spd(a: &RMat) -> Result<(f64, RMat)> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Conditioning(format!("{}x{} matrix is not positive definite", a.nrows(), a.ncols())))?;
    let ld = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((ld, symmetrize(&chol.inverse())))
}

pub fn symmetrize(a: &RMat) -> RMat {
    (a + a.transpose()) * 0.5
}

/// Symmetric square root with negative eigenvalues clipped at zero.
pub fn psd_sqrt(a: &RMat) -> RMat {
    let eig = SymmetricEigen::new(symmetrize(a));
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&d) * q.transpose()))
}

pub fn min_eigenvalue(a: &RMat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &RMat, b: &RMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Real image of a complex matrix: `[[Re A, -Im A], [Im A, Re A]]`.
pub fn real_embed(a: &CMat) -> RMat {
    let (m, n) = a.shape();
    let mut out = RMat::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + m, j)] = z.im;
            out[(i + m, j + n)] = z.re;
        }
    }
    out
}

/// Real image of complex conjugation on `n`-vectors: `diag(I, -I)`.
pub fn conjugation(n: usize) -> RMat {
    let mut out = RMat::identity(2 * n, 2 * n);
    for i in n..2 * n {
        out[(i, i)] = -1.0;
    }
    out
}

/// Real image of multiplication by `j`: `[[0, -I], [I, 0]]`.
pub fn complex_structure(n: usize) -> RMat {
    let mut out = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        out[(i, i + n)] = -1.0;
        out[(i + n, i)] = 1.0;
    }
    out
}

/// Real image of the widely-linear map `x -> A1 x + A2 x*`.
pub fn widely_linear(a1: &CMat, a2: &CMat) -> RMat {
    real_embed(a1) + real_embed(a2) * conjugation(a2.ncols())
}

pub fn stack_re_im(x: &[C64]) -> Vec<f64> {
    x.iter().map(|z| z.re).chain(x.iter().map(|z| z.im)).collect()
}

pub fn unstack_re_im(z: &[f64]) -> Vec<C64> {
    let n = z.len() / 2;
    (0..n).map(|i| C64::new(z[i], z[i + n])).collect()
}

pub fn frobenius(a: &RMat) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
