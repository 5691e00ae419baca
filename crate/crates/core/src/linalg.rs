//! Dense complex linear-algebra helpers shared by every module.
//!
//! All matrices are `nalgebra` column-major complex matrices. Vectors that
//! represent the cascaded channel use the block layout `[h_1; ...; h_M]`
//! with one `N`-length block per BS antenna.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance used for Hermitian checks.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Negative eigenvalues down to `-PSD_TOL * lambda_max` are clipped; larger
/// violations are rejected.
pub const PSD_TOL: f64 = 1e-8;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// `||A - A^H||_F / ||A||_F`, zero for the zero matrix.
pub fn hermitian_error(a: &CMatrix) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / norm
}

/// Returns `(A + A^H) / 2`.
pub fn hermitianize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn ensure_square(a: &CMatrix, context: &'static str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim(context, a.nrows(), a.ncols()));
    }
    Ok(a.nrows())
}

pub fn ensure_hermitian(a: &CMatrix, context: &'static str) -> Result<()> {
    ensure_square(a, context)?;
    let err = hermitian_error(a);
    if err > HERMITIAN_TOL {
        return Err(Error::NotHermitian(err));
    }
    Ok(())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of two column vectors.
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let nb = b.len();
    CVector::from_fn(a.len() * nb, |i, _| a[i / nb] * b[i % nb])
}

/// `||a - b||_F / ||b||_F`; falls back to the absolute error when `b` is zero.
pub fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).norm();
    let denom = b.norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// Real eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = hermitianize(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = CMatrix::from_fn(a.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Checks PSD-ness within `PSD_TOL` and returns the clipped eigen-decomposition.
fn clipped_eigen(a: &CMatrix, context: &'static str) -> Result<(DVector<f64>, CMatrix)> {
    ensure_hermitian(a, context)?;
    let (mut values, vectors) = hermitian_eigen(a);
    if values.is_empty() {
        return Ok((values, vectors));
    }
    let max = values.max();
    let min = values.min();
    let scale = max.abs().max(min.abs());
    if min < -PSD_TOL * scale {
        return Err(Error::NotPsd { min, max });
    }
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok((values, vectors))
}

/// Projects a Hermitian matrix onto the PSD cone by clipping negative
/// eigenvalues. Fails if the violation exceeds `PSD_TOL * lambda_max`.
pub fn project_psd(a: &CMatrix, context: &'static str) -> Result<CMatrix> {
    let (values, vectors) = clipped_eigen(a, context)?;
    let scaled = CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, k| {
        vectors[(r, k)] * values[k]
    });
    Ok(hermitianize(&(scaled * vectors.adjoint())))
}

/// A factor `L` with `L L^H = A` built from the clipped eigendecomposition.
pub fn psd_factor(a: &CMatrix, context: &'static str) -> Result<CMatrix> {
    let (values, vectors) = clipped_eigen(a, context)?;
    Ok(CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, k| {
        vectors[(r, k)] * values[k].sqrt()
    }))
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
pub fn eigen_range(a: &CMatrix) -> (f64, f64) {
    let (values, _) = hermitian_eigen(a);
    if values.is_empty() {
        return (0.0, 0.0);
    }
    (values.min(), values.max())
}

/// Checks the kernel invariants: Hermitian and PSD within tolerance.
pub fn check_psd(a: &CMatrix, context: &'static str) -> Result<()> {
    clipped_eigen(a, context).map(|_| ())
}

/// `log2 det(A)` of a Hermitian positive definite matrix via Cholesky.
pub fn log2det_hpd(a: &CMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let chol = hermitianize(a).cholesky().ok_or_else(|| {
        let (min, max) = eigen_range(a);
        Error::NotPsd { min, max }
    })?;
    let l = chol.l_dirty();
    Ok((0..a.nrows()).map(|i| 2.0 * l[(i, i)].re.log2()).sum())
}

/// Solves `A Z = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let chol = hermitianize(a).cholesky().ok_or_else(|| {
        let (min, max) = eigen_range(a);
        Error::NotPsd { min, max }
    })?;
    Ok(chol.solve(b))
}

/// Moore-Penrose pseudo-inverse with singular values below
/// `rel_cutoff * sigma_max` treated as zero.
pub fn pseudo_inverse(a: &CMatrix, rel_cutoff: f64) -> CMatrix {
    if a.is_empty() {
        return CMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = rel_cutoff * smax;
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let rank = svd.singular_values.len();
    let mut acc = CMatrix::zeros(a.ncols(), a.nrows());
    for k in 0..rank {
        let s = svd.singular_values[k];
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let vk = v_t.row(k).adjoint();
        let uk = u.column(k);
        acc += (vk * uk.adjoint()).unscale(s);
    }
    acc
}

/// Unnormalized `n`-point DFT matrix, entry `(r, k) = exp(-j 2π r k / n)`.
pub fn dft_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |r, k| {
        let phase = -2.0 * std::f64::consts::PI * ((r * k) % n) as f64 / n as f64;
        C64::from_polar(1.0, phase)
    })
}

/// `x^H A x` for Hermitian `A`, returned as its real part.
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}
