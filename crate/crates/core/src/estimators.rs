//! Channel estimators: least squares, MMSE (posterior mean and covariance)
//! and orthogonal matching pursuit over a Kronecker DFT dictionary.
//!
//! The `*Estimator` structs precompute everything that depends only on the
//! observation plan so Monte Carlo loops reduce to a matrix-vector product.

use crate::channel::ChannelKernel;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};

/// Relative singular-value cutoff for the LS pseudo-inverse.
pub const LS_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub h_hat: CVector,
    pub posterior_cov: Option<CMatrix>,
    pub scheme: String,
}

fn check_y(x_mat: &CMatrix, y: &CVector) -> Result<()> {
    if x_mat.ncols() != y.len() {
        return Err(Error::dim("received pilots", x_mat.ncols(), y.len()));
    }
    Ok(())
}

fn check_noise(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise power must be positive and finite, got {sigma2}"
        )));
    }
    Ok(())
}

/// `ĥ = (X^H)^† y`.
#[derive(Debug, Clone)]
pub struct LsEstimator {
    pinv: CMatrix,
}

impl LsEstimator {
    pub fn new(x_mat: &CMatrix) -> Self {
        Self {
            pinv: linalg::pseudo_inverse(&x_mat.adjoint(), LS_RCOND),
        }
    }

    pub fn estimate(&self, y: &CVector) -> CVector {
        &self.pinv * y
    }
}

/// Minimum-norm least-squares estimate.
pub fn ls_estimate(x_mat: &CMatrix, y: &CVector) -> Result<CVector> {
    check_y(x_mat, y)?;
    Ok(LsEstimator::new(x_mat).estimate(y))
}

/// Posterior-mean estimator `ĥ = Σ_h X (X^H Σ_h X + σ² I)^{-1} y`.
#[derive(Debug, Clone)]
pub struct MmseEstimator {
    gain: CMatrix,
    posterior_cov: CMatrix,
}

impl MmseEstimator {
    pub fn new(kernel: &ChannelKernel, x_mat: &CMatrix, sigma2: f64) -> Result<Self> {
        check_noise(sigma2)?;
        let sigma = kernel.matrix();
        if x_mat.nrows() != sigma.nrows() {
            return Err(Error::dim("mmse: X rows", sigma.nrows(), x_mat.nrows()));
        }
        let q = x_mat.ncols();
        let xs = x_mat.ad_mul(sigma); // X^H Σ
        let a = &xs * x_mat + CMatrix::identity(q, q).scale(sigma2);
        // A^{-1} X^H Σ; its adjoint is the gain since A and Σ are Hermitian.
        let solved = linalg::solve_hpd(&a, &xs)?;
        let gain = solved.adjoint();
        let posterior_cov = linalg::hermitianize(&(sigma - &gain * &xs));
        Ok(Self { gain, posterior_cov })
    }

    pub fn estimate(&self, y: &CVector) -> CVector {
        &self.gain * y
    }

    pub fn posterior_cov(&self) -> &CMatrix {
        &self.posterior_cov
    }
}

pub fn mmse_estimate(
    kernel: &ChannelKernel,
    x_mat: &CMatrix,
    y: &CVector,
    sigma2: f64,
    with_covariance: bool,
) -> Result<EstimationResult> {
    check_y(x_mat, y)?;
    let est = MmseEstimator::new(kernel, x_mat, sigma2)?;
    Ok(EstimationResult {
        h_hat: est.estimate(y),
        posterior_cov: with_covariance.then(|| est.posterior_cov.clone()),
        scheme: "mmse".into(),
    })
}

/// `Σ_h - Σ_h X (X^H Σ_h X + σ² I)^{-1} X^H Σ_h`.
pub fn posterior_covariance(kernel: &ChannelKernel, x_mat: &CMatrix, sigma2: f64) -> Result<CMatrix> {
    Ok(MmseEstimator::new(kernel, x_mat, sigma2)?.posterior_cov)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    pub h_hat: CVector,
    /// Selected dictionary atoms in selection order.
    pub support: Vec<usize>,
    pub residual_norm: f64,
}

/// OMP over the effective sensing matrix `X^H D`.
#[derive(Debug, Clone)]
pub struct OmpEstimator {
    dictionary: CMatrix,
    sensing: CMatrix,
    col_norms: Vec<f64>,
    max_atoms: usize,
    residual_tol: f64,
}

impl OmpEstimator {
    pub fn new(x_mat: &CMatrix, dictionary: &CMatrix, max_atoms: usize, residual_tol: f64) -> Result<Self> {
        if dictionary.nrows() != x_mat.nrows() {
            return Err(Error::dim("omp: dictionary rows", x_mat.nrows(), dictionary.nrows()));
        }
        let sensing = x_mat.ad_mul(dictionary);
        let col_norms = sensing.column_iter().map(|c| c.norm()).collect();
        Ok(Self {
            dictionary: dictionary.clone(),
            sensing,
            col_norms,
            max_atoms: max_atoms.min(x_mat.ncols()).min(dictionary.ncols()),
            residual_tol,
        })
    }

    pub fn estimate(&self, y: &CVector) -> OmpResult {
        let mut support: Vec<usize> = Vec::new();
        let mut residual = y.clone();
        let mut coeffs = CVector::zeros(0);
        while support.len() < self.max_atoms && residual.norm() >= self.residual_tol {
            let corr = self.sensing.ad_mul(&residual);
            let best = (0..corr.len())
                .filter(|k| !support.contains(k) && self.col_norms[*k] > 0.0)
                .map(|k| (k, corr[k].norm() / self.col_norms[k]))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            let Some((atom, score)) = best else { break };
            if score == 0.0 {
                break;
            }
            support.push(atom);
            let sub = self.sensing.select_columns(support.iter());
            coeffs = linalg::pseudo_inverse(&sub, LS_RCOND) * y;
            residual = y - sub * &coeffs;
        }
        let mut h_hat = CVector::zeros(self.dictionary.nrows());
        for (c, &atom) in coeffs.iter().zip(&support) {
            h_hat += self.dictionary.column(atom) * *c;
        }
        OmpResult {
            h_hat,
            support,
            residual_norm: residual.norm(),
        }
    }
}

pub fn omp_estimate(
    x_mat: &CMatrix,
    y: &CVector,
    dictionary: &CMatrix,
    max_atoms: usize,
    residual_tol: f64,
) -> Result<OmpResult> {
    check_y(x_mat, y)?;
    Ok(OmpEstimator::new(x_mat, dictionary, max_atoms, residual_tol)?.estimate(y))
}

/// Default OMP sparsity `⌈Q/4⌉`.
pub fn default_omp_atoms(q: usize) -> usize {
    q.div_ceil(4)
}

/// Default OMP stopping residual `√(Q σ²)`.
pub fn default_omp_residual(q: usize, sigma2: f64) -> f64 {
    (q as f64 * sigma2).sqrt()
}

/// `||h - ĥ||² / ||h||²`.
pub fn nmse(h: &CVector, h_hat: &CVector) -> Result<f64> {
    if h.len() != h_hat.len() {
        return Err(Error::dim("nmse", h.len(), h_hat.len()));
    }
    let p = h.norm_squared();
    if p == 0.0 {
        return Err(Error::InvalidParameter("NMSE undefined for a zero channel".into()));
    }
    Ok((h - h_hat).norm_squared() / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, rel_frobenius};
    use crate::plans;
    use crate::rng;

    #[test]
    fn ls_identity_and_zero() {
        let mut r = rng::stream(1, &[]);
        let y = rng::complex_normal(&mut r, 5);
        let h = ls_estimate(&CMatrix::identity(5, 5), &y).unwrap();
        assert!((h - &y).norm() < 1e-12);
        let x = CMatrix::from_column_slice(5, 3, rng::complex_normal(&mut r, 15).as_slice());
        let h = ls_estimate(&x, &CVector::zeros(3)).unwrap();
        assert_eq!(h.norm(), 0.0);
        assert!(ls_estimate(&x, &CVector::zeros(4)).is_err());
    }

    #[test]
    fn ls_exact_recovery_full_rank() {
        let mut r = rng::stream(2, &[]);
        for _ in 0..10 {
            let (mn, q) = (6, 9);
            let x = CMatrix::from_column_slice(mn, q, rng::complex_normal(&mut r, mn * q).as_slice());
            let h = rng::complex_normal(&mut r, mn);
            let y = x.ad_mul(&h);
            let h_hat = ls_estimate(&x, &y).unwrap();
            assert!((h_hat - h).norm() < 1e-8);
        }
    }

    #[test]
    fn mmse_trivial_cases() {
        let kernel = ChannelKernel::identity(2, 2);
        let x = CMatrix::identity(4, 4);
        let res = mmse_estimate(&kernel, &x, &CVector::zeros(4), 1.0, false).unwrap();
        assert_eq!(res.h_hat.norm(), 0.0);
        assert!(res.posterior_cov.is_none());

        let mut r = rng::stream(3, &[]);
        let y = rng::complex_normal(&mut r, 4);
        let res = mmse_estimate(&kernel, &x, &y, 1.0, true).unwrap();
        assert!((res.h_hat - y.scale(0.5)).norm() < 1e-14);
        let cov = res.posterior_cov.unwrap();
        assert!(rel_frobenius(&cov, &CMatrix::identity(4, 4).scale(0.5)) < 1e-14);
        assert!(mmse_estimate(&kernel, &x, &y, 0.0, false).is_err());
    }

    #[test]
    fn mmse_approaches_ls_at_vanishing_noise() {
        let (m, n) = (2, 4);
        let plan = plans::dft_plan(m, n, m * n).unwrap();
        let kernel = crate::sim::config::SimConfig::desk_default()
            .with_dims(m, 2, 2)
            .build_kernel()
            .unwrap();
        let sampler = crate::channel::GaussianSampler::new(kernel.matrix()).unwrap();
        let mut r = rng::stream(4, &[]);
        let h = sampler.sample(&mut r);
        let y = plan.x_cols.ad_mul(&h);
        let mmse = mmse_estimate(&kernel, &plan.x_cols, &y, 1e-12, false).unwrap().h_hat;
        let ls = ls_estimate(&plan.x_cols, &y).unwrap();
        assert!((mmse - ls).norm() < 1e-6);
    }

    #[test]
    fn posterior_covariance_limits() {
        let kernel = crate::sim::config::SimConfig::desk_default()
            .with_dims(2, 2, 2)
            .build_kernel()
            .unwrap();
        let cov = posterior_covariance(&kernel, &CMatrix::zeros(8, 0), 1.0).unwrap();
        assert!(rel_frobenius(&cov, kernel.matrix()) < 1e-15);
        let plan = plans::dft_plan(2, 4, 5).unwrap();
        let cov = posterior_covariance(&kernel, &plan.x_cols, 1e12).unwrap();
        assert!(rel_frobenius(&cov, kernel.matrix()) < 1e-6);
        assert!(linalg::trace_re(&cov) <= kernel.trace());
    }

    #[test]
    fn omp_zero_and_single_atom() {
        let (m, n) = (2, 4);
        let d = plans::kron_dft_dictionary(m, n);
        let x = CMatrix::identity(8, 8);
        let res = omp_estimate(&x, &CVector::zeros(8), &d, 3, 1e-12).unwrap();
        assert!(res.support.is_empty());
        assert_eq!(res.h_hat.norm(), 0.0);

        let h = d.column(5).into_owned();
        let res = omp_estimate(&x, &h, &d, 3, 1e-10).unwrap();
        assert_eq!(res.support, vec![5]);
        assert!(res.residual_norm < 1e-10);
        assert!((res.h_hat - h).norm() < 1e-10);
    }

    #[test]
    fn nmse_examples() {
        let h = CVector::from_vec(vec![c(1.0, 2.0), c(-1.0, 0.5)]);
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert!((nmse(&h, &CVector::zeros(2)).unwrap() - 1.0).abs() < 1e-15);
        assert!((nmse(&h, &h.scale(2.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse(&CVector::zeros(2), &h).is_err());
    }

    #[test]
    fn omp_defaults() {
        assert_eq!(default_omp_atoms(1), 1);
        assert_eq!(default_omp_atoms(8), 2);
        assert_eq!(default_omp_atoms(9), 3);
        assert!((default_omp_residual(4, 0.25) - 1.0).abs() < 1e-15);
    }
}
