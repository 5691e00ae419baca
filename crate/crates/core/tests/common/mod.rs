//! Independent reference implementations used as test oracles. Written
//! with explicit loops so they share no code path with the library.

#![allow(dead_code)]

use ris_obsmat::rng::{self, Stream};
use ris_obsmat::{CMatrix, CVector, C64};

pub fn random_psd(r: &mut Stream, k: usize) -> CMatrix {
    let a = CMatrix::from_vec(k, k, rng::complex_normal(r, k * k).data.into());
    let mut s = CMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..k {
                acc += a[(i, l)] * a[(j, l)].conj();
            }
            s[(i, j)] = acc / k as f64;
        }
    }
    for i in 0..k {
        for j in 0..i {
            let avg = (s[(i, j)] + s[(j, i)].conj()) * 0.5;
            s[(i, j)] = avg;
            s[(j, i)] = avg.conj();
        }
        s[(i, i)].im = 0.0;
    }
    s
}

/// `x^H A x` by loops.
pub fn quad(a: &CMatrix, x: &CVector) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..x.len() {
        for j in 0..x.len() {
            acc += x[i].conj() * a[(i, j)] * x[j];
        }
    }
    acc.re
}

/// `w ⊗ conj(θ)` by loops.
pub fn kron_obs(w: &CVector, theta: &CVector) -> CVector {
    let n = theta.len();
    CVector::from_fn(w.len() * n, |i, _| w[i / n] * theta[i % n].conj())
}

/// Batch posterior covariance `Σ - Σ X (X^H Σ X + σ² I)^{-1} X^H Σ` via
/// a Cholesky-free Gauss-Jordan inverse.
pub fn batch_posterior(sigma: &CMatrix, x: &CMatrix, sigma2: f64) -> CMatrix {
    let sx = sigma * x;
    let mut a = x.adjoint() * &sx;
    for i in 0..a.nrows() {
        a[(i, i)] += C64::new(sigma2, 0.0);
    }
    let inv = gauss_jordan_inverse(&a);
    sigma - &sx * inv * sx.adjoint()
}

pub fn gauss_jordan_inverse(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = CMatrix::identity(n, n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].norm().total_cmp(&m[(j, col)].norm()))
            .unwrap();
        m.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let p = m[(col, col)];
        for j in 0..n {
            m[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[(i, col)];
                for j in 0..n {
                    let mv = m[(col, j)];
                    let iv = inv[(col, j)];
                    m[(i, j)] -= f * mv;
                    inv[(i, j)] -= f * iv;
                }
            }
        }
    }
    inv
}

/// `log2 det(A)` for Hermitian positive definite `A` via Gaussian
/// elimination without pivoting.
pub fn log2det(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut acc = 0.0;
    for k in 0..n {
        let p = m[(k, k)];
        acc += p.re.log2();
        for i in k + 1..n {
            let f = m[(i, k)] / p;
            for j in k..n {
                let v = m[(k, j)];
                m[(i, j)] -= f * v;
            }
        }
    }
    acc
}

/// `log2 det(I + X^H Σ X / σ²)`.
pub fn batch_mi(sigma: &CMatrix, x: &CMatrix, sigma2: f64) -> f64 {
    let q = x.ncols();
    let g = x.adjoint() * sigma * x / C64::new(sigma2, 0.0) + CMatrix::identity(q, q);
    log2det(&g)
}

pub fn rel_fro(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-sided paired test that `a` is smaller than `b` at 95% confidence.
pub fn paired_less(a: &[f64], b: &[f64]) -> (bool, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let (mean, se) = mean_se(&d);
    let z = if se > 0.0 { mean / se } else if mean > 0.0 { f64::INFINITY } else { 0.0 };
    (z > 1.645, z)
}
