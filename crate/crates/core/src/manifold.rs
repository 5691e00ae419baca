//! Riemannian gradient ascent for modulus-constant quadratic programs
//!
//! ```text
//! max v^H U v   s.t. |v_k| = ρ for every k
//! ```
//!
//! The objective is shifted to `f(v) = v^H (U + αI) v`, which differs from
//! the raw objective by the constant `α K ρ²` on the torus. With
//! `α = K λmax / 4` and `β = 1 / (λmax + 2α)` (which satisfy
//! `α ≥ K λmax / 8` and `0 < β < 1 / (λmax + α)`), the fixed-step update
//! `v ← ρ exp(j ∠(v + β d))` is monotone in `f`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};

/// Relative tolerance for the modulus check on solver inputs.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CmqpProblem {
    u: CMatrix,
    rho: f64,
}

impl CmqpProblem {
    pub fn new(u: CMatrix, rho: f64) -> Result<Self> {
        linalg::ensure_hermitian(&u, "CmqpProblem")?;
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { u, rho })
    }

    pub fn u(&self) -> &CMatrix {
        &self.u
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn k(&self) -> usize {
        self.u.nrows()
    }

    /// Raw objective `v^H U v`.
    pub fn value(&self, v: &CVector) -> f64 {
        linalg::quad_form(&self.u, v)
    }

    /// Shifted objective `v^H (U + αI) v`.
    pub fn shifted_value(&self, alpha: f64, v: &CVector) -> f64 {
        self.value(v) + alpha * v.norm_squared()
    }

    pub fn check_feasible(&self, v: &CVector) -> Result<()> {
        check_on_torus(v, self.rho, self.k())
    }
}

pub(crate) fn check_on_torus(v: &CVector, rho: f64, k: usize) -> Result<()> {
    if v.len() != k {
        return Err(Error::dim("constraint torus", k, v.len()));
    }
    if let Some((i, z)) = v
        .iter()
        .enumerate()
        .find(|(_, z)| (z.norm() - rho).abs() > FEASIBILITY_TOL * rho)
    {
        return Err(Error::Infeasible(format!(
            "|v[{i}]| = {} but rho = {rho}",
            z.norm()
        )));
    }
    Ok(())
}

/// Iteration controls for the CMQP solver and the alternating outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative objective change below which the inner loop stops.
    pub tol_f: f64,
    pub max_iter: usize,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    /// Relative change of the MI increment below which alternation stops.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Also start each pilot's alternation from the Kronecker fit of the
    /// dominant posterior eigenvector, not only from random phases.
    pub spectral_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_f: 1e-6,
            max_iter: 200,
            eig_tol: 1e-8,
            eig_max_iter: 500,
            outer_tol: 1e-4,
            outer_max_iter: 20,
            spectral_start: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.tol_f > 0.0) {
            return bad("tol_f must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1");
        }
        if !(self.eig_tol > 0.0) || self.eig_max_iter == 0 {
            return bad("eig_tol must be > 0 and eig_max_iter >= 1");
        }
        if !(self.outer_tol > 0.0) || self.outer_max_iter == 0 {
            return bad("outer_tol must be > 0 and outer_max_iter >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub v: CVector,
    /// `v^H (U + αI) v` at the returned point.
    pub f_final: f64,
    pub alpha: f64,
    pub iterations: usize,
    /// Objective at the start point followed by one entry per iteration.
    pub f_trace: Vec<f64>,
}

fn rayleigh_power(u: &CMatrix, start: CVector, opts: &SolverOptions) -> f64 {
    let mut v = start.unscale(start.norm());
    let mut lambda = 0.0;
    for it in 0..opts.eig_max_iter {
        let w = u * &v;
        let next = v.dotc(&w).re;
        let norm = w.norm();
        if norm == 0.0 {
            return next.max(0.0);
        }
        v = w.unscale(norm);
        if it > 0 && (next - lambda).abs() <= opts.eig_tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Deterministic start with quadratically growing phases.
fn rotated_start(k: usize) -> CVector {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    CVector::from_fn(k, |i, _| {
        let i = i as f64;
        C64::from_polar(1.0, std::f64::consts::TAU * GOLDEN * (i * i + i) / 2.0)
    })
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
///
/// Runs from the normalized all-ones vector and from a rotated start and
/// keeps the larger Rayleigh quotient, so a start vector orthogonal to the
/// dominant eigenvector (common for symmetric Toeplitz kernels) cannot hide
/// the top of the spectrum. Returns 0 for the zero matrix.
pub fn largest_eigenvalue(u: &CMatrix, opts: &SolverOptions) -> f64 {
    let k = u.nrows();
    if k == 0 || u.iter().all(|z| z.norm() == 0.0) {
        return 0.0;
    }
    let ones = CVector::from_element(k, C64::new(1.0, 0.0));
    let a = rayleigh_power(u, ones, opts);
    if k == 1 {
        return a.max(0.0);
    }
    let b = rayleigh_power(u, rotated_start(k), opts);
    a.max(b).max(0.0)
}

/// `(α, β) = (K λmax / 4, 1 / (λmax + 2α))`; `(0, 1)` for a flat objective.
pub fn step_parameters(lambda_max: f64, k: usize) -> Result<(f64, f64)> {
    if !(lambda_max >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda_max must be >= 0, got {lambda_max}"
        )));
    }
    if lambda_max == 0.0 {
        return Ok((0.0, 1.0));
    }
    let alpha = k as f64 * lambda_max / 4.0;
    Ok((alpha, 1.0 / (lambda_max + 2.0 * alpha)))
}

/// `(U + αI) v`.
pub fn euclidean_gradient(problem: &CmqpProblem, alpha: f64, v: &CVector) -> Result<CVector> {
    problem.check_feasible(v)?;
    Ok(problem.u() * v + v.scale(alpha))
}

/// Projection of `egrad` onto the tangent space of the torus at `v`:
/// `egrad - v ⊙ Re(conj(v) ⊙ egrad) / ρ²`.
pub fn riemannian_gradient(v: &CVector, egrad: &CVector, rho: f64) -> Result<CVector> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    if v.len() != egrad.len() {
        return Err(Error::dim("riemannian_gradient", v.len(), egrad.len()));
    }
    let rho2 = rho * rho;
    Ok(CVector::from_fn(v.len(), |i, _| {
        let radial = (v[i].conj() * egrad[i]).re / rho2;
        egrad[i] - v[i] * radial
    }))
}

/// `ρ exp(j ∠(v + β d))`. A coordinate where `v + βd` is exactly zero keeps
/// the phase of `v`.
pub fn retract(v: &CVector, direction: &CVector, beta: f64, rho: f64) -> CVector {
    CVector::from_fn(v.len(), |i, _| {
        let z = v[i] + direction[i] * beta;
        let phase = if z.norm() == 0.0 { v[i].arg() } else { z.arg() };
        C64::from_polar(rho, phase)
    })
}

/// Feasible start carrying the phases of the dominant eigenvector of `U`.
pub fn spectral_start(u: &CMatrix, rho: f64) -> CVector {
    let k = u.nrows();
    if k == 0 {
        return CVector::zeros(0);
    }
    let (_, vecs) = linalg::hermitian_eigen(u);
    let top = vecs.column(k - 1);
    CVector::from_fn(k, |i, _| C64::from_polar(rho, top[i].arg()))
}

/// Monotone Riemannian gradient ascent from `v0`.
pub fn solve_cmqp(problem: &CmqpProblem, v0: &CVector, opts: &SolverOptions) -> Result<SolverResult> {
    opts.validate()?;
    problem.check_feasible(v0)?;
    let rho = problem.rho();
    // Project the start exactly onto the torus so every iterate is exact.
    let mut v = retract(v0, &CVector::zeros(v0.len()), 0.0, rho);

    let lambda_max = largest_eigenvalue(problem.u(), opts);
    let (alpha, beta) = step_parameters(lambda_max, problem.k())?;
    let mut f = problem.shifted_value(alpha, &v);
    let mut f_trace = vec![f];
    if lambda_max == 0.0 {
        return Ok(SolverResult {
            v,
            f_final: f,
            alpha,
            iterations: 1,
            f_trace,
        });
    }

    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let egrad = euclidean_gradient(problem, alpha, &v)?;
        let d = riemannian_gradient(&v, &egrad, rho)?;
        v = retract(&v, &d, beta, rho);
        let next = problem.shifted_value(alpha, &v);
        f_trace.push(next);
        let change = (next - f).abs();
        f = next;
        if change <= opts.tol_f * f.abs() {
            break;
        }
    }
    Ok(SolverResult {
        v,
        f_final: f,
        alpha,
        iterations,
        f_trace,
    })
}

/// Runs [`solve_cmqp`] from each start and keeps the best raw objective.
/// The ascent is local; for `K >= 3` a single start can stop at a
/// non-global maximum.
pub fn solve_cmqp_multistart(problem: &CmqpProblem, starts: &[CVector], opts: &SolverOptions) -> Result<SolverResult> {
    let mut best: Option<SolverResult> = None;
    for v0 in starts {
        let res = solve_cmqp(problem, v0, opts)?;
        let better = match &best {
            Some(b) => problem.value(&res.v) > problem.value(&b.v),
            None => true,
        };
        if better {
            best = Some(res);
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("at least one start is required".into()))
}
