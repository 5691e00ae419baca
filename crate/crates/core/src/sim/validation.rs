//! Oracle identity suite run by `ris-obsmat validate`.
//!
//! Every check compares a library computation against an independent
//! closed form or exhaustive search at small fixed dimensions.

use serde::Serialize;

use crate::channel::{cascade_channel, ChannelKernel};
use crate::design::{self, PosteriorState};
use crate::error::Result;
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::manifold::{self, CmqpProblem, SolverOptions};
use crate::plans;
use crate::rng::{self, Stream};

const SEED: u64 = 0x5eed_0ac1e;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(check: &str, max_error: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            max_error,
            tolerance,
            passed: max_error.is_finite() && max_error <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// One step of the posterior recursion: `(Σ_t, x, σ²) -> Σ_{t+1}`.
pub type Recursion = dyn Fn(&CMatrix, &CVector, f64) -> Result<CMatrix>;

/// The library's rank-one posterior update.
pub fn library_recursion(sigma: &CMatrix, x: &CVector, sigma2: f64) -> Result<CMatrix> {
    let k = sigma.nrows();
    let mut state = PosteriorState::from_matrix(sigma.clone(), k, 1)?;
    state.update(x, sigma2)?;
    Ok(state.sigma().clone())
}

pub fn run_validation() -> Result<ValidationReport> {
    run_validation_with(&library_recursion)
}

/// Runs the suite with the posterior recursion replaced by `recursion`.
pub fn run_validation_with(recursion: &Recursion) -> Result<ValidationReport> {
    let checks = vec![
        kronecker_identity(1000)?,
        chain_rule(recursion, 50)?,
        batch_vs_recursion(recursion, 50)?,
        cmqp_analytic()?,
        cmqp_grid(64)?,
        tangency(100)?,
        monotonicity(100)?,
        plan_feasibility()?,
    ];
    Ok(ValidationReport { checks })
}

/// Random Hermitian PSD matrix `A A^H / k` with `A` standard complex normal.
pub fn random_psd(rng: &mut Stream, k: usize) -> CMatrix {
    let a = CMatrix::from_vec(k, k, rng::complex_normal(rng, k * k).data.into());
    linalg::hermitianize(&(&a * a.adjoint()).unscale(k as f64))
}

/// `w^H G diag(θ) g` with `G = F^H` against `x^H h`, `x = w ⊗ conj(θ)`.
pub fn kronecker_identity(draws: usize) -> Result<CheckResult> {
    let (m, n) = (3, 4);
    let mut rng = rng::stream(SEED, &[rng::label("kronecker")]);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let g = rng::complex_normal(&mut rng, n);
        let f = CMatrix::from_vec(n, m, rng::complex_normal(&mut rng, n * m).data.into());
        let w = rng::random_phases(&mut rng, m, 1.0 / (m as f64).sqrt());
        let theta = rng::random_phases(&mut rng, n, 1.0);
        let reflected = CVector::from_fn(n, |i, _| theta[i] * g[i]);
        let direct = w.dotc(&(f.adjoint() * reflected));
        let h = cascade_channel(&g, &f)?;
        let x = design::observation_vector(&w, &theta);
        let via_x = x.dotc(&h);
        worst = worst.max((direct - via_x).norm() / direct.norm().max(1.0));
    }
    Ok(CheckResult::new("kronecker-identity", worst, 1e-10))
}

fn random_instance(rng: &mut Stream, m: usize, n: usize, q: usize) -> Result<(CMatrix, CMatrix)> {
    let sigma = random_psd(rng, m * n);
    let plan = plans::random_plan(m, n, q, rng)?;
    Ok((sigma, plan.x_cols))
}

/// Sum of greedy increments along the recursion against the log-det.
pub fn chain_rule(recursion: &Recursion, kernels: usize) -> Result<CheckResult> {
    let (m, n, q, sigma2) = (2, 4, 8, 0.1);
    let mut rng = rng::stream(SEED, &[rng::label("chain-rule")]);
    let mut worst = 0.0f64;
    for _ in 0..kernels {
        let (sigma, x_mat) = random_instance(&mut rng, m, n, q)?;
        let batch = design::batch_mi(&sigma, &x_mat, sigma2)?;
        let mut s = sigma.clone();
        let mut sum = 0.0;
        for k in 0..q {
            let x = x_mat.column(k).into_owned();
            sum += (1.0 + linalg::quad_form(&s, &x).max(0.0) / sigma2).log2();
            s = recursion(&s, &x, sigma2)?;
        }
        worst = worst.max((sum - batch).abs() / batch.abs().max(1e-300));
    }
    Ok(CheckResult::new("chain-rule", worst, 1e-6))
}

/// Posterior after `Q` rank-one steps against
/// `Σ - Σ X (X^H Σ X + σ² I)^{-1} X^H Σ`.
pub fn batch_vs_recursion(recursion: &Recursion, kernels: usize) -> Result<CheckResult> {
    let (m, n, q, sigma2) = (2, 4, 8, 0.1);
    let mut rng = rng::stream(SEED, &[rng::label("batch-recursion")]);
    let mut worst = 0.0f64;
    for _ in 0..kernels {
        let (sigma, x_mat) = random_instance(&mut rng, m, n, q)?;
        let sx = &sigma * &x_mat;
        let a = x_mat.ad_mul(&sx) + CMatrix::identity(q, q).scale(sigma2);
        let batch = &sigma - &sx * linalg::solve_hpd(&a, &sx.adjoint())?;
        let mut s = sigma.clone();
        for k in 0..q {
            s = recursion(&s, &x_mat.column(k).into_owned(), sigma2)?;
        }
        worst = worst.max(linalg::rel_frobenius(&s, &batch));
    }
    Ok(CheckResult::new("batch-vs-recursion", worst, 1e-8))
}

/// `U = [[2, 1], [1, 1]]` on the unit torus has optimum 5 at equal phases.
pub fn cmqp_analytic() -> Result<CheckResult> {
    let c = |re| C64::new(re, 0.0);
    let u = CMatrix::from_row_slice(2, 2, &[c(2.0), c(1.0), c(1.0), c(1.0)]);
    let problem = CmqpProblem::new(u, 1.0)?;
    let v0 = CVector::from_vec(vec![c(1.0), C64::from_polar(1.0, 2.5)]);
    let res = manifold::solve_cmqp(&problem, &v0, &SolverOptions::default())?;
    Ok(CheckResult::new("cmqp-analytic", (problem.value(&res.v) - 5.0).abs(), 1e-4))
}

/// Best value of `v^H U v` over `v_k = ρ e^{j 2π i_k / levels}`; the first
/// phase is pinned to zero since the objective ignores a global phase.
pub fn grid_optimum(problem: &CmqpProblem, levels: usize) -> f64 {
    let k = problem.k();
    let phases: Vec<C64> = (0..levels)
        .map(|i| C64::from_polar(problem.rho(), std::f64::consts::TAU * i as f64 / levels as f64))
        .collect();
    let mut v = CVector::from_element(k, phases[0]);
    let mut idx = vec![0usize; k];
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(problem.value(&v));
        let mut pos = 1;
        while pos < k {
            idx[pos] += 1;
            if idx[pos] < levels {
                v[pos] = phases[idx[pos]];
                break;
            }
            idx[pos] = 0;
            v[pos] = phases[0];
            pos += 1;
        }
        if pos >= k {
            return best;
        }
    }
}

/// Number of random starts added to the spectral start in the grid check.
pub const GRID_RANDOM_STARTS: usize = 4;

/// Shortfall `1 - f / f_grid` of the solver against the exhaustive grid.
/// The solver runs from the dominant eigenvector's phases and from
/// [`GRID_RANDOM_STARTS`] random points.
pub fn cmqp_grid(instances: usize) -> Result<CheckResult> {
    let mut rng = rng::stream(SEED, &[rng::label("cmqp-grid")]);
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    for i in 0..instances {
        let k = 2 + i % 3;
        let problem = CmqpProblem::new(random_psd(&mut rng, k), 1.0)?;
        let mut starts = vec![manifold::spectral_start(problem.u(), 1.0)];
        starts.extend((0..GRID_RANDOM_STARTS).map(|_| rng::random_phases(&mut rng, k, 1.0)));
        let f = problem.value(&manifold::solve_cmqp_multistart(&problem, &starts, &opts)?.v);
        let best = grid_optimum(&problem, 64);
        worst = worst.max(1.0 - f / best);
    }
    Ok(CheckResult::new("cmqp-grid-99pct", worst, 0.01))
}

/// `Re(conj(v) ⊙ grad)` must vanish after projection.
pub fn tangency(points: usize) -> Result<CheckResult> {
    let mut rng = rng::stream(SEED, &[rng::label("tangency")]);
    let mut worst = 0.0f64;
    for i in 0..points {
        let k = 1 + i % 16;
        let rho = 0.25 + (i % 4) as f64 * 0.5;
        let v = rng::random_phases(&mut rng, k, rho);
        let egrad = rng::complex_normal(&mut rng, k);
        let d = manifold::riemannian_gradient(&v, &egrad, rho)?;
        for j in 0..k {
            worst = worst.max((v[j].conj() * d[j]).re.abs() / egrad.norm());
        }
    }
    Ok(CheckResult::new("tangency", worst, 1e-12))
}

/// Largest relative drop of the shifted objective between iterates.
pub fn monotonicity(instances: usize) -> Result<CheckResult> {
    let mut rng = rng::stream(SEED, &[rng::label("monotonicity")]);
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    for i in 0..instances {
        let k = 1 + i % 16;
        let rho = 1.0 / (1 + i % 3) as f64;
        let problem = CmqpProblem::new(random_psd(&mut rng, k), rho)?;
        let v0 = rng::random_phases(&mut rng, k, rho);
        let res = manifold::solve_cmqp(&problem, &v0, &opts)?;
        for pair in res.f_trace.windows(2) {
            worst = worst.max((pair[0] - pair[1]) / pair[0].abs().max(1e-300));
        }
    }
    Ok(CheckResult::new("monotonicity", worst, 1e-9))
}

/// Modulus constraints on a designed plan.
pub fn plan_feasibility() -> Result<CheckResult> {
    let (m, n) = (2, 4);
    let mut rng = rng::stream(SEED, &[rng::label("feasibility")]);
    let kernel = ChannelKernel::new(random_psd(&mut rng, m * n), m, n)?;
    let plan = design::armo_design(&kernel, 6, 0.1, &SolverOptions::default(), &mut rng)?;
    let wmod = 1.0 / (m as f64).sqrt();
    let worst = plan
        .w_cols
        .iter()
        .map(|z| (z.norm() - wmod).abs())
        .chain(plan.theta_cols.iter().map(|z| (z.norm() - 1.0).abs()))
        .fold(0.0, f64::max);
    Ok(CheckResult::new("plan-feasibility", worst, design::PLAN_MODULUS_TOL))
}
