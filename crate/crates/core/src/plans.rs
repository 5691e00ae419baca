//! Baseline observation plans: DFT, random, and the combiner-only greedy
//! design that stands in for ice-filling.

use crate::channel::ChannelKernel;
use crate::design::{self, ObservationPlan, PosteriorState};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::manifold::{self, SolverOptions};
use crate::rng::{self, Stream};

fn check_q(q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::InvalidParameter("pilot count must be >= 1".into()));
    }
    Ok(())
}

/// DFT codebook plan. Pilot `k` (0-based) uses BS beam `(k / N) mod M`
/// scaled by `1/√M` and RIS beam `k mod N`; the RIS index advances fastest.
pub fn dft_plan(m: usize, n: usize, q: usize) -> Result<ObservationPlan> {
    check_q(q)?;
    let fm = linalg::dft_matrix(m);
    let fn_ = linalg::dft_matrix(n);
    let scale = 1.0 / (m as f64).sqrt();
    let w_cols = CMatrix::from_fn(m, q, |r, k| fm[(r, (k / n) % m)] * scale);
    let theta_cols = CMatrix::from_fn(n, q, |r, k| fn_[(r, k % n)]);
    ObservationPlan::from_columns(w_cols, theta_cols)
}

/// Plan with i.i.d. uniform phases at the required moduli.
pub fn random_plan(m: usize, n: usize, q: usize, rng: &mut Stream) -> Result<ObservationPlan> {
    check_q(q)?;
    let wmod = 1.0 / (m as f64).sqrt();
    let mut w_cols = CMatrix::zeros(m, q);
    let mut theta_cols = CMatrix::zeros(n, q);
    for k in 0..q {
        w_cols.set_column(k, &rng::random_phases(rng, m, wmod));
        theta_cols.set_column(k, &rng::random_phases(rng, n, 1.0));
    }
    ObservationPlan::from_columns(w_cols, theta_cols)
}

/// Combiner-only greedy MI design: each pilot draws a random RIS phase
/// vector and optimizes only the combiner against the posterior kernel.
pub fn ice_filling_proxy(
    kernel: &ChannelKernel,
    q: usize,
    sigma2: f64,
    opts: &SolverOptions,
    rng: &mut Stream,
) -> Result<ObservationPlan> {
    check_q(q)?;
    let (m, n) = (kernel.m(), kernel.n());
    let mut state = PosteriorState::from_kernel(kernel);
    let mut plan = ObservationPlan::empty(m, n);
    for _ in 0..q {
        let theta = rng::random_phases(rng, n, 1.0);
        let w0 = rng::random_phases(rng, m, 1.0 / (m as f64).sqrt());
        let problem = design::build_combiner_problem(&state, &theta)?;
        let w: CVector = manifold::solve_cmqp(&problem, &w0, opts)?.v;
        let delta = state.update(&design::observation_vector(&w, &theta), sigma2)?;
        plan.push(&w, &theta, delta);
    }
    Ok(plan)
}

/// Unitary Kronecker DFT dictionary `(F_M ⊗ F_N) / √(MN)`.
pub fn kron_dft_dictionary(m: usize, n: usize) -> CMatrix {
    let d = linalg::kron(&linalg::dft_matrix(m), &linalg::dft_matrix(n));
    d.unscale(((m * n) as f64).sqrt())
}

/// Fills `mi_trace` with the chain-rule increments of `plan` against `sigma`.
pub fn score_plan(plan: &mut ObservationPlan, kernel: &ChannelKernel, sigma2: f64) -> Result<f64> {
    let mut state = PosteriorState::from_kernel(kernel);
    plan.mi_trace = (0..plan.q())
        .map(|k| state.update(&plan.x_cols.column(k).into_owned(), sigma2))
        .collect::<Result<_>>()?;
    Ok(plan.total_mi())
}
