//! Greedy pilot-by-pilot observation-matrix design.
//!
//! Each pilot `x = w ⊗ conj(θ)` is chosen to maximize the mutual-information
//! increment `log2(1 + x^H Σ_t x / σ²)` against the current posterior kernel
//! `Σ_t`, alternating between the BS combiner `w` (modulus `1/√M`) and the
//! RIS phase vector `θ` (unit modulus). Each half-step is a modulus-constant
//! quadratic program handed to [`crate::manifold::solve_cmqp`]. After a pilot
//! is fixed the kernel is deflated by the rank-one posterior update.

use crate::channel::ChannelKernel;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::manifold::{self, CmqpProblem, SolverOptions};
use crate::rng::{self, Stream};

/// Modulus tolerance for plan columns.
pub const PLAN_MODULUS_TOL: f64 = 1e-12;

/// Posterior kernel after `t` pilots plus the mutual information gathered so far.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    sigma_t: CMatrix,
    m: usize,
    n: usize,
    t: usize,
    mi_bits: f64,
}

impl PosteriorState {
    pub fn from_kernel(kernel: &ChannelKernel) -> Self {
        Self {
            sigma_t: kernel.matrix().clone(),
            m: kernel.m(),
            n: kernel.n(),
            t: 0,
            mi_bits: 0.0,
        }
    }

    /// Wraps an arbitrary Hermitian PSD matrix as a prior (`t = 0`).
    pub fn from_matrix(sigma: CMatrix, m: usize, n: usize) -> Result<Self> {
        let kernel = ChannelKernel::new(sigma, m, n)?;
        Ok(Self::from_kernel(&kernel))
    }

    pub fn sigma(&self) -> &CMatrix {
        &self.sigma_t
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn mi_bits(&self) -> f64 {
        self.mi_bits
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.sigma_t)
    }

    fn check_x(&self, x: &CVector) -> Result<()> {
        if x.len() != self.m * self.n {
            return Err(Error::dim("observation vector", self.m * self.n, x.len()));
        }
        Ok(())
    }

    /// In-place rank-one update `Σ ← Σ - Σx x^HΣ / (x^HΣx + σ²)`.
    pub fn update(&mut self, x: &CVector, sigma2: f64) -> Result<f64> {
        check_noise(sigma2)?;
        self.check_x(x)?;
        let s = &self.sigma_t * x;
        let quad = x.dotc(&s).re.max(0.0);
        let delta = (1.0 + quad / sigma2).log2();
        let denom = quad + sigma2;
        self.sigma_t.gerc(C64::new(-1.0 / denom, 0.0), &s, &s, C64::new(1.0, 0.0));
        self.sigma_t = linalg::hermitianize(&self.sigma_t);
        self.t += 1;
        self.mi_bits += delta;
        Ok(delta)
    }
}

fn check_noise(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise power must be positive and finite, got {sigma2}"
        )));
    }
    Ok(())
}

/// `x = w ⊗ conj(θ)`.
pub fn observation_vector(w: &CVector, theta: &CVector) -> CVector {
    linalg::kron_vec(w, &theta.conjugate())
}

/// Per-pilot combiners, phase vectors and the assembled observation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPlan {
    pub w_cols: CMatrix,
    pub theta_cols: CMatrix,
    pub x_cols: CMatrix,
    /// MI increment of each pilot in bits, against the kernel it was designed for.
    pub mi_trace: Vec<f64>,
}

impl ObservationPlan {
    pub fn empty(m: usize, n: usize) -> Self {
        Self {
            w_cols: CMatrix::zeros(m, 0),
            theta_cols: CMatrix::zeros(n, 0),
            x_cols: CMatrix::zeros(m * n, 0),
            mi_trace: Vec::new(),
        }
    }

    /// Builds a plan from paired columns; `mi_trace` is left empty.
    pub fn from_columns(w_cols: CMatrix, theta_cols: CMatrix) -> Result<Self> {
        if w_cols.ncols() != theta_cols.ncols() {
            return Err(Error::dim("plan columns", w_cols.ncols(), theta_cols.ncols()));
        }
        let (m, n, q) = (w_cols.nrows(), theta_cols.nrows(), w_cols.ncols());
        let mut x_cols = CMatrix::zeros(m * n, q);
        for k in 0..q {
            let x = observation_vector(&w_cols.column(k).into_owned(), &theta_cols.column(k).into_owned());
            x_cols.set_column(k, &x);
        }
        Ok(Self {
            w_cols,
            theta_cols,
            x_cols,
            mi_trace: Vec::new(),
        })
    }

    pub fn m(&self) -> usize {
        self.w_cols.nrows()
    }

    pub fn n(&self) -> usize {
        self.theta_cols.nrows()
    }

    pub fn q(&self) -> usize {
        self.x_cols.ncols()
    }

    pub fn total_mi(&self) -> f64 {
        self.mi_trace.iter().sum()
    }

    pub fn push(&mut self, w: &CVector, theta: &CVector, delta_bits: f64) {
        let x = observation_vector(w, theta);
        let q = self.q();
        for (mat, col) in [
            (&mut self.w_cols, w),
            (&mut self.theta_cols, theta),
            (&mut self.x_cols, &x),
        ] {
            mat.resize_horizontally_mut(q + 1, C64::default());
            mat.set_column(q, col);
        }
        self.mi_trace.push(delta_bits);
    }

    /// Checks the modulus constraints and the Kronecker structure of every column.
    pub fn check_invariants(&self) -> Result<()> {
        let m = self.m();
        let wmod = 1.0 / (m as f64).sqrt();
        for (k, z) in self.w_cols.iter().enumerate() {
            if (z.norm() - wmod).abs() > PLAN_MODULUS_TOL {
                return Err(Error::Infeasible(format!("combiner entry {k} has modulus {}", z.norm())));
            }
        }
        for (k, z) in self.theta_cols.iter().enumerate() {
            if (z.norm() - 1.0).abs() > PLAN_MODULUS_TOL {
                return Err(Error::Infeasible(format!("phase entry {k} has modulus {}", z.norm())));
            }
        }
        for k in 0..self.q() {
            let x = observation_vector(
                &self.w_cols.column(k).into_owned(),
                &self.theta_cols.column(k).into_owned(),
            );
            if x != self.x_cols.column(k) {
                return Err(Error::Infeasible(format!("column {k} is not w ⊗ conj(θ)")));
            }
        }
        Ok(())
    }
}

/// `log2 det(I_Q + X^H Σ X / σ²)`.
pub fn batch_mi(sigma: &CMatrix, x_mat: &CMatrix, sigma2: f64) -> Result<f64> {
    check_noise(sigma2)?;
    if x_mat.nrows() != sigma.nrows() {
        return Err(Error::dim("batch_mi: X rows", sigma.nrows(), x_mat.nrows()));
    }
    let q = x_mat.ncols();
    if q == 0 {
        return Ok(0.0);
    }
    let gram = x_mat.ad_mul(&(sigma * x_mat)).unscale(sigma2) + CMatrix::identity(q, q);
    Ok(linalg::log2det_hpd(&gram)?.max(0.0))
}

/// `log2(1 + x^H Σ_t x / σ²)`.
pub fn mi_increment(state: &PosteriorState, x: &CVector, sigma2: f64) -> Result<f64> {
    check_noise(sigma2)?;
    state.check_x(x)?;
    let quad = linalg::quad_form(&state.sigma_t, x).max(0.0);
    Ok((1.0 + quad / sigma2).log2())
}

/// Returns the state after observing pilot `x`.
pub fn posterior_update(state: &PosteriorState, x: &CVector, sigma2: f64) -> Result<PosteriorState> {
    let mut next = state.clone();
    next.update(x, sigma2)?;
    Ok(next)
}

/// Combiner subproblem for fixed `θ`: `U[m, m'] = θ^T Σ_{t,m,m'} conj(θ)`,
/// `ρ = 1/√M`.
pub fn build_combiner_problem(state: &PosteriorState, theta: &CVector) -> Result<CmqpProblem> {
    let (m, n) = (state.m, state.n);
    if theta.len() != n {
        return Err(Error::dim("build_combiner_problem: theta", n, theta.len()));
    }
    let theta_conj = theta.conjugate();
    let mut u = CMatrix::zeros(m, m);
    for mp in 0..m {
        // Σ[:, block m'] conj(θ), then contract each row block with θ^T.
        let z = state.sigma_t.columns(mp * n, n) * &theta_conj;
        for mm in 0..m {
            u[(mm, mp)] = z.rows(mm * n, n).dot(theta);
        }
    }
    let u = linalg::hermitianize(&u);
    CmqpProblem::new(u, 1.0 / (m as f64).sqrt())
}

/// Phase subproblem for fixed `w`:
/// `U = Σ_{m,m'} w_m conj(w_{m'}) conj(Σ_{t,m,m'})`, `ρ = 1`.
pub fn build_phase_problem(state: &PosteriorState, w: &CVector) -> Result<CmqpProblem> {
    let (m, n) = (state.m, state.n);
    if w.len() != m {
        return Err(Error::dim("build_phase_problem: w", m, w.len()));
    }
    let mut u = CMatrix::zeros(n, n);
    for mm in 0..m {
        for mp in 0..m {
            let coef = w[mm] * w[mp].conj();
            let block = state.sigma_t.view((mm * n, mp * n), (n, n));
            u.zip_apply(&block, |acc, s| *acc += coef * s.conj());
        }
    }
    let u = linalg::hermitianize(&u);
    CmqpProblem::new(u, 1.0)
}

/// Outcome of one greedy step.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotDesign {
    pub w: CVector,
    pub theta: CVector,
    pub delta_i: f64,
    /// MI increment at the random start followed by one entry per alternation.
    pub delta_trace: Vec<f64>,
}

/// Alternating optimization of `(w, θ)` from the given feasible start.
pub fn refine_pilot(
    state: &PosteriorState,
    sigma2: f64,
    opts: &SolverOptions,
    mut w: CVector,
    mut theta: CVector,
) -> Result<PilotDesign> {
    check_noise(sigma2)?;
    opts.validate()?;
    let mut delta = mi_increment(state, &observation_vector(&w, &theta), sigma2)?;
    let mut delta_trace = vec![delta];
    for _ in 0..opts.outer_max_iter {
        let combiner = build_combiner_problem(state, &theta)?;
        w = manifold::solve_cmqp(&combiner, &w, opts)?.v;
        let phase = build_phase_problem(state, &w)?;
        theta = manifold::solve_cmqp(&phase, &theta, opts)?.v;
        let next = mi_increment(state, &observation_vector(&w, &theta), sigma2)?;
        delta_trace.push(next);
        let change = (next - delta).abs();
        delta = next;
        if change <= opts.outer_tol * delta.abs() {
            break;
        }
    }
    Ok(PilotDesign {
        w,
        theta,
        delta_i: delta,
        delta_trace,
    })
}

/// Feasible `(w, θ)` whose observation vector is closest in direction to
/// the dominant eigenvector `u` of `Σ_t`: the best rank-one fit
/// `a b^H` of `u` reshaped to `M x N` gives `w ∝ e^{j∠a}`, `θ = e^{j∠b}`.
pub fn kronecker_start(state: &PosteriorState) -> (CVector, CVector) {
    let (m, n) = (state.m, state.n);
    let (_, vecs) = linalg::hermitian_eigen(&state.sigma_t);
    let top = vecs.column(m * n - 1);
    let reshaped = CMatrix::from_fn(m, n, |a, b| top[a * n + b]);
    let svd = reshaped.svd(true, true);
    let first = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let left = svd.u.expect("requested").column(first).into_owned();
    let right_h = svd.v_t.expect("requested").row(first).into_owned();
    let wmod = 1.0 / (m as f64).sqrt();
    let w = CVector::from_fn(m, |i, _| C64::from_polar(wmod, left[i].arg()));
    // Row `first` of V^H is b^H, so θ_n carries the phase of conj(b^H)_n.
    let theta = CVector::from_fn(n, |i, _| C64::from_polar(1.0, -right_h[i].arg()));
    (w, theta)
}

/// Draws a random feasible `(w, θ)` and refines it by alternation. With
/// `opts.spectral_start` the alternation is also run from
/// [`kronecker_start`] and the larger increment wins.
pub fn design_next_pilot(
    state: &PosteriorState,
    sigma2: f64,
    opts: &SolverOptions,
    rng: &mut Stream,
) -> Result<PilotDesign> {
    let w = rng::random_phases(rng, state.m, 1.0 / (state.m as f64).sqrt());
    let theta = rng::random_phases(rng, state.n, 1.0);
    let random = refine_pilot(state, sigma2, opts, w, theta)?;
    if !opts.spectral_start {
        return Ok(random);
    }
    let (w, theta) = kronecker_start(state);
    let spectral = refine_pilot(state, sigma2, opts, w, theta)?;
    Ok(if spectral.delta_i > random.delta_i { spectral } else { random })
}

/// Greedy ARMO design of `q` pilots against `kernel`.
pub fn armo_design(
    kernel: &ChannelKernel,
    q: usize,
    sigma2: f64,
    opts: &SolverOptions,
    rng: &mut Stream,
) -> Result<ObservationPlan> {
    check_noise(sigma2)?;
    let mut state = PosteriorState::from_kernel(kernel);
    let mut plan = ObservationPlan::empty(kernel.m(), kernel.n());
    for _ in 0..q {
        let pilot = design_next_pilot(&state, sigma2, opts, rng)?;
        let x = observation_vector(&pilot.w, &pilot.theta);
        let delta = state.update(&x, sigma2)?;
        plan.push(&pilot.w, &pilot.theta, delta);
    }
    Ok(plan)
}
