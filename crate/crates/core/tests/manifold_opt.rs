mod common;

use proptest::prelude::*;
use ris_obsmat::linalg;
use ris_obsmat::manifold::{self, CmqpProblem, SolverOptions};
use ris_obsmat::rng;
use ris_obsmat::sim::validation::grid_optimum;
use ris_obsmat::{CVector, C64};

#[test]
fn power_iteration_matches_dense_eigensolver() {
    let mut r = rng::stream(21, &[]);
    let opts = SolverOptions::default();
    for i in 0..100 {
        let k = 1 + i % 16;
        let u = common::random_psd(&mut r, k);
        let dense = linalg::hermitian_eigen(&u).0.max();
        let power = manifold::largest_eigenvalue(&u, &opts);
        assert!((power - dense).abs() <= 1e-6 * dense, "k={k}: {power} vs {dense}");
    }
}

#[test]
fn euclidean_gradient_matches_finite_differences() {
    let mut r = rng::stream(22, &[]);
    for k in 1..8 {
        let p = CmqpProblem::new(common::random_psd(&mut r, k), 1.0).unwrap();
        let v = rng::random_phases(&mut r, k, 1.0);
        let grad = manifold::euclidean_gradient(&p, 0.0, &v).unwrap();
        let delta = rng::complex_normal(&mut r, k);
        let h = 1e-6;
        let f = |z: &CVector| common::quad(p.u(), z);
        let fd = (f(&(&v + delta.scale(h))) - f(&(&v - delta.scale(h)))) / (2.0 * h);
        let analytic = 2.0 * grad.dotc(&delta).re;
        assert!((fd - analytic).abs() < 1e-5 * analytic.abs().max(1.0), "{fd} vs {analytic}");
    }
}

#[test]
fn multistart_reaches_the_phase_grid_optimum() {
    let mut r = rng::stream(23, &[]);
    let opts = SolverOptions::default();
    for i in 0..60 {
        let k = 2 + i % 3;
        let p = CmqpProblem::new(common::random_psd(&mut r, k), 1.0).unwrap();
        let mut starts = vec![manifold::spectral_start(p.u(), 1.0)];
        starts.extend((0..4).map(|_| rng::random_phases(&mut r, k, 1.0)));
        let res = manifold::solve_cmqp_multistart(&p, &starts, &opts).unwrap();
        let best = grid_optimum(&p, 64);
        assert!(p.value(&res.v) >= 0.99 * best, "instance {i}: {} < 0.99 * {best}", p.value(&res.v));
    }
}

#[test]
fn single_start_ascent_is_local() {
    // A random start stops below the grid optimum on a small share of
    // K <= 4 instances; the ascent never ends below its start.
    let mut r = rng::stream(24, &[]);
    let opts = SolverOptions::default();
    let mut short = 0;
    let total = 300;
    for i in 0..total {
        let k = 2 + i % 3;
        let p = CmqpProblem::new(common::random_psd(&mut r, k), 1.0).unwrap();
        let v0 = rng::random_phases(&mut r, k, 1.0);
        let res = manifold::solve_cmqp(&p, &v0, &opts).unwrap();
        assert!(p.value(&res.v) >= p.value(&v0) - 1e-12);
        if p.value(&res.v) < 0.99 * grid_optimum(&p, 64) {
            short += 1;
        }
    }
    assert!(short * 20 < total, "{short} of {total} below 99%");
}

fn instance() -> impl Strategy<Value = (usize, u64, f64)> {
    (1usize..=16, any::<u64>(), 0.1f64..3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn objective_trace_is_nondecreasing((k, seed, rho) in instance()) {
        let mut r = rng::stream(seed, &[]);
        let p = CmqpProblem::new(common::random_psd(&mut r, k), rho).unwrap();
        let v0 = rng::random_phases(&mut r, k, rho);
        let res = manifold::solve_cmqp(&p, &v0, &SolverOptions::default()).unwrap();
        for w in res.f_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
        }
        for z in res.v.iter() {
            prop_assert!((z.norm() - rho).abs() <= 1e-12 * rho);
        }
        let last = *res.f_trace.last().unwrap();
        prop_assert_eq!(last, res.f_final);
    }

    #[test]
    fn riemannian_gradient_is_tangent((k, seed, rho) in instance()) {
        let mut r = rng::stream(seed, &[]);
        let v = rng::random_phases(&mut r, k, rho);
        let egrad = rng::complex_normal(&mut r, k);
        let d = manifold::riemannian_gradient(&v, &egrad, rho).unwrap();
        for i in 0..k {
            prop_assert!((v[i].conj() * d[i]).re.abs() <= 1e-12 * egrad.norm().max(1.0) * rho);
        }
    }

    #[test]
    fn shift_adds_a_constant_on_the_torus((k, seed, rho) in instance(), alpha in 0.0f64..10.0) {
        let mut r = rng::stream(seed, &[]);
        let p = CmqpProblem::new(common::random_psd(&mut r, k), rho).unwrap();
        let v = rng::random_phases(&mut r, k, rho);
        let offset = p.shifted_value(alpha, &v) - p.value(&v);
        let want = alpha * k as f64 * rho * rho;
        prop_assert!((offset - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn objective_ignores_global_phase((k, seed, rho) in instance(), phi in 0.0f64..6.3) {
        let mut r = rng::stream(seed, &[]);
        let p = CmqpProblem::new(common::random_psd(&mut r, k), rho).unwrap();
        let v = rng::random_phases(&mut r, k, rho);
        let rotated = v.map(|z| z * C64::from_polar(1.0, phi));
        let (a, b) = (p.value(&v), p.value(&rotated));
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn retraction_lands_on_the_torus((k, seed, rho) in instance(), beta in 0.0f64..5.0) {
        let mut r = rng::stream(seed, &[]);
        let v = rng::random_phases(&mut r, k, rho);
        let d = rng::complex_normal(&mut r, k);
        let out = manifold::retract(&v, &d, beta, rho);
        for z in out.iter() {
            prop_assert!((z.norm() - rho).abs() <= 1e-12 * rho);
        }
    }

    #[test]
    fn step_parameters_satisfy_monotonicity_bounds(lambda in 0.0f64..100.0, k in 1usize..64) {
        let (alpha, beta) = manifold::step_parameters(lambda, k).unwrap();
        if lambda == 0.0 {
            prop_assert_eq!((alpha, beta), (0.0, 1.0));
        } else {
            prop_assert!(alpha >= k as f64 * lambda / 8.0);
            prop_assert!(beta > 0.0 && beta < 1.0 / (lambda + alpha));
        }
    }
}
