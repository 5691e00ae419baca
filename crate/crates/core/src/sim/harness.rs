//! Monte Carlo sweeps.
//!
//! A sweep point is a `(Q, SNR)` pair. For each point and scheme the
//! observation plan is built once (it depends only on the kernel, σ² and
//! the seed) and then evaluated on `trials` channel draws. Trial `t` at a
//! point uses a stream derived from `(seed, Q, SNR, t)` and nothing else,
//! so every scheme sees the same channels and noise (common random numbers)
//! and results do not depend on thread scheduling.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{noise_power, Scheme, SimConfig};
use crate::channel::{observe, ChannelKernel, GaussianSampler};
use crate::design::{self, ObservationPlan};
use crate::error::Result;
use crate::estimators::{self, LsEstimator, MmseEstimator, OmpEstimator};
use crate::linalg::{CMatrix, CVector};
use crate::plans;
use crate::rng;
use crate::training::{self, AdaptiveLoopConfig, LoopMode};

pub const CSV_HEADER: &str = "scheme,snr_db,q,trials,nmse_mean,nmse_db,mi_bits_mean,wall_ms";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scheme: String,
    pub snr_db: f64,
    pub q: usize,
    pub trials: usize,
    pub nmse_mean: f64,
    pub nmse_db: f64,
    pub mi_bits_mean: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainingRow {
    pub frame: usize,
    pub nmse_db: f64,
    pub kernel_error: f64,
}

enum Estimator {
    Ls(LsEstimator),
    Mmse(MmseEstimator),
    Omp(OmpEstimator),
}

impl Estimator {
    fn estimate(&self, y: &CVector) -> CVector {
        match self {
            Estimator::Ls(e) => e.estimate(y),
            Estimator::Mmse(e) => e.estimate(y),
            Estimator::Omp(e) => e.estimate(y).h_hat,
        }
    }
}

/// Per-trial results of one `(scheme, Q, SNR)` evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub q: usize,
    pub per_trial_nmse: Vec<f64>,
    /// `log2 det(I + X^H Σ_h X / σ²)` of the plan under the true kernel.
    pub mi_bits: f64,
    pub wall_ms: u64,
}

impl PointOutcome {
    pub fn nmse_mean(&self) -> f64 {
        // Fixed-order reduction.
        self.per_trial_nmse.iter().sum::<f64>() / self.per_trial_nmse.len() as f64
    }

    pub fn row(&self, record_timing: bool) -> ResultRow {
        let mean = self.nmse_mean();
        ResultRow {
            scheme: self.scheme.to_string(),
            snr_db: self.snr_db,
            q: self.q,
            trials: self.per_trial_nmse.len(),
            nmse_mean: mean,
            nmse_db: 10.0 * mean.log10(),
            mi_bits_mean: self.mi_bits,
            wall_ms: if record_timing { self.wall_ms } else { 0 },
        }
    }
}

/// A resolved configuration: kernel, sampler and dictionary built once.
pub struct Scenario {
    config: SimConfig,
    kernel: ChannelKernel,
    sampler: GaussianSampler,
    dictionary: CMatrix,
}

fn point_labels(q: usize, snr_db: f64) -> [u64; 2] {
    [q as u64, snr_db.to_bits()]
}

impl Scenario {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let kernel = config.build_kernel()?;
        let sampler = GaussianSampler::new(kernel.matrix())?;
        let dictionary = plans::kron_dft_dictionary(config.m, config.n());
        Ok(Self {
            config,
            kernel,
            sampler,
            dictionary,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn kernel(&self) -> &ChannelKernel {
        &self.kernel
    }

    /// Trains a kernel over `frames` frames with the adaptive loop.
    pub fn trained_kernel(&self, q: usize, sigma2: f64) -> Result<ChannelKernel> {
        let cfg = &self.config;
        let [lq, ls] = point_labels(q, -10.0 * sigma2.log10());
        let seed = rng::derive_seed(cfg.seed, &[rng::label("training"), lq, ls]);
        let loop_cfg = AdaptiveLoopConfig {
            frames: cfg.frames,
            q,
            sigma2,
            window_r: cfg.window_r,
            epsilon: cfg.epsilon,
            opts: cfg.solver,
            mode: LoopMode::Trained,
            kernel_switch: None,
        };
        let (_, tracker) = training::run_adaptive(&self.kernel, &loop_cfg, seed)?;
        tracker.regularized_kernel(cfg.epsilon, cfg.m, cfg.n())
    }

    /// Observation plan for `scheme` at a sweep point, with the kernel
    /// its estimator uses (if any).
    pub fn plan(&self, scheme: Scheme, q: usize, snr_db: f64) -> Result<(ObservationPlan, Option<ChannelKernel>)> {
        let cfg = &self.config;
        let sigma2 = noise_power(snr_db);
        let [lq, ls] = point_labels(q, snr_db);
        let mut stream = rng::stream(cfg.seed, &[rng::label("plan"), rng::label(scheme.as_str()), lq, ls]);
        let (m, n) = (cfg.m, cfg.n());
        Ok(match scheme {
            Scheme::Ls => (plans::dft_plan(m, n, q)?, None),
            Scheme::MmseDft => (plans::dft_plan(m, n, q)?, Some(self.kernel.clone())),
            Scheme::Omp => (plans::random_plan(m, n, q, &mut stream)?, None),
            Scheme::IceFilling => (
                plans::ice_filling_proxy(&self.kernel, q, sigma2, &cfg.solver, &mut stream)?,
                Some(self.kernel.clone()),
            ),
            Scheme::ArmoIdeal => (
                design::armo_design(&self.kernel, q, sigma2, &cfg.solver, &mut stream)?,
                Some(self.kernel.clone()),
            ),
            Scheme::ArmoTrained => {
                let trained = self.trained_kernel(q, sigma2)?;
                let plan = design::armo_design(&trained, q, sigma2, &cfg.solver, &mut stream)?;
                (plan, Some(trained))
            }
        })
    }

    fn estimator(&self, scheme: Scheme, plan: &ObservationPlan, kernel: Option<&ChannelKernel>, sigma2: f64) -> Result<Estimator> {
        let q = plan.q();
        Ok(match (scheme, kernel) {
            (Scheme::Ls, _) => Estimator::Ls(LsEstimator::new(&plan.x_cols)),
            (Scheme::Omp, _) => {
                let atoms = self.config.omp.max_atoms.unwrap_or_else(|| estimators::default_omp_atoms(q));
                let tol = self
                    .config
                    .omp
                    .residual_tol
                    .unwrap_or_else(|| estimators::default_omp_residual(q, sigma2));
                Estimator::Omp(OmpEstimator::new(&plan.x_cols, &self.dictionary, atoms, tol)?)
            }
            (_, Some(k)) => Estimator::Mmse(MmseEstimator::new(k, &plan.x_cols, sigma2)?),
            (_, None) => unreachable!("kernel-based scheme without kernel"),
        })
    }

    /// Evaluates one scheme at one sweep point.
    pub fn evaluate(&self, scheme: Scheme, q: usize, snr_db: f64) -> Result<PointOutcome> {
        let start = Instant::now();
        let sigma2 = noise_power(snr_db);
        let (plan, kernel) = self.plan(scheme, q, snr_db)?;
        let estimator = self.estimator(scheme, &plan, kernel.as_ref(), sigma2)?;
        let mi_bits = design::batch_mi(self.kernel.matrix(), &plan.x_cols, sigma2)?;
        let [lq, ls] = point_labels(q, snr_db);
        let per_trial_nmse = (0..self.config.trials)
            .into_par_iter()
            .map(|t| {
                let mut s = rng::stream(self.config.seed, &[rng::label("trial"), lq, ls, t as u64]);
                let h = self.sampler.sample(&mut s);
                let y = observe(&h, &plan.x_cols, sigma2, &mut s)?;
                estimators::nmse(&h, &estimator.estimate(&y))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(PointOutcome {
            scheme,
            snr_db,
            q,
            per_trial_nmse,
            mi_bits,
            wall_ms: start.elapsed().as_millis() as u64,
        })
    }

    /// Evaluates every `(scheme, Q, SNR)` combination of the config.
    pub fn evaluate_grid(&self) -> Result<Vec<PointOutcome>> {
        let mut tasks = Vec::new();
        for &scheme in &self.config.schemes {
            for q in self.config.q_values() {
                for snr in self.config.snr_values() {
                    tasks.push((scheme, q, snr));
                }
            }
        }
        tasks
            .into_par_iter()
            .map(|(scheme, q, snr)| self.evaluate(scheme, q, snr))
            .collect()
    }
}

fn sorted_rows(mut outcomes: Vec<PointOutcome>, by_snr_first: bool, record_timing: bool) -> Vec<ResultRow> {
    outcomes.sort_by(|a, b| {
        let primary = if by_snr_first {
            a.snr_db.total_cmp(&b.snr_db).then(a.q.cmp(&b.q))
        } else {
            a.q.cmp(&b.q).then(a.snr_db.total_cmp(&b.snr_db))
        };
        a.scheme.cmp(&b.scheme).then(primary)
    });
    outcomes.iter().map(|o| o.row(record_timing)).collect()
}

/// NMSE versus SNR; rows sorted by `(scheme, snr, q)`.
pub fn run_sweep_snr(config: &SimConfig) -> Result<Vec<ResultRow>> {
    let scenario = Scenario::new(config.clone())?;
    Ok(sorted_rows(scenario.evaluate_grid()?, true, config.record_timing))
}

/// NMSE versus pilot length; rows sorted by `(scheme, q, snr)`.
pub fn run_sweep_q(config: &SimConfig) -> Result<Vec<ResultRow>> {
    let scenario = Scenario::new(config.clone())?;
    Ok(sorted_rows(scenario.evaluate_grid()?, false, config.record_timing))
}

/// Per-frame trace of the adaptive loop at the first configured `(Q, SNR)`.
pub fn run_kernel_training(config: &SimConfig) -> Result<Vec<TrainingRow>> {
    let scenario = Scenario::new(config.clone())?;
    let q = config.q_values()[0];
    let snr = config.snr_values()[0];
    let loop_cfg = AdaptiveLoopConfig {
        frames: config.frames,
        q,
        sigma2: noise_power(snr),
        window_r: config.window_r,
        epsilon: config.epsilon,
        opts: config.solver,
        mode: LoopMode::Trained,
        kernel_switch: None,
    };
    let records = training::adaptive_loop(scenario.kernel(), &loop_cfg, config.seed)?;
    Ok(records
        .iter()
        .map(|r| TrainingRow {
            frame: r.frame,
            nmse_db: 10.0 * r.nmse.log10(),
            kernel_error: r.kernel_error,
        })
        .collect())
}

pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV bytes for a result table; the header is always written.
pub fn result_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Ok(format!("{CSV_HEADER}\n").into_bytes());
    }
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(buf)
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(buf)
}

pub fn training_csv(rows: &[TrainingRow]) -> Result<Vec<u8>> {
    csv_bytes(rows)
}
