//! Adaptive kernel acquisition across frames.
//!
//! The sample kernel starts at the identity. Each frame designs pilots with
//! the current kernel, estimates the channel by MMSE with that same kernel,
//! and folds the estimate into a running (then sliding-window) sample
//! covariance.
//!
//! The stored sample kernel follows the update law exactly, which makes it
//! rank one after the first frame. Design and estimation therefore use a
//! diagonally loaded copy ([`KernelTracker::regularized_kernel`]); without
//! it the estimates never leave the first estimate's column space. Too
//! little loading has a milder version of the same failure: pilots designed
//! on the sample kernel skip its weak directions, the MMSE estimates shrink
//! there, and the sample kernel confirms the shrinkage.

use std::collections::VecDeque;

use crate::channel::{ChannelKernel, GaussianSampler};
use crate::design;
use crate::error::{Error, Result};
use crate::estimators::{self, MmseEstimator};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::manifold::SolverOptions;
use crate::rng::{self, Stream};

/// Absolute diagonal floor added by [`KernelTracker::regularized_kernel`].
pub const LOADING_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelTracker {
    r: usize,
    window_r: usize,
    buffer: VecDeque<CVector>,
    sigma_hat: CMatrix,
}

impl KernelTracker {
    /// Fresh tracker with `Σ̂ = I_mn`.
    pub fn new(mn: usize, window_r: usize) -> Result<Self> {
        if window_r == 0 {
            return Err(Error::InvalidParameter("window length must be >= 1".into()));
        }
        Ok(Self {
            r: 0,
            window_r,
            buffer: VecDeque::with_capacity(window_r),
            sigma_hat: CMatrix::identity(mn, mn),
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn window(&self) -> usize {
        self.window_r
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn sigma_hat(&self) -> &CMatrix {
        &self.sigma_hat
    }

    /// Running mean while `r <= R`, mean of the last `R` outer products after.
    pub fn push(&mut self, h_hat: &CVector) -> Result<()> {
        let mn = self.sigma_hat.nrows();
        if h_hat.len() != mn {
            return Err(Error::dim("KernelTracker::push", mn, h_hat.len()));
        }
        self.r += 1;
        if self.buffer.len() == self.window_r {
            self.buffer.pop_front();
        }
        self.buffer.push_back(h_hat.clone());
        if self.r <= self.window_r {
            let r = self.r as f64;
            self.sigma_hat.scale_mut((r - 1.0) / r);
            self.sigma_hat
                .gerc(C64::new(1.0 / r, 0.0), h_hat, h_hat, C64::new(1.0, 0.0));
        } else {
            self.sigma_hat = self.window_mean();
        }
        self.sigma_hat = linalg::hermitianize(&self.sigma_hat);
        Ok(())
    }

    /// Mean of the buffered outer products, recomputed from scratch.
    pub fn window_mean(&self) -> CMatrix {
        let mn = self.sigma_hat.nrows();
        let mut acc = CMatrix::zeros(mn, mn);
        for h in &self.buffer {
            acc.gerc(C64::new(1.0, 0.0), h, h, C64::new(1.0, 0.0));
        }
        if self.buffer.is_empty() {
            acc
        } else {
            acc.unscale(self.buffer.len() as f64)
        }
    }

    /// `Σ̂ + (ε tr(Σ̂)/MN + floor) I`.
    pub fn regularized_kernel(&self, epsilon: f64, m: usize, n: usize) -> Result<ChannelKernel> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let mn = self.sigma_hat.nrows();
        let load = epsilon * linalg::trace_re(&self.sigma_hat) / mn as f64 + LOADING_FLOOR;
        let mut k = self.sigma_hat.clone();
        for i in 0..mn {
            k[(i, i)] += C64::new(load, 0.0);
        }
        ChannelKernel::new(k, m, n)
    }
}

/// Which kernel drives design/estimation and what gets pushed to the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopMode {
    /// Loaded sample kernel for design and estimation; estimates are pushed.
    Trained,
    /// True kernel for design and estimation; estimates are still pushed.
    Ideal,
    /// Like `Trained`, but the true channel is pushed instead of the estimate.
    OracleFeed,
}

#[derive(Debug, Clone)]
pub struct AdaptiveLoopConfig {
    pub frames: usize,
    pub q: usize,
    pub sigma2: f64,
    pub window_r: usize,
    pub epsilon: f64,
    pub opts: SolverOptions,
    pub mode: LoopMode,
    /// Optional `(frame, kernel)`: from that frame on channels are drawn
    /// from `kernel` instead of the initial true kernel.
    pub kernel_switch: Option<(usize, ChannelKernel)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub nmse: f64,
    /// `||Σ̂ - Σ_h||_F / ||Σ_h||_F` after the frame's update.
    pub kernel_error: f64,
}

/// Per-frame random streams: channel draw, noise, pilot design.
pub struct FrameStreams {
    pub channel: Stream,
    pub noise: Stream,
    pub design: Stream,
}

pub fn frame_streams(seed: u64, frame: usize) -> FrameStreams {
    let base = [rng::label("frame"), frame as u64];
    let sub = |k: u64| rng::stream(seed, &[base[0], base[1], k]);
    FrameStreams {
        channel: sub(0),
        noise: sub(1),
        design: sub(2),
    }
}

/// Runs the frame loop. Channel and noise streams depend only on
/// `(seed, frame)`, so runs that differ only in `mode` see identical draws.
pub fn adaptive_loop(true_kernel: &ChannelKernel, cfg: &AdaptiveLoopConfig, seed: u64) -> Result<Vec<FrameRecord>> {
    run_adaptive(true_kernel, cfg, seed).map(|(records, _)| records)
}

/// [`adaptive_loop`] that also hands back the final tracker.
pub fn run_adaptive(
    true_kernel: &ChannelKernel,
    cfg: &AdaptiveLoopConfig,
    seed: u64,
) -> Result<(Vec<FrameRecord>, KernelTracker)> {
    if cfg.frames == 0 {
        return Err(Error::InvalidParameter("frames must be >= 1".into()));
    }
    let (m, n) = (true_kernel.m(), true_kernel.n());
    let mut tracker = KernelTracker::new(m * n, cfg.window_r)?;
    let mut current = true_kernel.clone();
    let mut sampler = GaussianSampler::new(current.matrix())?;
    let mut records = Vec::with_capacity(cfg.frames);
    for frame in 1..=cfg.frames {
        if let Some((at, k)) = &cfg.kernel_switch {
            if frame == *at {
                current = k.clone();
                sampler = GaussianSampler::new(current.matrix())?;
            }
        }
        let mut streams = frame_streams(seed, frame);
        let design_kernel = match cfg.mode {
            LoopMode::Ideal => current.clone(),
            LoopMode::Trained | LoopMode::OracleFeed => tracker.regularized_kernel(cfg.epsilon, m, n)?,
        };
        let plan = design::armo_design(&design_kernel, cfg.q, cfg.sigma2, &cfg.opts, &mut streams.design)?;
        let h = sampler.sample(&mut streams.channel);
        let y = crate::channel::observe(&h, &plan.x_cols, cfg.sigma2, &mut streams.noise)?;
        let h_hat = MmseEstimator::new(&design_kernel, &plan.x_cols, cfg.sigma2)?.estimate(&y);
        let nmse = estimators::nmse(&h, &h_hat)?;
        match cfg.mode {
            LoopMode::OracleFeed => tracker.push(&h)?,
            _ => tracker.push(&h_hat)?,
        }
        records.push(FrameRecord {
            frame,
            nmse,
            kernel_error: linalg::rel_frobenius(tracker.sigma_hat(), current.matrix()),
        });
    }
    Ok((records, tracker))
}
