//! Bayesian observation-matrix design for RIS-aided channel estimation.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: correlated synthetic channels, the cascaded-channel kernel
//!   and pilot reception;
//! - [`manifold`]: Riemannian gradient ascent for modulus-constant quadratic
//!   programs on the complex torus;
//! - [`design`]: greedy mutual-information pilot design (ARMO) with rank-one
//!   posterior updates;
//! - [`plans`] and [`estimators`]: baseline observation plans and the LS,
//!   MMSE and OMP estimators;
//! - [`training`]: sliding-window kernel acquisition across frames;
//! - [`sim`]: the configuration-driven Monte Carlo harness behind the
//!   `ris-obsmat` binary.

pub mod channel;
pub mod design;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod manifold;
pub mod plans;
pub mod rng;
pub mod sim;
pub mod training;

pub use channel::{ArrayGeometry, ChannelKernel, ChannelModel, ChannelRealization, CorrelationModel};
pub use design::{ObservationPlan, PosteriorState};
pub use error::{Error, Result};
pub use estimators::EstimationResult;
pub use linalg::{CMatrix, CVector, C64};
pub use manifold::{CmqpProblem, SolverOptions, SolverResult};
pub use training::KernelTracker;
