//! Interacting parallel Markov chain Monte Carlo.
//!
//! `N` chains target the same density and, at every sub-iteration, each
//! chain proposes a candidate for the chain being updated; a
//! Metropolis-Hastings style multinomial selection keeps the product of `N`
//! copies of the target invariant. The crate provides
//!
//! * the whole-vector sweep ([`imh::sweep`]) and its component-wise
//!   counterpart ([`imwg::imwg_sweep`]), plus plain and independent
//!   Metropolis-within-Gibbs baselines;
//! * targets ([`targets`]) and proposal kernels ([`proposals`]);
//! * a linear-Gaussian state-space model with exact conditionals
//!   ([`lgssm`]);
//! * KDE-based convergence indicators ([`diagnostics`]);
//! * an exact transition-matrix oracle on small discrete spaces
//!   ([`oracle`]) that checks invariance of the product target;
//! * keyed random substreams ([`stream`]) making every run reproducible,
//!   with or without the parallel candidate phase.

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod imh;
pub mod imwg;
pub mod lgssm;
pub mod oracle;
pub mod proposals;
pub mod stream;
pub mod targets;

pub use ensemble::ChainEnsemble;
pub use error::{Error, Result};
pub use imh::{acceptance_alpha, sweep, SelectionProbabilities, SweepOptions, SweepRecord};
pub use imwg::{imwg_sweep, plain_mwg_sweep, ComponentContext, IndependentMwg, ScalarProposalKernel};
pub use proposals::{Centering, DistanceAdaptiveGaussian, InteractionContext, ProposalKernel};
pub use stream::{RngStreamKey, Streams};
pub use targets::{ConditionalTarget, GaussianMixture, JointConditional, TargetDensity};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
