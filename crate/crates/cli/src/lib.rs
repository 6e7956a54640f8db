//! Experiment driver for the interacting MCMC samplers: configuration,
//! seeding, timing and CSV output for the `multimodal`, `hmm` and
//! `oracle-check` experiments.

pub mod clock;
pub mod config;
pub mod hmm;
pub mod multimodal;
pub mod oracle_check;
pub mod output;

pub use config::{ConfigError, Experiment, RawConfig, RunConfig};
