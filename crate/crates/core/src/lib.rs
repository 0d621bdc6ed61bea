//! Slotted-time simulation and analysis of a three-node relay network
//! (BS, relay, user) comparing conventional two-subslot relaying with
//! buffer-aided relaying under Max-Weight scheduling.
//!
//! - [`analytic`]: joint Bernoulli channel states, interruption probabilities,
//!   single-queue delivery times and the buffered relay Markov chain.
//! - [`channel`]: pathloss, Rayleigh/Rician block fading, per-slot rates.
//! - [`traffic`]: deterministic, Poisson and saturated arrivals.
//! - [`engine`]: the per-slot two-hop simulator.
//! - [`metrics`]: delay CDFs, throughput, stability verdicts.
//! - [`config`] and [`experiment`]: experiment files, batch runs and outputs.

pub mod analytic;
pub mod channel;
pub mod config;
pub mod engine;
mod error;
pub mod experiment;
pub mod metrics;
pub mod traffic;

pub use error::{Error, Result};
