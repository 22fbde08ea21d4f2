//! Random-time drift criteria checked exactly on finite Markov chains, and
//! stochastic stabilization of a noisy scalar plant over an erasure channel
//! with an adaptive zoom quantizer.
//!
//! The crate is organised bottom-up:
//!
//! * [`plant`], [`quantizer`], [`channel`] are the building blocks of one
//!   control loop;
//! * [`closed_loop`] couples them into the Markov chain `(x_t, Δ_t)`;
//! * [`analysis`] checks the stability conditions, evaluates the analytic
//!   stopping-time bounds and runs Monte-Carlo estimators;
//! * [`drift_lab`] verifies drift conditions, Kac's formula and hitting-cost
//!   solutions exactly on finite chains;
//! * [`cli`] wires everything into config-driven experiments that emit CSV.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod closed_loop;
pub mod drift_lab;
pub mod error;
pub mod plant;
pub mod quantizer;
pub mod stats;

pub use error::{Error, Result};
