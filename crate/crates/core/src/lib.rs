//! Simulation and analysis of 4QAM (QPSK) Costas carrier-recovery loops:
//! the classical, fourth-power and folding variants.
//!
//! - [`pd_char`]: phase-detector characteristics and their reference shapes.
//! - [`loop_model`]: phase-domain ODE model with a PI loop filter, RK4
//!   integration and cycle-slip detection.
//! - [`lockin`]: closed-form and simulation-based lock-in range estimates.
//! - [`signal_sim`]: waveform-level loops, demodulator and SER Monte Carlo.
//! - [`cli`]: experiment orchestration behind the `costas-lab` binary.

pub mod cli;
pub mod error;
pub mod lockin;
pub mod loop_model;
pub mod pd_char;
pub mod signal_sim;

pub use error::{Error, Result};
pub use pd_char::PdKind;
