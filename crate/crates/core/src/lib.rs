//! Simulation and receiver DSP for a dual-polarization, pilot-assisted
//! continuous-variable QKD link with a local local oscillator.
//!
//! The chain is `txgen` → `channel` → `frontend` → `dsp` (or `baselines`)
//! → `metrics`, orchestrated by `experiment`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod frontend;
pub mod jones;
pub mod memory;
pub mod metrics;
pub mod rng;
pub mod series;
pub mod txgen;
pub mod waveform;

pub use error::{Error, Result};
