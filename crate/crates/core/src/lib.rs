//! Singing-robust speech activity detection toolkit.
//!
//! The crate covers the full chain from raw 16 kHz audio to frame-level
//! speech probabilities and their evaluation:
//!
//! * [`dsp`] turns audio into log-mel features and measures energy,
//!   SNR and BS.1770 loudness.
//! * [`model`] holds the recurrent detector graphs (full-rate and the
//!   temporally resampled low-complexity variant) and their weight format.
//! * [`train`] implements manual reverse-mode gradients, Adam and the
//!   plateau scheduler.
//! * [`datagen`] mixes speech, singing, instrumental and noise sources
//!   into labelled training and test material.
//! * [`metrics`] computes AUC, the singing-rejection AUC and per-song accuracy.
//! * [`complexity`] counts parameters and multiply-accumulates and times
//!   inference.
//! * [`inference`] scores whole files chunk by chunk.

pub mod cli;
pub mod complexity;
pub mod datagen;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod train;

pub use error::{Result, SadError};

/// The only sampling rate the toolkit accepts.
pub const SAMPLE_RATE_HZ: u32 = 16_000;
