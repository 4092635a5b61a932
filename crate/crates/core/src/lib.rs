//! `fasbeam`: low-latency time-domain filter-and-sum beamforming.
//!
//! The crate provides
//!
//! - [`neural`]: the two-stage filter-and-sum network (reference-channel filters from
//!   NCC features, then shared filters for every remaining microphone), with exact
//!   reverse-mode gradients and a small trainer;
//! - [`oraclebf`]: classical oracle beamformers (time-domain MVDR/MWF,
//!   frequency-domain MVDR/SDW-MWF, mask-based MVDR/GEV);
//! - [`scenesim`]: a shoebox image-method scene simulator with circular arrays;
//! - [`objectives`]: SI-SNR, uPIT, shift-invariant scoring and mel SI-MSE;
//! - [`analysis`]: beampatterns and metric reports;
//! - [`cli`]: the `fasbeam` command line.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod features;
pub mod neural;
pub mod objectives;
pub mod oraclebf;
pub mod scenesim;
pub mod sigcore;
pub mod tensor;

pub use error::{Error, Result};
pub use sigcore::MultichannelSignal;
