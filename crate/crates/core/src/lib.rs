//! Template-initialized convolutional event detection for multichannel
//! time series.
//!
//! The crate is organised as a pipeline:
//!
//! * [`timeseries`]: recordings, events and deterministic DSP (resampling,
//!   band-pass filtering, re-referencing, epoching, artifact rejection,
//!   standardization, windowing).
//! * [`template`]: averaged response templates and their conversion into
//!   variance-scaled convolution kernels.
//! * [`nn`]: a small reverse-mode engine for 1-D convolutional networks with
//!   an Adam optimizer and finite-difference gradient checking.
//! * [`model`]: the encoder / decoder / detector network, its two training
//!   stages and whole-recording inference.
//! * [`eval`]: peak picking, tolerance matching, F1 scoring and
//!   leave-one-subject-out evaluation.
//! * [`synth`]: synthetic responses embedded in coloured noise with exact
//!   ground truth.
//! * [`formats`]: `MCRD` recordings, `DMCK` checkpoints and CSV files.

pub mod error;
pub mod eval;
pub mod formats;
pub mod model;
pub mod nn;
pub mod synth;
pub mod template;
pub mod timeseries;

pub use error::{Error, Result};
pub use timeseries::{Epoch, EventList, Recording};
