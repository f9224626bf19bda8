//! Real-time hybrid acoustic echo cancellation and noise suppression.
//!
//! The engine chains a partitioned-block frequency-domain Kalman filter
//! (linear echo canceller) with a split-and-merge recurrent UNet that
//! estimates complex filter-and-sum masks over the microphone, far-end,
//! error and linear-echo spectra, optionally followed by a deep-filtering
//! postnet. Everything runs either offline over whole signals or
//! frame-by-frame through [`stream::SmruStream`], and both paths produce the
//! same samples.

#![allow(clippy::needless_range_loop)]

pub mod complexity;
pub mod error;
pub mod laec;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod scenario;
pub mod signal;
pub mod stream;
pub mod tensor;
pub mod weights;

pub use error::{Error, Result};
