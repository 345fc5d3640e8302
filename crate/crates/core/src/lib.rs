//! Hybrid precoder and combiner design for a full-duplex mmWave base station
//! that serves a downlink user while operating as a monostatic OFDM radar.

// Comparisons like `!(x > 0.0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod hybridize;
pub mod metrics;
pub mod numkernels;
pub mod propagation;
pub mod radarproc;
pub mod rxcombiner;
pub mod txdesign;

pub use error::{Error, Result};
pub use numkernels::{CMat, CVec};
pub use rustfft::num_complex::Complex64;
