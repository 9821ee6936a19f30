//! Streaming and offline conformer-transducer speech encoder built around a
//! linear-time summary-mixing cell, with a masked self-attention baseline,
//! dynamic chunk convolutions and a precision-configurable transducer loss.
//!
//! The crate is generic over the floating-point width (`f32`/`f64`) via
//! [`kernel::Scalar`], so the same model definition serves both the fast path
//! and the wide reference used in tests.

pub mod chunking;
pub mod encoder;
mod error;
pub mod features;
pub mod kernel;
pub mod mixing;
pub mod transducer;

pub use error::{Error, Result};
