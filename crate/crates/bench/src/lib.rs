//! Measurement harness for the summary-mixing encoder: synthetic features,
//! feature-file I/O, RTF benchmarking with an allocation-tracked memory
//! model, and report/plot output. The `summix` binary fronts all of it.

pub mod alloc_track;
mod error;
pub mod features_io;
pub mod memmodel;
pub mod plot;
pub mod report;
pub mod rtf;
pub mod synth;

pub use error::{BenchError, Result};

// Unit tests measure allocation peaks, so the test binary gets the tracker.
#[cfg(test)]
#[global_allocator]
static TEST_ALLOC: alloc_track::TrackingAllocator = alloc_track::TrackingAllocator;
