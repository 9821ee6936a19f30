//! Sequence mixing cells: linear-time summary mixing and the masked
//! multi-head self-attention baseline.

mod attention;
mod summary;

pub use attention::{mhsa_masked, mhsa_stream_step, MhsaParams, MhsaStreamState, PositionalEncoding};
pub use summary::{
    summary_mixing_chunk_step, summary_mixing_masked, summary_mixing_offline, summary_mixing_step,
    ChunkedSummaryState, SummaryMixingParams, SummaryState,
};
