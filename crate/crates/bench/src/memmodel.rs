//! Closed-form peak-memory model of the offline encoder forward.
//!
//! The model mirrors what the implementation actually allocates: weights,
//! the frontend's subsampling buffers, the per-block sequence workspaces
//! (the feed-forward phase is the widest), and the mixing mechanism's own
//! structure — the full `heads x T x T` attention score tensor on one side,
//! the per-block running summary vectors on the other. That last term is
//! where quadratic and linear mixing part ways.

use summix_core::chunking::ChunkSpec;
use summix_core::encoder::{EncoderConfig, MixingKind};

/// Byte breakdown of the modeled peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryModel {
    pub weights_bytes: u64,
    /// Transient frontend buffers (raw-rate projections while subsampling).
    pub frontend_bytes: u64,
    /// Linear-in-T per-block workspaces (norms, feed-forward, conv stack).
    pub workspace_bytes: u64,
    /// The mixing mechanism's own storage: score tensor for attention,
    /// running summary vectors for summary mixing.
    pub mixing_term_bytes: u64,
    pub total_bytes: u64,
}

/// Parameter count derived from the config alone; kept in lockstep with
/// the real parameter structs by a test.
pub fn encoder_param_count(cfg: &EncoderConfig) -> usize {
    let d = cfg.d_model;
    let h = cfg.ffn_hidden();
    let frontend = d * cfg.input_dim + d + cfg.subsample_halvings() * (3 * d + d);
    let ffn = 2 * (h * d + h + d * h + d);
    let norms = 5 * 2 * d;
    let mixing = match cfg.mixing {
        MixingKind::SummaryMixing => (d * d + d) + (d * d + d) + (d * 2 * d + d),
        MixingKind::Mhsa => 4 * (d * d + d),
    };
    let conv = (2 * d * d + 2 * d) + (cfg.conv_kernel * d + d) + (d * d + d);
    frontend + cfg.num_blocks * (ffn + norms + mixing + conv)
}

/// Model the peak heap bytes of one offline forward at `t_post`
/// post-subsampling frames (weights included; `t_post == 0` gives the
/// weights-only baseline).
pub fn model_memory_breakdown(cfg: &EncoderConfig, spec: ChunkSpec, t_post: usize) -> MemoryModel {
    let w = cfg.precision.compute().bytes() as u64;
    let d = cfg.d_model as u64;
    let t = t_post as u64;
    let seq = t * d * w;

    let weights_bytes = encoder_param_count(cfg) as u64 * w;
    if t_post == 0 {
        return MemoryModel {
            weights_bytes,
            frontend_bytes: 0,
            workspace_bytes: 0,
            mixing_term_bytes: 0,
            total_bytes: weights_bytes,
        };
    }

    let factor = cfg.subsampling_factor as u64;
    let frontend_bytes = if factor == 1 { seq } else { 2 * factor * seq };

    let chunks = match spec {
        ChunkSpec::FullContext => 1,
        ChunkSpec::Streaming { chunk_frames, .. } => t_post.div_ceil(chunk_frames.max(1)) as u64,
    };
    // widest phase is the feed-forward: x, normed copy, hidden pair at the
    // expansion width, output, plus the summary cell's per-chunk partials
    let expansion = cfg.ffn_expansion.ceil() as u64;
    let workspace_bytes = (2 * expansion + 3) * seq + 2 * chunks * d * w;

    let mixing_term_bytes = match cfg.mixing {
        MixingKind::Mhsa => cfg.num_heads as u64 * t * t * w,
        MixingKind::SummaryMixing => cfg.num_blocks as u64 * d * w,
    };

    let total_bytes = weights_bytes + frontend_bytes.max(workspace_bytes + mixing_term_bytes);
    MemoryModel { weights_bytes, frontend_bytes, workspace_bytes, mixing_term_bytes, total_bytes }
}

/// Total modeled peak bytes.
pub fn model_peak_memory(cfg: &EncoderConfig, spec: ChunkSpec, t_post: usize) -> u64 {
    model_memory_breakdown(cfg, spec, t_post).total_bytes
}
