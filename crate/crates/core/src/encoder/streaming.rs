//! Stateful chunk-by-chunk inference. Concatenated streaming outputs must
//! equal the masked offline forward; every piece of carried state exists to
//! make that equality exact.

use crate::chunking::{ChunkSpec, LeftContext};
use crate::encoder::{
    conformer_block_stream_step, frontend_stream, BlockStreamState, ConvMode, EncoderConfig,
    EncoderParams, FrontendState, MixingKind, MixingStreamState,
};
use crate::error::{Error, Result};
use crate::kernel::{Matrix, Scalar};

/// Mutable per-stream inference state: one mixing carry and one conv buffer
/// per block, plus the frontend's subsampling remainder. Single-owner: one
/// stream, one context.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamingContext<S: Scalar> {
    chunk_frames: usize,
    left: LeftContext,
    mixing_kind: MixingKind,
    d_model: usize,
    frames_consumed: usize,
    frontend: FrontendState<S>,
    blocks: Vec<BlockStreamState<S>>,
}

impl<S: Scalar> StreamingContext<S> {
    pub fn spec(&self) -> ChunkSpec {
        ChunkSpec::Streaming { chunk_frames: self.chunk_frames, left_context: self.left }
    }

    /// Post-subsampling frames processed so far.
    pub fn frames_consumed(&self) -> usize {
        self.frames_consumed
    }

    /// Raw feature frames one streaming call should carry (`C x factor`).
    pub fn raw_chunk_frames(&self, cfg: &EncoderConfig) -> usize {
        self.chunk_frames * cfg.subsampling_factor
    }

    /// Heap bytes of all carried state. For summary mixing this stays flat
    /// as the stream grows; for attention with infinite left context it
    /// grows with every chunk — that contrast is the point.
    pub fn state_bytes(&self) -> usize {
        self.frontend.state_bytes() + self.blocks.iter().map(|b| b.state_bytes()).sum::<usize>()
    }

    pub fn per_block_state_frames(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .map(|b| match &b.mixing {
                MixingStreamState::Summary(s) => s.frames_live(),
                MixingStreamState::Mhsa(s) => s.cached_frames(),
            })
            .collect()
    }
}

/// Fresh streaming state for `cfg` under a finite-chunk spec.
pub fn init_streaming_context<S: Scalar>(
    cfg: &EncoderConfig,
    spec: ChunkSpec,
) -> Result<StreamingContext<S>> {
    cfg.validate()?;
    let (chunk_frames, left) = match spec {
        ChunkSpec::FullContext => return Err(Error::FullContextStream),
        ChunkSpec::Streaming { chunk_frames, left_context } => (chunk_frames, left_context),
    };
    if chunk_frames < 1 {
        return Err(Error::arg("init_streaming_context", "chunk size must be at least 1"));
    }
    if cfg.conv_mode == ConvMode::Standard {
        return Err(Error::arg(
            "init_streaming_context",
            "standard convolution reads within-kernel future frames and cannot stream",
        ));
    }
    // States are built from a throwaway params shape-wise; the block state
    // only needs dims, which the config already carries.
    let blocks = (0..cfg.num_blocks)
        .map(|_| BlockStreamState::from_config(cfg, left))
        .collect::<Result<Vec<_>>>()?;
    Ok(StreamingContext {
        chunk_frames,
        left,
        mixing_kind: cfg.mixing,
        d_model: cfg.d_model,
        frames_consumed: 0,
        frontend: FrontendState::new(cfg.subsample_halvings()),
        blocks,
    })
}

impl<S: Scalar> BlockStreamState<S> {
    fn from_config(cfg: &EncoderConfig, left: LeftContext) -> Result<Self> {
        use crate::encoder::ConvStreamState;
        use crate::mixing::{ChunkedSummaryState, MhsaStreamState};
        let mixing = match cfg.mixing {
            MixingKind::SummaryMixing => {
                MixingStreamState::Summary(ChunkedSummaryState::new(cfg.d_model, left))
            }
            MixingKind::Mhsa => MixingStreamState::Mhsa(MhsaStreamState::new()),
        };
        Ok(BlockStreamState { mixing, conv: ConvStreamState::new(cfg.conv_kernel, cfg.conv_mode) })
    }
}

/// Process one chunk of raw feature frames (`C x factor` rows; the final
/// chunk may be shorter) and return the post-subsampling encoder output for
/// it. Outputs concatenated over a whole stream equal
/// [`crate::encoder::encoder_forward_offline`] under the matching mask.
pub fn encoder_forward_streaming<S: Scalar>(
    chunk: &Matrix<S>,
    ctx: &mut StreamingContext<S>,
    cfg: &EncoderConfig,
    params: &EncoderParams<S>,
) -> Result<Matrix<S>> {
    if chunk.rows() == 0 {
        return Err(Error::EmptyInput("encoder_forward_streaming"));
    }
    if ctx.mixing_kind != cfg.mixing || ctx.d_model != cfg.d_model || ctx.blocks.len() != cfg.num_blocks
    {
        return Err(Error::ContextMismatch(format!(
            "context built for {:?}/{} x{}, config wants {:?}/{} x{}",
            ctx.mixing_kind,
            ctx.d_model,
            ctx.blocks.len(),
            cfg.mixing,
            cfg.d_model,
            cfg.num_blocks
        )));
    }
    if chunk.cols() != cfg.input_dim {
        return Err(Error::dim(
            "encoder_forward_streaming",
            format!("chunk width {} vs input_dim {}", chunk.cols(), cfg.input_dim),
        ));
    }
    if chunk.rows() > ctx.raw_chunk_frames(cfg) {
        return Err(Error::arg(
            "encoder_forward_streaming",
            format!(
                "chunk of {} raw frames exceeds spec chunk of {}",
                chunk.rows(),
                ctx.raw_chunk_frames(cfg)
            ),
        ));
    }

    let mut x = frontend_stream(chunk, &mut ctx.frontend, &params.frontend)?;
    if x.rows() == 0 {
        return Ok(Matrix::zeros(0, cfg.d_model));
    }
    let base = ctx.frames_consumed;
    if !base.is_multiple_of(ctx.chunk_frames) {
        return Err(Error::arg(
            "encoder_forward_streaming",
            "a shorter-than-spec chunk may only end the stream",
        ));
    }
    for (block, state) in params.blocks.iter().zip(&mut ctx.blocks) {
        x = conformer_block_stream_step(
            &x,
            state,
            block,
            cfg.conv_mode,
            base,
            ctx.chunk_frames,
            ctx.left,
        )?;
    }
    ctx.frames_consumed += x.rows();
    Ok(x)
}
