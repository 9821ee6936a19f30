//! The conformer encoder stack: subsampling frontend, `num_blocks` macaron
//! blocks with either mixing cell, and the stateful streaming path that must
//! reproduce the masked offline path exactly.

mod block;
mod checkpoint;
mod conv;
mod frontend;
mod streaming;

pub use block::{
    conformer_block_forward, conformer_block_stream_step, BlockParams, BlockStreamState,
    FeedForwardParams, LayerNormParams, MixingParams, MixingStreamState,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conv::{
    causal_conv_forward, dcconv_forward, standard_conv_forward, ConvModuleParams, ConvMode,
    ConvStreamState, DepthwiseKernel,
};
pub use frontend::{frontend_offline, frontend_stream, FrontendParams, FrontendState};
pub use streaming::{encoder_forward_streaming, init_streaming_context, StreamingContext};

use rand::Rng;

use crate::chunking::{build_mask, ChunkSpec};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::kernel::{Matrix, PrecisionPolicy, Scalar};
use crate::mixing::{MhsaParams, PositionalEncoding, SummaryMixingParams};

/// Which cell replaces self-attention in every block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingKind {
    SummaryMixing,
    Mhsa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub num_blocks: usize,
    pub d_model: usize,
    pub input_dim: usize,
    pub mixing: MixingKind,
    /// Attention heads; ignored for summary mixing.
    pub num_heads: usize,
    pub conv_kernel: usize,
    pub ffn_expansion: f64,
    pub conv_mode: ConvMode,
    /// Frame-rate reduction of the frontend; power of two.
    pub subsampling_factor: usize,
    pub precision: PrecisionPolicy,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_blocks < 1 {
            return Err(Error::arg("encoder_config", "num_blocks must be at least 1"));
        }
        if self.conv_kernel.is_multiple_of(2) {
            return Err(Error::EvenKernel { width: self.conv_kernel });
        }
        if self.d_model == 0 || self.input_dim == 0 {
            return Err(Error::arg("encoder_config", "zero model or input width"));
        }
        if self.mixing == MixingKind::Mhsa && !self.d_model.is_multiple_of(self.num_heads.max(1)) {
            return Err(Error::arg("encoder_config", "d_model not divisible by num_heads"));
        }
        if !self.subsampling_factor.is_power_of_two() {
            return Err(Error::arg("encoder_config", "subsampling factor must be a power of two"));
        }
        if self.ffn_expansion <= 0.0 {
            return Err(Error::arg("encoder_config", "ffn_expansion must be positive"));
        }
        Ok(())
    }

    pub fn ffn_hidden(&self) -> usize {
        ((self.d_model as f64 * self.ffn_expansion).round() as usize).max(1)
    }

    pub fn subsample_halvings(&self) -> usize {
        self.subsampling_factor.trailing_zeros() as usize
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            num_blocks: 12,
            d_model: 144,
            input_dim: 80,
            mixing: MixingKind::SummaryMixing,
            num_heads: 4,
            conv_kernel: 31,
            ffn_expansion: 4.0,
            conv_mode: ConvMode::DynamicChunk,
            subsampling_factor: 1,
            precision: PrecisionPolicy::f32(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<S: Scalar> {
    pub frontend: FrontendParams<S>,
    pub blocks: Vec<BlockParams<S>>,
}

pub(crate) fn random_block_params<S: Scalar>(
    d_model: usize,
    ffn_hidden: usize,
    mixing: MixingKind,
    num_heads: usize,
    conv_kernel: usize,
    rng: &mut impl Rng,
) -> BlockParams<S> {
    let mixing = match mixing {
        MixingKind::SummaryMixing => MixingParams::Summary(SummaryMixingParams::random(
            d_model, d_model, d_model, d_model, rng,
        )),
        MixingKind::Mhsa => {
            MixingParams::Mhsa(MhsaParams::random(d_model, num_heads, rng).expect("validated"))
        }
    };
    BlockParams {
        ln_ffn1: LayerNormParams::random(d_model, rng),
        ffn1: FeedForwardParams::random(d_model, ffn_hidden, rng),
        ln_mixing: LayerNormParams::random(d_model, rng),
        mixing,
        ln_conv: LayerNormParams::random(d_model, rng),
        conv: ConvModuleParams::random(d_model, conv_kernel, rng),
        ln_ffn2: LayerNormParams::random(d_model, rng),
        ffn2: FeedForwardParams::random(d_model, ffn_hidden, rng),
        ln_final: LayerNormParams::random(d_model, rng),
    }
}

impl<S: Scalar> EncoderParams<S> {
    pub fn random(cfg: &EncoderConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let frontend =
            FrontendParams::random(cfg.input_dim, cfg.d_model, cfg.subsample_halvings(), rng);
        let blocks = (0..cfg.num_blocks)
            .map(|_| {
                random_block_params(
                    cfg.d_model,
                    cfg.ffn_hidden(),
                    cfg.mixing,
                    cfg.num_heads,
                    cfg.conv_kernel,
                    rng,
                )
            })
            .collect();
        Ok(EncoderParams { frontend, blocks })
    }

    pub fn param_count(&self) -> usize {
        self.frontend.param_count() + self.blocks.iter().map(|b| b.param_count()).sum::<usize>()
    }

    /// Set the attention positional encoding on every block (no-op for
    /// summary mixing).
    pub fn set_positional(&mut self, positional: PositionalEncoding) {
        for block in &mut self.blocks {
            if let MixingParams::Mhsa(p) = &mut block.mixing {
                p.positional = positional;
            }
        }
    }

    pub fn cast<T: Scalar>(&self) -> EncoderParams<T> {
        EncoderParams {
            frontend: self.frontend.cast::<T>(),
            blocks: self.blocks.iter().map(|b| b.cast::<T>()).collect(),
        }
    }
}

/// Whole-utterance encoder forward. The chunk spec is interpreted at the
/// post-subsampling frame rate; the same mask is shared by every block.
pub fn encoder_forward_offline<S: Scalar>(
    feat: &FeatureSequence<S>,
    spec: ChunkSpec,
    cfg: &EncoderConfig,
    params: &EncoderParams<S>,
) -> Result<Matrix<S>> {
    cfg.validate()?;
    if feat.num_frames() == 0 {
        return Err(Error::EmptyInput("encoder_forward_offline"));
    }
    if feat.dim() != cfg.input_dim {
        return Err(Error::dim(
            "encoder_forward_offline",
            format!("features {} vs input_dim {}", feat.dim(), cfg.input_dim),
        ));
    }
    let mut x = frontend_offline(&feat.data, &params.frontend)?;
    if x.rows() == 0 {
        return Err(Error::arg(
            "encoder_forward_offline",
            "input shorter than one subsampled frame",
        ));
    }
    let mask = build_mask(x.rows(), spec)?;
    for block in &params.blocks {
        x = conformer_block_forward(&x, &mask, block, cfg.conv_mode)?;
    }
    Ok(x)
}
