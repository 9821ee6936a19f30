//! Macaron conformer block: half-FFN, mixing cell, conv module, half-FFN,
//! each pre-normed with a residual, then a final layer norm.

use rand::Rng;

use crate::chunking::{LeftContext, VisibilityMask};
use crate::encoder::conv::{ConvModuleParams, ConvMode, ConvStreamState};
use crate::error::{Error, Result};
use crate::kernel::{
    activations, layernorm, Activation, Dense, Matrix, Scalar, LAYERNORM_EPS,
};
use crate::mixing::{
    mhsa_masked, mhsa_stream_step, summary_mixing_chunk_step, summary_mixing_masked,
    ChunkedSummaryState, MhsaParams, MhsaStreamState, SummaryMixingParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<S: Scalar> {
    pub gain: Vec<S>,
    pub bias: Vec<S>,
    pub eps: f64,
}

impl<S: Scalar> LayerNormParams<S> {
    pub fn identity(dim: usize) -> Self {
        LayerNormParams { gain: vec![S::ONE; dim], bias: vec![S::ZERO; dim], eps: LAYERNORM_EPS }
    }

    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        LayerNormParams {
            gain: (0..dim).map(|_| S::from_f64(1.0 + rng.random_range(-0.1..0.1))).collect(),
            bias: (0..dim).map(|_| S::from_f64(rng.random_range(-0.1..0.1))).collect(),
            eps: LAYERNORM_EPS,
        }
    }

    pub fn apply(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        layernorm(x, &self.gain, &self.bias, self.eps)
    }

    pub fn param_count(&self) -> usize {
        self.gain.len() + self.bias.len()
    }

    pub fn cast<T: Scalar>(&self) -> LayerNormParams<T> {
        LayerNormParams {
            gain: self.gain.iter().map(|v| T::from_f64(v.to_f64())).collect(),
            bias: self.bias.iter().map(|v| T::from_f64(v.to_f64())).collect(),
            eps: self.eps,
        }
    }
}

/// Two dense layers with SiLU in between; the conformer's feed-forward.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardParams<S: Scalar> {
    pub w_in: Dense<S>,
    pub w_out: Dense<S>,
}

impl<S: Scalar> FeedForwardParams<S> {
    pub fn random(d_model: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        FeedForwardParams {
            w_in: Dense::random(hidden, d_model, rng),
            w_out: Dense::random(d_model, hidden, rng),
        }
    }

    pub fn forward(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        self.w_out.forward(&activations(&self.w_in.forward(x)?, Activation::Silu)?)
    }

    pub fn param_count(&self) -> usize {
        self.w_in.param_count() + self.w_out.param_count()
    }

    pub fn cast<T: Scalar>(&self) -> FeedForwardParams<T> {
        FeedForwardParams { w_in: self.w_in.cast::<T>(), w_out: self.w_out.cast::<T>() }
    }
}

/// Which cell mixes information across frames.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingParams<S: Scalar> {
    Summary(SummaryMixingParams<S>),
    Mhsa(MhsaParams<S>),
}

impl<S: Scalar> MixingParams<S> {
    pub fn param_count(&self) -> usize {
        match self {
            MixingParams::Summary(p) => p.param_count(),
            MixingParams::Mhsa(p) => p.param_count(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> MixingParams<T> {
        match self {
            MixingParams::Summary(p) => MixingParams::Summary(p.cast::<T>()),
            MixingParams::Mhsa(p) => MixingParams::Mhsa(p.cast::<T>()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<S: Scalar> {
    pub ln_ffn1: LayerNormParams<S>,
    pub ffn1: FeedForwardParams<S>,
    pub ln_mixing: LayerNormParams<S>,
    pub mixing: MixingParams<S>,
    pub ln_conv: LayerNormParams<S>,
    pub conv: ConvModuleParams<S>,
    pub ln_ffn2: LayerNormParams<S>,
    pub ffn2: FeedForwardParams<S>,
    pub ln_final: LayerNormParams<S>,
}

impl<S: Scalar> BlockParams<S> {
    pub fn param_count(&self) -> usize {
        self.ln_ffn1.param_count()
            + self.ffn1.param_count()
            + self.ln_mixing.param_count()
            + self.mixing.param_count()
            + self.ln_conv.param_count()
            + self.conv.param_count()
            + self.ln_ffn2.param_count()
            + self.ffn2.param_count()
            + self.ln_final.param_count()
    }

    pub fn cast<T: Scalar>(&self) -> BlockParams<T> {
        BlockParams {
            ln_ffn1: self.ln_ffn1.cast::<T>(),
            ffn1: self.ffn1.cast::<T>(),
            ln_mixing: self.ln_mixing.cast::<T>(),
            mixing: self.mixing.cast::<T>(),
            ln_conv: self.ln_conv.cast::<T>(),
            conv: self.conv.cast::<T>(),
            ln_ffn2: self.ln_ffn2.cast::<T>(),
            ffn2: self.ffn2.cast::<T>(),
            ln_final: self.ln_final.cast::<T>(),
        }
    }
}

fn add_scaled<S: Scalar>(x: &mut Matrix<S>, delta: &Matrix<S>, factor: S) -> Result<()> {
    if x.rows() != delta.rows() || x.cols() != delta.cols() {
        return Err(Error::dim("residual", "shape mismatch"));
    }
    for (a, &b) in x.data_mut().iter_mut().zip(delta.data()) {
        *a += factor * b;
    }
    Ok(())
}

/// Whole-utterance block forward under a visibility mask.
pub fn conformer_block_forward<S: Scalar>(
    x: &Matrix<S>,
    mask: &VisibilityMask,
    block: &BlockParams<S>,
    conv_mode: ConvMode,
) -> Result<Matrix<S>> {
    let half = S::from_f64(0.5);
    let mut x = x.clone();

    let ffn1 = block.ffn1.forward(&block.ln_ffn1.apply(&x)?)?;
    add_scaled(&mut x, &ffn1, half)?;

    let mixed = match &block.mixing {
        MixingParams::Summary(p) => summary_mixing_masked(&block.ln_mixing.apply(&x)?, mask, p)?,
        MixingParams::Mhsa(p) => mhsa_masked(&block.ln_mixing.apply(&x)?, mask, p)?,
    };
    add_scaled(&mut x, &mixed, S::ONE)?;

    let conv = block.conv.forward_offline(&block.ln_conv.apply(&x)?, mask, conv_mode)?;
    add_scaled(&mut x, &conv, S::ONE)?;

    let ffn2 = block.ffn2.forward(&block.ln_ffn2.apply(&x)?)?;
    add_scaled(&mut x, &ffn2, half)?;

    block.ln_final.apply(&x)
}

/// Per-stream state of one block: the mixing cell's carry plus the conv
/// module's left-edge buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingStreamState<S: Scalar> {
    Summary(ChunkedSummaryState<S>),
    Mhsa(MhsaStreamState<S>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockStreamState<S: Scalar> {
    pub mixing: MixingStreamState<S>,
    pub conv: ConvStreamState<S>,
}

impl<S: Scalar> BlockStreamState<S> {
    pub fn new(block: &BlockParams<S>, conv_kernel: usize, conv_mode: ConvMode, left: LeftContext) -> Self {
        let mixing = match &block.mixing {
            MixingParams::Summary(p) => {
                MixingStreamState::Summary(ChunkedSummaryState::new(p.summary_dim(), left))
            }
            MixingParams::Mhsa(_) => MixingStreamState::Mhsa(MhsaStreamState::new()),
        };
        BlockStreamState { mixing, conv: ConvStreamState::new(conv_kernel, conv_mode) }
    }

    pub fn state_bytes(&self) -> usize {
        let mixing = match &self.mixing {
            MixingStreamState::Summary(s) => s.state_bytes(),
            MixingStreamState::Mhsa(s) => s.state_bytes(),
        };
        mixing + self.conv.state_bytes()
    }
}

/// One chunk through one block. `base` is the absolute index of the chunk's
/// first post-subsampling frame; `chunk_frames`/`left` define the stream's
/// chunking.
#[allow(clippy::too_many_arguments)]
pub fn conformer_block_stream_step<S: Scalar>(
    chunk: &Matrix<S>,
    state: &mut BlockStreamState<S>,
    block: &BlockParams<S>,
    conv_mode: ConvMode,
    base: usize,
    chunk_frames: usize,
    left: LeftContext,
) -> Result<Matrix<S>> {
    let half = S::from_f64(0.5);
    let mut x = chunk.clone();

    let ffn1 = block.ffn1.forward(&block.ln_ffn1.apply(&x)?)?;
    add_scaled(&mut x, &ffn1, half)?;

    let normed = block.ln_mixing.apply(&x)?;
    let mixed = match (&block.mixing, &mut state.mixing) {
        (MixingParams::Summary(p), MixingStreamState::Summary(s)) => {
            summary_mixing_chunk_step(&normed, s, p)?
        }
        (MixingParams::Mhsa(p), MixingStreamState::Mhsa(s)) => {
            let chunk_idx = base / chunk_frames;
            let visible_start = match left {
                LeftContext::Infinite => 0,
                LeftContext::Chunks(l) => chunk_idx.saturating_sub(l) * chunk_frames,
            };
            mhsa_stream_step(&normed, s, p, visible_start, base)?
        }
        _ => return Err(Error::ContextMismatch("mixing state kind".into())),
    };
    add_scaled(&mut x, &mixed, S::ONE)?;

    let conv = block.conv.forward_streaming(
        &block.ln_conv.apply(&x)?,
        &mut state.conv,
        conv_mode,
        base,
        chunk_frames,
        left,
    )?;
    add_scaled(&mut x, &conv, S::ONE)?;

    let ffn2 = block.ffn2.forward(&block.ln_ffn2.apply(&x)?)?;
    add_scaled(&mut x, &ffn2, half)?;

    block.ln_final.apply(&x)
}
