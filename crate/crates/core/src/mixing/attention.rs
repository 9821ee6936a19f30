//! Masked multi-head self-attention, the quadratic-time baseline the summary
//! cell is measured against. Masked positions are excluded from the softmax
//! outright rather than pushed to large negative logits, so causality is
//! exact. The streaming path keeps a key/value cache per block; with
//! infinite left context that cache grows without bound, which is precisely
//! the behavior the benchmark is built to expose.

use rand::Rng;

use crate::chunking::VisibilityMask;
use crate::error::{Error, Result};
use crate::kernel::{dot, opcount, Dense, Matrix, Scalar};

/// Optional additive positional encoding applied to the cell input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositionalEncoding {
    #[default]
    None,
    /// Sinusoidal encoding of the absolute frame index.
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhsaParams<S: Scalar> {
    pub num_heads: usize,
    pub query: Dense<S>,
    pub key: Dense<S>,
    pub value: Dense<S>,
    pub output: Dense<S>,
    pub positional: PositionalEncoding,
}

impl<S: Scalar> MhsaParams<S> {
    pub fn new(
        num_heads: usize,
        query: Dense<S>,
        key: Dense<S>,
        value: Dense<S>,
        output: Dense<S>,
        positional: PositionalEncoding,
    ) -> Result<Self> {
        let d = query.out_dim();
        if !d.is_multiple_of(num_heads) || num_heads == 0 {
            return Err(Error::arg(
                "mhsa",
                format!("d_model {d} not divisible by {num_heads} heads"),
            ));
        }
        if key.out_dim() != d || value.out_dim() != d || output.in_dim() != d {
            return Err(Error::dim("mhsa", "projection widths disagree"));
        }
        Ok(MhsaParams { num_heads, query, key, value, output, positional })
    }

    pub fn random(d_model: usize, num_heads: usize, rng: &mut impl Rng) -> Result<Self> {
        MhsaParams::new(
            num_heads,
            Dense::random(d_model, d_model, rng),
            Dense::random(d_model, d_model, rng),
            Dense::random(d_model, d_model, rng),
            Dense::random(d_model, d_model, rng),
            PositionalEncoding::None,
        )
    }

    pub fn d_model(&self) -> usize {
        self.query.out_dim()
    }

    pub fn head_dim(&self) -> usize {
        self.d_model() / self.num_heads
    }

    pub fn param_count(&self) -> usize {
        self.query.param_count()
            + self.key.param_count()
            + self.value.param_count()
            + self.output.param_count()
    }

    pub fn cast<T: Scalar>(&self) -> MhsaParams<T> {
        MhsaParams {
            num_heads: self.num_heads,
            query: self.query.cast::<T>(),
            key: self.key.cast::<T>(),
            value: self.value.cast::<T>(),
            output: self.output.cast::<T>(),
            positional: self.positional,
        }
    }

    /// Input with positional encoding applied; `offset` is the absolute
    /// index of the first row.
    fn encode_positions(&self, x: &Matrix<S>, offset: usize) -> Matrix<S> {
        match self.positional {
            PositionalEncoding::None => x.clone(),
            PositionalEncoding::Absolute => {
                let d = x.cols();
                let mut out = x.clone();
                for r in 0..out.rows() {
                    let pos = (offset + r) as f64;
                    let row = out.row_mut(r);
                    for (c, v) in row.iter_mut().enumerate() {
                        let rate = 10_000f64.powf(-((c / 2 * 2) as f64) / d as f64);
                        let angle = pos * rate;
                        let enc = if c % 2 == 0 { angle.sin() } else { angle.cos() };
                        *v += S::from_f64(enc);
                    }
                }
                out
            }
        }
    }
}

/// In-place softmax over a slice with max-subtraction.
fn softmax_slice<S: Scalar>(row: &mut [S]) {
    let mut max = S::NEG_INFINITY;
    for &v in row.iter() {
        max = max.maximum(v);
    }
    let mut sum = S::ZERO;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = S::ONE / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

/// Masked scaled-dot-product attention over a whole utterance.
pub fn mhsa_masked<S: Scalar>(
    x: &Matrix<S>,
    mask: &VisibilityMask,
    p: &MhsaParams<S>,
) -> Result<Matrix<S>> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("mhsa_masked"));
    }
    if mask.t() != x.rows() {
        return Err(Error::dim("mhsa_masked", format!("mask T {} vs rows {}", mask.t(), x.rows())));
    }
    if x.cols() != p.d_model() {
        return Err(Error::dim("mhsa_masked", format!("cols {} vs d_model {}", x.cols(), p.d_model())));
    }
    let t_len = x.rows();
    let (heads, dh) = (p.num_heads, p.head_dim());
    let xe = p.encode_positions(x, 0);
    let q = p.query.forward(&xe)?;
    let k = p.key.forward(&xe)?;
    let v = p.value.forward(&xe)?;
    let scale = S::from_f64(1.0 / (dh as f64).sqrt());

    // Full score tensor, the standard baseline's quadratic working set.
    // Key/value rows are scanned whole (all heads at once) to keep the
    // traversal linear in memory.
    let mut scores = vec![S::ZERO; heads * t_len * t_len];
    let mut ctx = Matrix::zeros(t_len, p.d_model());
    for t in 0..t_len {
        let (start, end) = mask.visible_range(t);
        if start >= end {
            return Err(Error::FullyMaskedRow { row: t });
        }
        let q_row = q.row(t);
        for u in start..end {
            let k_row = k.row(u);
            for head in 0..heads {
                let lo = head * dh;
                let hi = lo + dh;
                scores[(head * t_len + t) * t_len + u] =
                    dot(&q_row[lo..hi], &k_row[lo..hi]) * scale;
            }
        }
        for head in 0..heads {
            let row = &mut scores[(head * t_len + t) * t_len..][..t_len];
            softmax_slice(&mut row[start..end]);
        }
        let ctx_row = ctx.row_mut(t);
        for u in start..end {
            let v_row = v.row(u);
            for head in 0..heads {
                let lo = head * dh;
                let w = scores[(head * t_len + t) * t_len + u];
                for (c, &vv) in v_row[lo..lo + dh].iter().enumerate() {
                    ctx_row[lo + c] += w * vv;
                }
            }
        }
        opcount::add(((end - start) * dh * heads * 2) as u64);
    }
    p.output.forward(&ctx)
}

/// Per-stream attention state: cached key/value rows for the frames still
/// visible, stored contiguously so score loops scan linearly, plus the
/// absolute index of the first cached frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MhsaStreamState<S: Scalar> {
    keys: Vec<S>,
    values: Vec<S>,
    d_model: usize,
    first_frame: usize,
}

impl<S: Scalar> MhsaStreamState<S> {
    pub fn new() -> Self {
        MhsaStreamState { keys: Vec::new(), values: Vec::new(), d_model: 0, first_frame: 0 }
    }

    pub fn cached_frames(&self) -> usize {
        self.keys.len().checked_div(self.d_model).unwrap_or(0)
    }

    pub fn state_bytes(&self) -> usize {
        (self.keys.len() + self.values.len()) * S::WIDTH
    }

    fn evict_before(&mut self, frame: usize) {
        let drop = frame.saturating_sub(self.first_frame).min(self.cached_frames());
        if drop > 0 {
            self.keys.drain(..drop * self.d_model);
            self.values.drain(..drop * self.d_model);
            self.first_frame += drop;
        }
    }
}

impl<S: Scalar> Default for MhsaStreamState<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// One streaming attention step. The chunk attends over every cached frame
/// plus the whole current chunk (within-chunk future is visible by
/// construction). `visible_start` is the absolute index of the oldest frame
/// the current chunk may see; older cache entries are evicted first.
/// `abs_offset` is the absolute index of the chunk's first frame.
pub fn mhsa_stream_step<S: Scalar>(
    chunk: &Matrix<S>,
    state: &mut MhsaStreamState<S>,
    p: &MhsaParams<S>,
    visible_start: usize,
    abs_offset: usize,
) -> Result<Matrix<S>> {
    if chunk.rows() == 0 {
        return Err(Error::EmptyInput("mhsa_stream_step"));
    }
    let d = p.d_model();
    if state.d_model == 0 {
        state.d_model = d;
        state.first_frame = abs_offset;
    } else if state.d_model != d {
        return Err(Error::dim("mhsa_stream_step", "cache width vs d_model"));
    }
    state.evict_before(visible_start);

    let (heads, dh) = (p.num_heads, p.head_dim());
    let xe = p.encode_positions(chunk, abs_offset);
    let q = p.query.forward(&xe)?;
    let k = p.key.forward(&xe)?;
    let v = p.value.forward(&xe)?;
    state.keys.extend_from_slice(k.data());
    state.values.extend_from_slice(v.data());

    let window = state.cached_frames();
    let scale = S::from_f64(1.0 / (dh as f64).sqrt());
    let mut ctx = Matrix::zeros(chunk.rows(), d);
    let mut score_rows = vec![S::ZERO; heads * window];
    for t in 0..chunk.rows() {
        let q_row = q.row(t);
        for (u, k_row) in state.keys.chunks_exact(d).enumerate() {
            for head in 0..heads {
                let lo = head * dh;
                let hi = lo + dh;
                score_rows[head * window + u] = dot(&q_row[lo..hi], &k_row[lo..hi]) * scale;
            }
        }
        for head in 0..heads {
            softmax_slice(&mut score_rows[head * window..(head + 1) * window]);
        }
        let ctx_row = ctx.row_mut(t);
        for (u, v_row) in state.values.chunks_exact(d).enumerate() {
            for head in 0..heads {
                let lo = head * dh;
                let w = score_rows[head * window + u];
                for (c, &vv) in v_row[lo..lo + dh].iter().enumerate() {
                    ctx_row[lo + c] += w * vv;
                }
            }
        }
        opcount::add((window * dh * heads * 2) as u64);
    }
    p.output.forward(&ctx)
}
