//! Depthwise convolutions for the conformer conv module.
//!
//! Three temporal layouts: dynamic-chunk (centered taps, gated by the
//! visibility mask so within-chunk future is used but nothing leaks across
//! chunk or left-context boundaries), causal (current frame is the rightmost
//! tap), and standard centered (offline only). Taps outside the signal or
//! masked away contribute zero; nothing is renormalized.

use std::collections::VecDeque;

use rand::Rng;

use crate::chunking::{LeftContext, VisibilityMask};
use crate::error::{Error, Result};
use crate::kernel::{activations, opcount, Activation, Dense, Matrix, Scalar};

/// Depthwise kernel: `width` taps per channel plus a per-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseKernel<S: Scalar> {
    /// `width x channels`, row `k` holding tap `k` for every channel.
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> DepthwiseKernel<S> {
    pub fn new(weights: Matrix<S>, bias: Vec<S>) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::dim("depthwise", "bias length vs channels"));
        }
        Ok(DepthwiseKernel { weights, bias })
    }

    pub fn random(width: usize, channels: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (width as f64).sqrt();
        let data =
            (0..width * channels).map(|_| S::from_f64(rng.random_range(-scale..scale))).collect();
        DepthwiseKernel {
            weights: Matrix::from_vec(width, channels, data).unwrap(),
            bias: (0..channels).map(|_| S::from_f64(rng.random_range(-scale..scale))).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.weights.rows()
    }

    pub fn channels(&self) -> usize {
        self.weights.cols()
    }

    pub fn half(&self) -> usize {
        (self.width() - 1) / 2
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    pub fn cast<T: Scalar>(&self) -> DepthwiseKernel<T> {
        DepthwiseKernel {
            weights: self.weights.cast::<T>(),
            bias: self.bias.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }

    fn check_odd(&self) -> Result<()> {
        if self.width().is_multiple_of(2) {
            return Err(Error::EvenKernel { width: self.width() });
        }
        Ok(())
    }

    fn check_input(&self, x: &Matrix<S>) -> Result<()> {
        if x.cols() != self.channels() {
            return Err(Error::dim(
                "depthwise",
                format!("input {} vs {} channels", x.cols(), self.channels()),
            ));
        }
        Ok(())
    }
}

/// Centered depthwise convolution with every tap gated by the visibility
/// mask: `out[t] = sum_k w_k * x[t+k]` over taps that land inside the signal
/// and are visible to frame `t`.
pub fn dcconv_forward<S: Scalar>(
    x: &Matrix<S>,
    mask: &VisibilityMask,
    kernel: &DepthwiseKernel<S>,
) -> Result<Matrix<S>> {
    kernel.check_odd()?;
    kernel.check_input(x)?;
    if mask.t() != x.rows() {
        return Err(Error::dim("dcconv", format!("mask T {} vs rows {}", mask.t(), x.rows())));
    }
    let t_len = x.rows();
    let half = kernel.half() as i64;
    let mut out = Matrix::zeros(t_len, x.cols());
    for t in 0..t_len {
        let out_row = out.row_mut(t);
        out_row.copy_from_slice(&kernel.bias);
        for k in -half..=half {
            let j = t as i64 + k;
            if j < 0 || j >= t_len as i64 {
                continue;
            }
            let j = j as usize;
            if !mask.bit(t, j) {
                continue;
            }
            let w_row = kernel.weights.row((k + half) as usize);
            for ((o, &w), &v) in out_row.iter_mut().zip(w_row).zip(x.row(j)) {
                *o += w * v;
            }
            opcount::add(x.cols() as u64);
        }
    }
    Ok(out)
}

/// Causal depthwise convolution: taps cover `x[t-K+1 ..= t]`, zero-padded on
/// the left. Rightmost tap is the current frame; no future frame is touched.
pub fn causal_conv_forward<S: Scalar>(
    x: &Matrix<S>,
    kernel: &DepthwiseKernel<S>,
) -> Result<Matrix<S>> {
    kernel.check_odd()?;
    kernel.check_input(x)?;
    let t_len = x.rows();
    let width = kernel.width() as i64;
    let mut out = Matrix::zeros(t_len, x.cols());
    for t in 0..t_len {
        let out_row = out.row_mut(t);
        out_row.copy_from_slice(&kernel.bias);
        for k in 0..width {
            let j = t as i64 - (width - 1) + k;
            if j < 0 {
                continue;
            }
            let w_row = kernel.weights.row(k as usize);
            for ((o, &w), &v) in out_row.iter_mut().zip(w_row).zip(x.row(j as usize)) {
                *o += w * v;
            }
            opcount::add(x.cols() as u64);
        }
    }
    Ok(out)
}

/// Plain centered convolution, no masking. Offline use only: it reads
/// within-kernel future frames unconditionally.
pub fn standard_conv_forward<S: Scalar>(
    x: &Matrix<S>,
    kernel: &DepthwiseKernel<S>,
) -> Result<Matrix<S>> {
    kernel.check_odd()?;
    kernel.check_input(x)?;
    let t_len = x.rows();
    let half = kernel.half() as i64;
    let mut out = Matrix::zeros(t_len, x.cols());
    for t in 0..t_len {
        let out_row = out.row_mut(t);
        out_row.copy_from_slice(&kernel.bias);
        for k in -half..=half {
            let j = t as i64 + k;
            if j < 0 || j >= t_len as i64 {
                continue;
            }
            let w_row = kernel.weights.row((k + half) as usize);
            for ((o, &w), &v) in out_row.iter_mut().zip(w_row).zip(x.row(j as usize)) {
                *o += w * v;
            }
            opcount::add(x.cols() as u64);
        }
    }
    Ok(out)
}

/// Temporal layout of the conv module's depthwise stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    DynamicChunk,
    Causal,
    Standard,
}

/// Conformer conv module: pointwise to `2D`, GLU gate back to `D`, depthwise
/// over time, SiLU, pointwise out. Only the depthwise stage mixes frames, so
/// it is the only stage that needs masking or streaming state.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvModuleParams<S: Scalar> {
    pub pointwise_in: Dense<S>,
    pub depthwise: DepthwiseKernel<S>,
    pub pointwise_out: Dense<S>,
}

impl<S: Scalar> ConvModuleParams<S> {
    pub fn random(d_model: usize, kernel_width: usize, rng: &mut impl Rng) -> Self {
        ConvModuleParams {
            pointwise_in: Dense::random(2 * d_model, d_model, rng),
            depthwise: DepthwiseKernel::random(kernel_width, d_model, rng),
            pointwise_out: Dense::random(d_model, d_model, rng),
        }
    }

    pub fn param_count(&self) -> usize {
        self.pointwise_in.param_count()
            + self.depthwise.param_count()
            + self.pointwise_out.param_count()
    }

    pub fn cast<T: Scalar>(&self) -> ConvModuleParams<T> {
        ConvModuleParams {
            pointwise_in: self.pointwise_in.cast::<T>(),
            depthwise: self.depthwise.cast::<T>(),
            pointwise_out: self.pointwise_out.cast::<T>(),
        }
    }

    fn gate(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        activations(&self.pointwise_in.forward(x)?, Activation::Glu)
    }

    fn finish(&self, conv_out: &Matrix<S>) -> Result<Matrix<S>> {
        self.pointwise_out.forward(&activations(conv_out, Activation::Silu)?)
    }

    pub fn forward_offline(
        &self,
        x: &Matrix<S>,
        mask: &VisibilityMask,
        mode: ConvMode,
    ) -> Result<Matrix<S>> {
        let gated = self.gate(x)?;
        let mixed = match mode {
            ConvMode::DynamicChunk => dcconv_forward(&gated, mask, &self.depthwise)?,
            ConvMode::Causal => causal_conv_forward(&gated, &self.depthwise)?,
            ConvMode::Standard => standard_conv_forward(&gated, &self.depthwise)?,
        };
        self.finish(&mixed)
    }
}

/// Left-edge buffer of depthwise-input frames carried between chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStreamState<S: Scalar> {
    buffer: VecDeque<Vec<S>>,
    capacity: usize,
}

impl<S: Scalar> ConvStreamState<S> {
    pub fn new(kernel_width: usize, mode: ConvMode) -> Self {
        let capacity = match mode {
            ConvMode::DynamicChunk => (kernel_width - 1) / 2,
            ConvMode::Causal => kernel_width - 1,
            ConvMode::Standard => 0,
        };
        ConvStreamState { buffer: VecDeque::new(), capacity }
    }

    pub fn buffered_frames(&self) -> usize {
        self.buffer.len()
    }

    pub fn state_bytes(&self) -> usize {
        self.buffer.iter().map(|f| f.len() * S::WIDTH).sum()
    }

    fn push_frames(&mut self, gated: &Matrix<S>) {
        for r in 0..gated.rows() {
            self.buffer.push_back(gated.row(r).to_vec());
            if self.buffer.len() > self.capacity {
                self.buffer.pop_front();
            }
        }
        while self.buffer.len() > self.capacity {
            self.buffer.pop_front();
        }
    }
}

impl<S: Scalar> ConvModuleParams<S> {
    /// Streaming step. `base` is the absolute index of the chunk's first
    /// frame (post-subsampling), `chunk_frames`/`left` the chunking the
    /// stream runs under.
    pub fn forward_streaming(
        &self,
        x: &Matrix<S>,
        state: &mut ConvStreamState<S>,
        mode: ConvMode,
        base: usize,
        chunk_frames: usize,
        left: LeftContext,
    ) -> Result<Matrix<S>> {
        let gated = self.gate(x)?;
        let kernel = &self.depthwise;
        kernel.check_odd()?;
        kernel.check_input(&gated)?;
        let len = gated.rows();
        let width = kernel.width() as i64;
        let (lo, hi) = match mode {
            ConvMode::DynamicChunk => (-(kernel.half() as i64), kernel.half() as i64),
            ConvMode::Causal => (-(width - 1), 0),
            ConvMode::Standard => {
                return Err(Error::arg("conv_stream", "standard conv cannot stream"))
            }
        };
        let buffer_start = base - state.buffer.len();

        let mut out = Matrix::zeros(len, gated.cols());
        for t in 0..len {
            let abs = base + t;
            let out_row = out.row_mut(t);
            out_row.copy_from_slice(&kernel.bias);
            for k in lo..=hi {
                let j = abs as i64 + k;
                if j < 0 {
                    continue;
                }
                let j = j as usize;
                let frame: &[S] = if j >= base {
                    if j - base >= len {
                        continue; // inside this chunk's span but not produced (final partial)
                    }
                    gated.row(j - base)
                } else {
                    // earlier chunk: gate on visibility for dynamic-chunk mode
                    if mode == ConvMode::DynamicChunk
                        && !left.contains(abs / chunk_frames, j / chunk_frames)
                    {
                        continue;
                    }
                    debug_assert!(j >= buffer_start, "conv buffer underrun");
                    &state.buffer[j - buffer_start]
                };
                let w_row = kernel.weights.row((k - lo) as usize);
                for ((o, &w), &v) in out_row.iter_mut().zip(w_row).zip(frame) {
                    *o += w * v;
                }
                opcount::add(gated.cols() as u64);
            }
        }
        state.push_frames(&gated);
        self.finish(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::{build_mask, ChunkSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_kernel(taps: &[f64]) -> DepthwiseKernel<f64> {
        DepthwiseKernel::new(
            Matrix::from_vec(taps.len(), 1, taps.to_vec()).unwrap(),
            vec![0.0],
        )
        .unwrap()
    }

    fn ones(t: usize) -> Matrix<f64> {
        Matrix::from_vec(t, 1, vec![1.0; t]).unwrap()
    }

    #[test]
    fn center_tap_identity() {
        let kernel = scalar_kernel(&[0.0, 1.0, 0.0]);
        let x = Matrix::from_vec(4, 1, vec![3.0, -1.0, 2.0, 0.5]).unwrap();
        let mask = build_mask(4, ChunkSpec::FullContext).unwrap();
        let y = dcconv_forward(&x, &mask, &kernel).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn chunk_masked_tap_counts() {
        let kernel = scalar_kernel(&[1.0, 1.0, 1.0]);
        let x = ones(4);
        let m0 = build_mask(4, ChunkSpec::streaming(2, LeftContext::Chunks(0))).unwrap();
        let y0 = dcconv_forward(&x, &m0, &kernel).unwrap();
        assert_eq!(y0.data(), &[2.0, 2.0, 2.0, 2.0]);

        let m1 = build_mask(4, ChunkSpec::streaming(2, LeftContext::Chunks(1))).unwrap();
        let y1 = dcconv_forward(&x, &m1, &kernel).unwrap();
        assert_eq!(y1.data(), &[2.0, 2.0, 3.0, 2.0]);
    }

    #[test]
    fn even_kernel_rejected() {
        let kernel = DepthwiseKernel::new(
            Matrix::from_vec(2, 1, vec![1.0f64, 1.0]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let mask = build_mask(3, ChunkSpec::FullContext).unwrap();
        assert!(matches!(
            dcconv_forward(&ones(3), &mask, &kernel),
            Err(Error::EvenKernel { width: 2 })
        ));
        assert!(causal_conv_forward(&ones(3), &kernel).is_err());
    }

    #[test]
    fn causal_rightmost_tap_identity() {
        let kernel = scalar_kernel(&[0.0, 0.0, 1.0]);
        let x = Matrix::from_vec(4, 1, vec![3.0, -1.0, 2.0, 0.5]).unwrap();
        let y = causal_conv_forward(&x, &kernel).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn causal_left_edge_padding() {
        let kernel = scalar_kernel(&[1.0, 1.0, 1.0]);
        let y = causal_conv_forward(&ones(5), &kernel).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn causal_never_reads_the_future() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let kernel = DepthwiseKernel::<f64>::random(5, 3, &mut rng);
        let data: Vec<f64> = (0..24).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Matrix::from_vec(8, 3, data).unwrap();
        let base = causal_conv_forward(&x, &kernel).unwrap();
        let mut perturbed = x.clone();
        perturbed.set(5, 1, 100.0);
        let out = causal_conv_forward(&perturbed, &kernel).unwrap();
        for t in 0..5 {
            assert_eq!(base.row(t), out.row(t));
        }
    }

    #[test]
    fn dcconv_invisible_taps_change_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let kernel = DepthwiseKernel::<f64>::random(5, 2, &mut rng);
        let t_len = 9;
        let mask = build_mask(t_len, ChunkSpec::streaming(3, LeftContext::Chunks(0))).unwrap();
        let data: Vec<f64> = (0..t_len * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Matrix::from_vec(t_len, 2, data).unwrap();
        let base = dcconv_forward(&x, &mask, &kernel).unwrap();
        let mut perturbed = x.clone();
        perturbed.set(4, 0, 55.0); // middle chunk
        let out = dcconv_forward(&perturbed, &mask, &kernel).unwrap();
        for t in 0..t_len {
            if !mask.bit(t, 4) {
                assert_eq!(base.row(t), out.row(t), "leak into row {t}");
            }
        }
    }

    #[test]
    fn streaming_conv_module_matches_offline() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for &mode in &[ConvMode::DynamicChunk, ConvMode::Causal] {
            for &left in &[LeftContext::Chunks(0), LeftContext::Chunks(1), LeftContext::Infinite] {
                let d = 4;
                let p = ConvModuleParams::<f64>::random(d, 5, &mut rng);
                let t_len = 11;
                let chunk = 3;
                let mask = build_mask(t_len, ChunkSpec::streaming(chunk, left)).unwrap();
                let data: Vec<f64> = (0..t_len * d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let x = Matrix::from_vec(t_len, d, data).unwrap();
                let offline = p.forward_offline(&x, &mask, mode).unwrap();

                let mut state = ConvStreamState::new(5, mode);
                let mut streamed = Matrix::zeros(0, d);
                let mut start = 0;
                while start < t_len {
                    let end = (start + chunk).min(t_len);
                    let out = p
                        .forward_streaming(&x.row_slice(start, end), &mut state, mode, start, chunk, left)
                        .unwrap();
                    streamed = streamed.vstack(&out).unwrap();
                    start = end;
                }
                assert_eq!(streamed.max_abs_diff(&offline), 0.0, "{mode:?} {left:?}");
            }
        }
    }

    #[test]
    fn conv_buffer_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let p = ConvModuleParams::<f32>::random(3, 7, &mut rng);
        let mut state = ConvStreamState::new(7, ConvMode::DynamicChunk);
        for i in 0..6 {
            let data: Vec<f32> = (0..4 * 3).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            let chunk = Matrix::from_vec(4, 3, data).unwrap();
            p.forward_streaming(&chunk, &mut state, ConvMode::DynamicChunk, i * 4, 4, LeftContext::Infinite)
                .unwrap();
            assert!(state.buffered_frames() <= 3);
        }
        assert_eq!(state.buffered_frames(), 3);
    }
}
