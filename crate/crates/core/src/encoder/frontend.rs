//! Subsampling frontend: a per-frame input projection followed by
//! `log2(factor)` causal depthwise stride-2 layers. Causal taps keep the
//! streaming path exactly equal to the offline one; each layer halves the
//! frame rate with `floor(T/2)` semantics.

use std::collections::VecDeque;

use rand::Rng;

use crate::encoder::conv::DepthwiseKernel;
use crate::error::{Error, Result};
use crate::kernel::{opcount, Dense, Matrix, Scalar};

const STRIDE: usize = 2;
const TAPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct FrontendParams<S: Scalar> {
    /// Per-frame projection `input_dim -> d_model`.
    pub proj: Dense<S>,
    /// One stride-2 causal depthwise kernel (3 taps) per halving.
    pub sub_layers: Vec<DepthwiseKernel<S>>,
}

impl<S: Scalar> FrontendParams<S> {
    pub fn random(input_dim: usize, d_model: usize, halvings: usize, rng: &mut impl Rng) -> Self {
        FrontendParams {
            proj: Dense::random(d_model, input_dim, rng),
            sub_layers: (0..halvings).map(|_| DepthwiseKernel::random(TAPS, d_model, rng)).collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.proj.param_count() + self.sub_layers.iter().map(|k| k.param_count()).sum::<usize>()
    }

    pub fn factor(&self) -> usize {
        1 << self.sub_layers.len()
    }

    pub fn cast<T: Scalar>(&self) -> FrontendParams<T> {
        FrontendParams {
            proj: self.proj.cast::<T>(),
            sub_layers: self.sub_layers.iter().map(|k| k.cast::<T>()).collect(),
        }
    }
}

/// Output `j` of a stride-2 layer reads inputs `2j-1, 2j, 2j+1` (zero-padded
/// below zero) — the rightmost tap is the newest frame, so no future input
/// is ever needed.
fn strided_tap<S: Scalar>(
    kernel: &DepthwiseKernel<S>,
    fetch: impl Fn(i64) -> Option<Vec<S>>,
    j: usize,
) -> Vec<S> {
    let d = kernel.channels();
    let mut acc = kernel.bias.clone();
    for k in 0..TAPS {
        let idx = (STRIDE * j) as i64 - 1 + k as i64;
        if let Some(frame) = fetch(idx) {
            let w_row = kernel.weights.row(k);
            for ((a, &w), &v) in acc.iter_mut().zip(w_row).zip(&frame) {
                *a += w * v;
            }
        }
    }
    opcount::add((TAPS * d) as u64);
    for v in &mut acc {
        let x = *v;
        *v = x * (S::ONE / (S::ONE + (-x).exp()));
    }
    acc
}

fn strided_layer_offline<S: Scalar>(x: &Matrix<S>, kernel: &DepthwiseKernel<S>) -> Matrix<S> {
    let out_len = x.rows() / STRIDE;
    let mut rows = Vec::with_capacity(out_len);
    for j in 0..out_len {
        rows.push(strided_tap(
            kernel,
            |idx| {
                if idx < 0 || idx >= x.rows() as i64 {
                    None
                } else {
                    Some(x.row(idx as usize).to_vec())
                }
            },
            j,
        ));
    }
    if rows.is_empty() {
        Matrix::zeros(0, kernel.channels())
    } else {
        Matrix::from_rows(&rows).unwrap()
    }
}

pub fn frontend_offline<S: Scalar>(x: &Matrix<S>, p: &FrontendParams<S>) -> Result<Matrix<S>> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("frontend"));
    }
    let mut y = p.proj.forward(x)?;
    for kernel in &p.sub_layers {
        y = strided_layer_offline(&y, kernel);
    }
    Ok(y)
}

/// Streaming state of one stride-2 layer: unconsumed input frames plus the
/// single lookback frame the next output still needs.
#[derive(Debug, Clone, PartialEq)]
struct StridedLayerState<S: Scalar> {
    hist: VecDeque<Vec<S>>,
    hist_base: usize,
    total_in: usize,
    produced: usize,
}

impl<S: Scalar> StridedLayerState<S> {
    fn new() -> Self {
        StridedLayerState { hist: VecDeque::new(), hist_base: 0, total_in: 0, produced: 0 }
    }

    fn push(&mut self, frames: Vec<Vec<S>>, kernel: &DepthwiseKernel<S>) -> Vec<Vec<S>> {
        for f in frames {
            self.hist.push_back(f);
            self.total_in += 1;
        }
        let mut out = Vec::new();
        while STRIDE * self.produced + 1 < self.total_in {
            let j = self.produced;
            out.push(strided_tap(
                kernel,
                |idx| {
                    if idx < self.hist_base as i64 {
                        None
                    } else {
                        Some(self.hist[(idx as usize) - self.hist_base].clone())
                    }
                },
                j,
            ));
            self.produced += 1;
            let needed_from = (STRIDE * self.produced).saturating_sub(1);
            while self.hist_base < needed_from {
                self.hist.pop_front();
                self.hist_base += 1;
            }
        }
        out
    }

    fn state_bytes(&self) -> usize {
        self.hist.iter().map(|f| f.len() * S::WIDTH).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontendState<S: Scalar> {
    layers: Vec<StridedLayerState<S>>,
}

impl<S: Scalar> FrontendState<S> {
    pub fn new(halvings: usize) -> Self {
        FrontendState { layers: (0..halvings).map(|_| StridedLayerState::new()).collect() }
    }

    pub fn state_bytes(&self) -> usize {
        self.layers.iter().map(|l| l.state_bytes()).sum()
    }
}

/// Push raw frames through the frontend, returning whatever post-subsampling
/// frames become available (possibly none for very short chunks).
pub fn frontend_stream<S: Scalar>(
    chunk: &Matrix<S>,
    state: &mut FrontendState<S>,
    p: &FrontendParams<S>,
) -> Result<Matrix<S>> {
    if chunk.rows() == 0 {
        return Err(Error::EmptyInput("frontend"));
    }
    let projected = p.proj.forward(chunk)?;
    let mut frames: Vec<Vec<S>> = (0..projected.rows()).map(|r| projected.row(r).to_vec()).collect();
    for (layer_state, kernel) in state.layers.iter_mut().zip(&p.sub_layers) {
        frames = layer_state.push(frames, kernel);
        if frames.is_empty() {
            break;
        }
    }
    if frames.is_empty() {
        Ok(Matrix::zeros(0, p.proj.out_dim()))
    } else {
        Matrix::from_rows(&frames)
    }
}
