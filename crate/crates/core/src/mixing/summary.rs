//! Summary mixing: each frame is transformed locally, the sequence is
//! summarised by the mean of a learned per-frame function, and a combiner
//! fuses the two. The summary costs O(T), which is the whole point; the
//! masked variant averages only over the frames each chunk may see, and the
//! streaming variant keeps that average as a running sum.

use std::collections::VecDeque;

use rand::Rng;

use crate::chunking::{LeftContext, VisibilityMask};
use crate::error::{Error, Result};
use crate::kernel::{activations, opcount, Activation, Dense, Matrix, Scalar};

/// Parameters of one summary-mixing cell: a per-frame local branch, a
/// summary branch whose outputs get averaged over the visible frames, and a
/// combiner applied to the concatenation of both. Branch widths are free;
/// the combiner input must equal local width + summary width.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryMixingParams<S: Scalar> {
    pub local: Dense<S>,
    pub local_activation: Activation,
    pub summary: Dense<S>,
    pub summary_activation: Activation,
    pub combiner: Dense<S>,
    pub combiner_activation: Activation,
}

impl<S: Scalar> SummaryMixingParams<S> {
    pub fn new(
        local: Dense<S>,
        local_activation: Activation,
        summary: Dense<S>,
        summary_activation: Activation,
        combiner: Dense<S>,
        combiner_activation: Activation,
    ) -> Result<Self> {
        if combiner.in_dim() != local.out_dim() + summary.out_dim() {
            return Err(Error::dim(
                "summary_mixing",
                format!(
                    "combiner input {} != local {} + summary {}",
                    combiner.in_dim(),
                    local.out_dim(),
                    summary.out_dim()
                ),
            ));
        }
        if local.in_dim() != summary.in_dim() {
            return Err(Error::dim("summary_mixing", "local/summary input dims differ"));
        }
        Ok(SummaryMixingParams {
            local,
            local_activation,
            summary,
            summary_activation,
            combiner,
            combiner_activation,
        })
    }

    /// Random cell with GeLU on all three branches.
    pub fn random(
        d_in: usize,
        d_local: usize,
        d_summary: usize,
        d_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        SummaryMixingParams {
            local: Dense::random(d_local, d_in, rng),
            local_activation: Activation::Gelu,
            summary: Dense::random(d_summary, d_in, rng),
            summary_activation: Activation::Gelu,
            combiner: Dense::random(d_out, d_local + d_summary, rng),
            combiner_activation: Activation::Gelu,
        }
    }

    /// Identity branches with a concatenating combiner: `h_t` is literally
    /// `(x_t, mean)`. Makes summary values directly observable in tests.
    pub fn linear_probe(dim: usize) -> Self {
        SummaryMixingParams {
            local: Dense::identity(dim),
            local_activation: Activation::Identity,
            summary: Dense::identity(dim),
            summary_activation: Activation::Identity,
            combiner: Dense::identity(2 * dim),
            combiner_activation: Activation::Identity,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.local.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.combiner.out_dim()
    }

    pub fn summary_dim(&self) -> usize {
        self.summary.out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.local.param_count() + self.summary.param_count() + self.combiner.param_count()
    }

    pub fn cast<T: Scalar>(&self) -> SummaryMixingParams<T> {
        SummaryMixingParams {
            local: self.local.cast::<T>(),
            local_activation: self.local_activation,
            summary: self.summary.cast::<T>(),
            summary_activation: self.summary_activation,
            combiner: self.combiner.cast::<T>(),
            combiner_activation: self.combiner_activation,
        }
    }

    fn local_rows(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        activations(&self.local.forward(x)?, self.local_activation)
    }

    fn summary_rows(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        activations(&self.summary.forward(x)?, self.summary_activation)
    }

    /// Combine local rows with one shared summary per row range.
    fn combine(&self, local: &Matrix<S>, summary_per_row: &[Vec<S>]) -> Result<Matrix<S>> {
        debug_assert_eq!(local.rows(), summary_per_row.len());
        let d_sum = self.summary.out_dim();
        let mut joined = Matrix::zeros(local.rows(), local.cols() + d_sum);
        for (r, summary) in summary_per_row.iter().enumerate() {
            let row = joined.row_mut(r);
            row[..local.cols()].copy_from_slice(local.row(r));
            row[local.cols()..].copy_from_slice(summary);
        }
        activations(&self.combiner.forward(&joined)?, self.combiner_activation)
    }
}

/// Running summary over a stream with infinite left context: the sum of the
/// summary branch over every frame seen so far, plus the frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryState<S: Scalar> {
    pub running_sum: Vec<S>,
    pub frame_count: usize,
}

impl<S: Scalar> SummaryState<S> {
    pub fn new(summary_dim: usize) -> Self {
        SummaryState { running_sum: vec![S::ZERO; summary_dim], frame_count: 0 }
    }

    pub fn state_bytes(&self) -> usize {
        self.running_sum.len() * S::WIDTH + std::mem::size_of::<usize>()
    }
}

/// Sum the rows of `m` in row order into one vector.
fn row_sum<S: Scalar>(m: &Matrix<S>) -> Vec<S> {
    let mut acc = vec![S::ZERO; m.cols()];
    for r in 0..m.rows() {
        for (a, &v) in acc.iter_mut().zip(m.row(r)) {
            *a += v;
        }
    }
    opcount::add((m.rows() * m.cols()) as u64);
    acc
}

fn add_into<S: Scalar>(acc: &mut [S], v: &[S]) {
    for (a, &b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn scaled<S: Scalar>(v: &[S], inv: S) -> Vec<S> {
    v.iter().map(|&x| x * inv).collect()
}

/// Whole-utterance summary mixing: one global mean feeds every frame.
pub fn summary_mixing_offline<S: Scalar>(
    x: &Matrix<S>,
    p: &SummaryMixingParams<S>,
) -> Result<Matrix<S>> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("summary_mixing_offline"));
    }
    let local = p.local_rows(x)?;
    let summary = p.summary_rows(x)?;
    let total = row_sum(&summary);
    let mean = scaled(&total, S::ONE / S::from_f64(x.rows() as f64));
    let per_row = vec![mean; x.rows()];
    p.combine(&local, &per_row)
}

/// Masked summary mixing: each frame averages the summary branch over
/// exactly the frames its mask row allows. Exploits the block structure of
/// the mask (per-chunk partial sums), so the infinite-left-context case runs
/// in O(T) rather than O(T^2).
pub fn summary_mixing_masked<S: Scalar>(
    x: &Matrix<S>,
    mask: &VisibilityMask,
    p: &SummaryMixingParams<S>,
) -> Result<Matrix<S>> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("summary_mixing_masked"));
    }
    if mask.t() != x.rows() {
        return Err(Error::dim(
            "summary_mixing_masked",
            format!("mask T {} vs rows {}", mask.t(), x.rows()),
        ));
    }
    let local = p.local_rows(x)?;
    let summary = p.summary_rows(x)?;

    let n_chunks = mask.num_chunks();
    let mut partials: Vec<(Vec<S>, usize)> = Vec::with_capacity(n_chunks);
    for chunk in 0..n_chunks {
        let (start, end) = (mask.chunk_start(chunk), mask.chunk_end(chunk));
        partials.push((row_sum(&summary.row_slice(start, end)), end - start));
    }

    // One summary per chunk. Both the prefix (infinite) and window (finite)
    // accumulations add chunk partials in ascending order, matching the
    // streaming path bit for bit.
    let mut per_chunk_mean: Vec<Vec<S>> = Vec::with_capacity(n_chunks);
    match mask.left_context() {
        LeftContext::Infinite => {
            let mut acc = vec![S::ZERO; p.summary_dim()];
            let mut count = 0usize;
            for (partial, c) in &partials {
                add_into(&mut acc, partial);
                count += c;
                per_chunk_mean.push(scaled(&acc, S::ONE / S::from_f64(count as f64)));
            }
        }
        LeftContext::Chunks(l) => {
            for chunk in 0..n_chunks {
                let first = chunk.saturating_sub(l);
                let mut acc = vec![S::ZERO; p.summary_dim()];
                let mut count = 0usize;
                for (partial, c) in &partials[first..=chunk] {
                    add_into(&mut acc, partial);
                    count += c;
                }
                per_chunk_mean.push(scaled(&acc, S::ONE / S::from_f64(count as f64)));
            }
        }
    }

    let mut per_row: Vec<Vec<S>> = Vec::with_capacity(x.rows());
    for t in 0..x.rows() {
        per_row.push(per_chunk_mean[mask.chunk_of(t)].clone());
    }
    p.combine(&local, &per_row)
}

/// One streaming step with infinite left context: fold a chunk into the
/// running summary state and emit outputs for the chunk. Every frame of the
/// chunk shares the summary taken at the chunk's end.
pub fn summary_mixing_step<S: Scalar>(
    chunk: &Matrix<S>,
    state: &SummaryState<S>,
    p: &SummaryMixingParams<S>,
) -> Result<(Matrix<S>, SummaryState<S>)> {
    if chunk.rows() == 0 {
        return Err(Error::EmptyInput("summary_mixing_step"));
    }
    if state.running_sum.len() != p.summary_dim() {
        return Err(Error::dim(
            "summary_mixing_step",
            format!("state dim {} vs summary dim {}", state.running_sum.len(), p.summary_dim()),
        ));
    }
    let local = p.local_rows(chunk)?;
    let summary = p.summary_rows(chunk)?;
    let partial = row_sum(&summary);

    let mut next = state.clone();
    add_into(&mut next.running_sum, &partial);
    next.frame_count += chunk.rows();

    let mean = scaled(&next.running_sum, S::ONE / S::from_f64(next.frame_count as f64));
    let per_row = vec![mean; chunk.rows()];
    let out = p.combine(&local, &per_row)?;
    Ok((out, next))
}

/// Streaming summary accumulator that also handles finite left context by
/// keeping one partial sum per live chunk; eviction simply drops the oldest
/// partial, so no subtraction error accumulates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkedSummaryState<S: Scalar> {
    left: LeftContext,
    /// Running sum for the infinite case.
    running: SummaryState<S>,
    /// Per-chunk partials for the finite case, oldest first.
    ring: VecDeque<(Vec<S>, usize)>,
    summary_dim: usize,
}

impl<S: Scalar> ChunkedSummaryState<S> {
    pub fn new(summary_dim: usize, left: LeftContext) -> Self {
        ChunkedSummaryState {
            left,
            running: SummaryState::new(summary_dim),
            ring: VecDeque::new(),
            summary_dim,
        }
    }

    /// Fold the next chunk's summary partial in and return the mean every
    /// frame of that chunk should use.
    pub fn push_chunk(&mut self, partial: Vec<S>, frames: usize) -> Vec<S> {
        match self.left {
            LeftContext::Infinite => {
                add_into(&mut self.running.running_sum, &partial);
                self.running.frame_count += frames;
                scaled(
                    &self.running.running_sum,
                    S::ONE / S::from_f64(self.running.frame_count as f64),
                )
            }
            LeftContext::Chunks(l) => {
                self.ring.push_back((partial, frames));
                while self.ring.len() > l + 1 {
                    self.ring.pop_front();
                }
                let mut acc = vec![S::ZERO; self.summary_dim];
                let mut count = 0usize;
                for (p, c) in &self.ring {
                    add_into(&mut acc, p);
                    count += c;
                }
                scaled(&acc, S::ONE / S::from_f64(count as f64))
            }
        }
    }

    pub fn frames_live(&self) -> usize {
        match self.left {
            LeftContext::Infinite => self.running.frame_count,
            LeftContext::Chunks(_) => self.ring.iter().map(|(_, c)| c).sum(),
        }
    }

    pub fn state_bytes(&self) -> usize {
        let ring_bytes: usize = self
            .ring
            .iter()
            .map(|(p, _)| p.len() * S::WIDTH + std::mem::size_of::<usize>())
            .sum();
        self.running.state_bytes() + ring_bytes
    }
}

/// Streaming step driven by a [`ChunkedSummaryState`]; used per encoder block.
pub fn summary_mixing_chunk_step<S: Scalar>(
    chunk: &Matrix<S>,
    state: &mut ChunkedSummaryState<S>,
    p: &SummaryMixingParams<S>,
) -> Result<Matrix<S>> {
    if chunk.rows() == 0 {
        return Err(Error::EmptyInput("summary_mixing_chunk_step"));
    }
    let local = p.local_rows(chunk)?;
    let summary = p.summary_rows(chunk)?;
    let partial = row_sum(&summary);
    let mean = state.push_chunk(partial, chunk.rows());
    let per_row = vec![mean; chunk.rows()];
    p.combine(&local, &per_row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::{build_mask, ChunkSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn col(x: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(x.len(), 1, x.to_vec()).unwrap()
    }

    /// Direct per-(t,u) evaluation of the masked cell; the quadratic oracle
    /// the linear implementation is checked against.
    fn masked_reference<S: Scalar>(
        x: &Matrix<S>,
        mask: &VisibilityMask,
        p: &SummaryMixingParams<S>,
    ) -> Matrix<S> {
        let local = activations(&p.local.forward(x).unwrap(), p.local_activation).unwrap();
        let summary = activations(&p.summary.forward(x).unwrap(), p.summary_activation).unwrap();
        let mut per_row = Vec::with_capacity(x.rows());
        for t in 0..x.rows() {
            let mut acc = vec![S::ZERO; p.summary_dim()];
            let mut count = 0usize;
            for u in 0..x.rows() {
                if mask.bit(t, u) {
                    for (a, &v) in acc.iter_mut().zip(summary.row(u)) {
                        *a += v;
                    }
                    count += 1;
                }
            }
            let inv = S::ONE / S::from_f64(count as f64);
            per_row.push(acc.iter().map(|&v| v * inv).collect::<Vec<_>>());
        }
        p.combine(&local, &per_row).unwrap()
    }

    #[test]
    fn single_frame_uses_its_own_summary() {
        let p = SummaryMixingParams::<f64>::linear_probe(1);
        let x = col(&[4.0]);
        let h = summary_mixing_offline(&x, &p).unwrap();
        assert_eq!(h.row(0), &[4.0, 4.0]);
    }

    #[test]
    fn probe_exposes_global_mean() {
        let p = SummaryMixingParams::<f64>::linear_probe(1);
        let x = col(&[1.0, 3.0]);
        let h = summary_mixing_offline(&x, &p).unwrap();
        assert_eq!(h.row(0), &[1.0, 2.0]);
        assert_eq!(h.row(1), &[3.0, 2.0]);
    }

    #[test]
    fn permuting_rows_leaves_summary_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = SummaryMixingParams::<f64>::random(3, 4, 5, 2, &mut rng);
        let x = Matrix::from_vec(4, 3, (0..12).map(|i| (i as f64) * 0.37 - 1.0).collect()).unwrap();
        let mut permuted_rows: Vec<Vec<f64>> = (0..4).map(|r| x.row(r).to_vec()).collect();
        permuted_rows.swap(0, 3);
        permuted_rows.swap(1, 2);
        let xp = Matrix::from_rows(&permuted_rows).unwrap();
        let h = summary_mixing_offline(&x, &p).unwrap();
        let hp = summary_mixing_offline(&xp, &p).unwrap();
        // row 0 of the permuted input is row 3 of the original
        for (a, b) in h.row(3).iter().zip(hp.row(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_input_errors() {
        let p = SummaryMixingParams::<f64>::linear_probe(1);
        let x = Matrix::<f64>::zeros(0, 1);
        assert!(summary_mixing_offline(&x, &p).is_err());
    }

    #[test]
    fn masked_chunk_means_match_hand_values() {
        let p = SummaryMixingParams::<f64>::linear_probe(1);
        let x = col(&[1.0, 2.0, 3.0, 4.0]);
        let m0 = build_mask(4, ChunkSpec::streaming(2, LeftContext::Chunks(0))).unwrap();
        let h0 = summary_mixing_masked(&x, &m0, &p).unwrap();
        let sbar0: Vec<f64> = (0..4).map(|t| h0.get(t, 1)).collect();
        assert_eq!(sbar0, vec![1.5, 1.5, 3.5, 3.5]);

        let mi = build_mask(4, ChunkSpec::streaming(2, LeftContext::Infinite)).unwrap();
        let hi = summary_mixing_masked(&x, &mi, &p).unwrap();
        let sbari: Vec<f64> = (0..4).map(|t| hi.get(t, 1)).collect();
        assert_eq!(sbari, vec![1.5, 1.5, 2.5, 2.5]);
    }

    #[test]
    fn full_mask_reduces_to_offline() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = SummaryMixingParams::<f64>::random(2, 3, 3, 2, &mut rng);
        let x = Matrix::from_vec(6, 2, (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let mask = build_mask(6, ChunkSpec::FullContext).unwrap();
        let a = summary_mixing_masked(&x, &mask, &p).unwrap();
        let b = summary_mixing_offline(&x, &p).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-6);
    }

    #[test]
    fn step_accumulates_running_sums() {
        let p = SummaryMixingParams::<f64>::linear_probe(1);
        let s0 = SummaryState::new(1);
        let (_, s1) = summary_mixing_step(&col(&[1.0, 2.0]), &s0, &p).unwrap();
        assert_eq!(s1.running_sum, vec![3.0]);
        assert_eq!(s1.frame_count, 2);
        let (out2, s2) = summary_mixing_step(&col(&[3.0, 4.0]), &s1, &p).unwrap();
        assert_eq!(s2.running_sum, vec![10.0]);
        assert_eq!(s2.frame_count, 4);
        assert_eq!(out2.get(0, 1), 2.5);
        assert_eq!(out2.get(1, 1), 2.5);
    }

    #[test]
    fn one_step_covering_everything_equals_offline() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = SummaryMixingParams::<f64>::random(3, 2, 4, 3, &mut rng);
        let x = Matrix::from_vec(5, 3, (0..15).map(|i| (i as f64) * 0.11 - 0.7).collect()).unwrap();
        let (out, state) = summary_mixing_step(&x, &SummaryState::new(4), &p).unwrap();
        assert_eq!(state.frame_count, 5);
        let offline = summary_mixing_offline(&x, &p).unwrap();
        assert!(out.max_abs_diff(&offline) < 1e-12);
    }

    #[test]
    fn streamed_chunks_equal_masked_infinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for &(t_len, chunk) in &[(8usize, 2usize), (9, 4), (12, 5), (7, 7)] {
            let p = SummaryMixingParams::<f64>::random(3, 4, 4, 3, &mut rng);
            let data: Vec<f64> = (0..t_len * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = Matrix::from_vec(t_len, 3, data).unwrap();
            let mask = build_mask(t_len, ChunkSpec::streaming(chunk, LeftContext::Infinite)).unwrap();
            let batch = summary_mixing_masked(&x, &mask, &p).unwrap();

            let mut state = SummaryState::new(4);
            let mut streamed = Matrix::zeros(0, 3);
            let mut start = 0;
            while start < t_len {
                let end = (start + chunk).min(t_len);
                let (out, next) = summary_mixing_step(&x.row_slice(start, end), &state, &p).unwrap();
                state = next;
                streamed = streamed.vstack(&out).unwrap();
                start = end;
            }
            assert!(streamed.max_abs_diff(&batch) < 1e-10);
        }
    }

    #[test]
    fn equivalence_chain_masked_vs_reference_and_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for trial in 0..40 {
            let t_len: usize = rng.random_range(1..=48);
            let chunk = rng.random_range(1..=t_len);
            let left = match trial % 3 {
                0 => LeftContext::Infinite,
                1 => LeftContext::Chunks(0),
                _ => LeftContext::Chunks(rng.random_range(0..=t_len.div_ceil(chunk))),
            };
            let p64 = SummaryMixingParams::<f64>::random(4, 5, 3, 4, &mut rng);
            let data: Vec<f64> = (0..t_len * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x64 = Matrix::from_vec(t_len, 4, data).unwrap();
            let mask = build_mask(t_len, ChunkSpec::streaming(chunk, left)).unwrap();

            let fast = summary_mixing_masked(&x64, &mask, &p64).unwrap();
            let slow = masked_reference(&x64, &mask, &p64);
            assert!(fast.max_abs_diff(&slow) < 1e-10, "f64 trial {trial}");

            // same check at f32 width
            let p32 = p64.cast::<f32>();
            let x32 = x64.cast::<f32>();
            let fast32 = summary_mixing_masked(&x32, &mask, &p32).unwrap();
            let slow32 = masked_reference(&x32, &mask, &p32);
            assert!(fast32.max_abs_diff(&slow32) < 1e-5, "f32 trial {trial}");
        }
    }

    #[test]
    fn chunked_state_matches_masked_for_finite_left() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for &left in &[LeftContext::Chunks(0), LeftContext::Chunks(1), LeftContext::Chunks(2), LeftContext::Infinite] {
            let p = SummaryMixingParams::<f64>::random(2, 3, 3, 2, &mut rng);
            let t_len = 11;
            let chunk = 3;
            let data: Vec<f64> = (0..t_len * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = Matrix::from_vec(t_len, 2, data).unwrap();
            let mask = build_mask(t_len, ChunkSpec::streaming(chunk, left)).unwrap();
            let batch = summary_mixing_masked(&x, &mask, &p).unwrap();

            let mut state = ChunkedSummaryState::new(3, left);
            let mut streamed = Matrix::zeros(0, 2);
            let mut start = 0;
            while start < t_len {
                let end = (start + chunk).min(t_len);
                let out = summary_mixing_chunk_step(&x.row_slice(start, end), &mut state, &p).unwrap();
                streamed = streamed.vstack(&out).unwrap();
                start = end;
            }
            assert_eq!(streamed.max_abs_diff(&batch), 0.0, "left {left:?}");
        }
    }

    #[test]
    fn invisible_perturbations_change_nothing_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let p = SummaryMixingParams::<f32>::random(3, 4, 4, 3, &mut rng);
        let t_len = 12;
        let mask = build_mask(t_len, ChunkSpec::streaming(3, LeftContext::Chunks(1))).unwrap();
        let data: Vec<f32> = (0..t_len * 3).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let x = Matrix::from_vec(t_len, 3, data).unwrap();
        let base = summary_mixing_masked(&x, &mask, &p).unwrap();

        let victim = 10; // late frame: early rows cannot see it
        let mut perturbed = x.clone();
        perturbed.set(victim, 1, 37.5);
        let out = summary_mixing_masked(&perturbed, &mask, &p).unwrap();
        for t in 0..t_len {
            if !mask.bit(t, victim) {
                assert_eq!(base.row(t), out.row(t), "row {t} changed");
            }
        }
    }

    #[test]
    fn running_sum_tracks_compensated_oracle() {
        // 1e5 unit-scale frames; the plain running sum must stay within
        // 1e-3 relative of Kahan summation at f32.
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 100_000;
        let mut state = SummaryState::<f32>::new(1);
        let mut kahan_sum = 0.0f32;
        let mut kahan_c = 0.0f32;
        for _ in 0..n {
            let v: f32 = rng.random_range(-1.0..1.0) + 0.5; // nonzero mean so the sum grows
            state.running_sum[0] += v;
            state.frame_count += 1;
            let y = v - kahan_c;
            let t = kahan_sum + y;
            kahan_c = (t - kahan_sum) - y;
            kahan_sum = t;
        }
        let rel = ((state.running_sum[0] - kahan_sum) / kahan_sum).abs();
        assert!(rel < 1e-3, "relative drift {rel}");
    }
}
