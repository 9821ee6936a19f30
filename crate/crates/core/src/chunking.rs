//! Chunked visibility structure for dynamic chunk training and streaming.
//!
//! A sequence of `T` frames is cut into chunks of `C` frames. Frame `t` may
//! see frame `u` exactly when `u`'s chunk is no later than `t`'s chunk and at
//! most `L` chunks earlier. Within a chunk every frame sees every other,
//! including within-chunk future frames; with infinite left context the mask
//! only ever grows as time proceeds.

use rand::Rng;

use crate::error::{Error, Result};

/// How many whole chunks of history a frame may see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeftContext {
    Chunks(usize),
    Infinite,
}

impl LeftContext {
    pub fn contains(self, current_chunk: usize, other_chunk: usize) -> bool {
        match self {
            LeftContext::Infinite => other_chunk <= current_chunk,
            LeftContext::Chunks(l) => {
                other_chunk <= current_chunk && current_chunk - other_chunk <= l
            }
        }
    }
}

impl std::fmt::Display for LeftContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LeftContext::Infinite => write!(f, "infinite"),
            LeftContext::Chunks(l) => write!(f, "{l}"),
        }
    }
}

/// Chunking configuration for one utterance (or one batch; the whole batch
/// shares a single spec).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChunkSpec {
    /// Whole-utterance processing; equivalent to `chunk_frames == T`.
    FullContext,
    Streaming { chunk_frames: usize, left_context: LeftContext },
}

impl ChunkSpec {
    pub fn streaming(chunk_frames: usize, left_context: LeftContext) -> Self {
        ChunkSpec::Streaming { chunk_frames, left_context }
    }

    pub fn is_streaming(&self) -> bool {
        matches!(self, ChunkSpec::Streaming { .. })
    }
}

/// The `T x T` visibility structure derived from a [`ChunkSpec`].
///
/// Bits are block-structured, so they are stored implicitly as chunk
/// arithmetic; [`VisibilityMask::bit`] answers membership in O(1) and
/// [`VisibilityMask::to_grid`] materializes the 0/1 grid for debugging and
/// golden tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMask {
    t: usize,
    chunk_frames: usize,
    left: LeftContext,
    spec: ChunkSpec,
}

impl VisibilityMask {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn spec(&self) -> ChunkSpec {
        self.spec
    }

    pub fn chunk_frames(&self) -> usize {
        self.chunk_frames
    }

    pub fn left_context(&self) -> LeftContext {
        self.left
    }

    pub fn num_chunks(&self) -> usize {
        self.t.div_ceil(self.chunk_frames)
    }

    pub fn chunk_of(&self, frame: usize) -> usize {
        frame / self.chunk_frames
    }

    /// First frame of `chunk`.
    pub fn chunk_start(&self, chunk: usize) -> usize {
        chunk * self.chunk_frames
    }

    /// One past the last frame of `chunk`, clamped to `T`.
    pub fn chunk_end(&self, chunk: usize) -> usize {
        ((chunk + 1) * self.chunk_frames).min(self.t)
    }

    /// `m[t][u]`: may frame `t` use frame `u`?
    #[inline]
    pub fn bit(&self, t: usize, u: usize) -> bool {
        debug_assert!(t < self.t && u < self.t);
        self.left.contains(t / self.chunk_frames, u / self.chunk_frames)
    }

    /// Visible frames of row `t` as the half-open range `[start, end)`.
    /// Rows of a block mask are always contiguous.
    pub fn visible_range(&self, t: usize) -> (usize, usize) {
        let chunk = self.chunk_of(t);
        let first_chunk = match self.left {
            LeftContext::Infinite => 0,
            LeftContext::Chunks(l) => chunk.saturating_sub(l),
        };
        (self.chunk_start(first_chunk), self.chunk_end(chunk))
    }

    /// Debug text grid: one line per row, '1' for visible.
    pub fn to_grid(&self) -> String {
        let mut out = String::with_capacity(self.t * (self.t + 1));
        for t in 0..self.t {
            for u in 0..self.t {
                out.push(if self.bit(t, u) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

/// Build the visibility mask for `t_len` frames under `spec`.
pub fn build_mask(t_len: usize, spec: ChunkSpec) -> Result<VisibilityMask> {
    if t_len < 1 {
        return Err(Error::arg("build_mask", "T must be at least 1"));
    }
    let (chunk_frames, left) = match spec {
        ChunkSpec::FullContext => (t_len, LeftContext::Infinite),
        ChunkSpec::Streaming { chunk_frames, left_context } => {
            if chunk_frames < 1 {
                return Err(Error::arg("build_mask", "chunk size must be at least 1"));
            }
            (chunk_frames, left_context)
        }
    };
    Ok(VisibilityMask { t: t_len, chunk_frames, left, spec })
}

/// Number of frames visible to frame `t` (always >= 1).
pub fn visible_frame_count(mask: &VisibilityMask, t: usize) -> Result<usize> {
    if t >= mask.t() {
        return Err(Error::IndexOutOfRange { index: t, len: mask.t() });
    }
    let (start, end) = mask.visible_range(t);
    Ok(end - start)
}

/// Sampling schedule for dynamic chunk training.
#[derive(Debug, Clone, PartialEq)]
pub struct DctSchedule {
    /// Probability of drawing a streaming (chunked) spec rather than full context.
    pub streaming_probability: f64,
    /// Chunk size range in milliseconds, inclusive.
    pub chunk_range_ms: (f64, f64),
    /// Left-context range in milliseconds, inclusive.
    pub left_context_range_ms: (f64, f64),
    pub frame_shift_ms: f64,
}

impl Default for DctSchedule {
    fn default() -> Self {
        DctSchedule {
            streaming_probability: 0.6,
            chunk_range_ms: (320.0, 1280.0),
            left_context_range_ms: (320.0, 1280.0),
            frame_shift_ms: 10.0,
        }
    }
}

impl DctSchedule {
    fn validate(&self) -> Result<()> {
        let ok_range = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo;
        if !(0.0..=1.0).contains(&self.streaming_probability)
            || !ok_range(self.chunk_range_ms)
            || !ok_range(self.left_context_range_ms)
            || self.frame_shift_ms <= 0.0
        {
            return Err(Error::arg("dct_schedule", format!("{self:?}")));
        }
        Ok(())
    }
}

/// Convert a duration in milliseconds to whole frames, flooring and clamping
/// to at least one frame.
pub fn ms_to_frames(ms: f64, frame_shift_ms: f64) -> Result<usize> {
    if ms <= 0.0 || frame_shift_ms <= 0.0 {
        return Err(Error::arg("ms_to_frames", "durations must be positive"));
    }
    Ok(((ms / frame_shift_ms).floor() as usize).max(1))
}

/// Draw one chunk spec for a `t_len`-frame batch. With probability
/// `1 - streaming_probability` the batch trains full-context; otherwise the
/// chunk size is drawn uniformly from the chunk range (clamped to `[1, T]`)
/// and the left context from its range, converted to whole chunks.
pub fn sample_chunk_spec(t_len: usize, sched: &DctSchedule, rng: &mut impl Rng) -> Result<ChunkSpec> {
    if t_len < 1 {
        return Err(Error::arg("sample_chunk_spec", "T must be at least 1"));
    }
    sched.validate()?;
    if rng.random::<f64>() >= sched.streaming_probability {
        return Ok(ChunkSpec::FullContext);
    }
    let chunk_ms = rng.random_range(sched.chunk_range_ms.0..=sched.chunk_range_ms.1);
    let chunk_frames = ms_to_frames(chunk_ms, sched.frame_shift_ms)?.min(t_len);
    let left_ms = rng.random_range(sched.left_context_range_ms.0..=sched.left_context_range_ms.1);
    let left_frames = ms_to_frames(left_ms, sched.frame_shift_ms)?;
    let left_chunks = left_frames.div_ceil(chunk_frames);
    Ok(ChunkSpec::Streaming {
        chunk_frames,
        left_context: LeftContext::Chunks(left_chunks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation of the chunk-index condition, used as the oracle:
    /// frame t sees frame u iff u's chunk is within [t's chunk - L, t's chunk].
    fn oracle_bit(t: usize, u: usize, c: usize, left: LeftContext) -> bool {
        let (ct, cu) = (t / c, u / c);
        match left {
            LeftContext::Infinite => cu <= ct,
            LeftContext::Chunks(l) => cu <= ct && ct as i64 - l as i64 <= cu as i64,
        }
    }

    fn grid(mask: &VisibilityMask) -> Vec<String> {
        mask.to_grid().lines().map(|s| s.to_string()).collect()
    }

    #[test]
    fn full_chunk_mask_is_all_ones() {
        let m = build_mask(4, ChunkSpec::streaming(4, LeftContext::Chunks(0))).unwrap();
        assert_eq!(grid(&m), vec!["1111"; 4]);
        let f = build_mask(4, ChunkSpec::FullContext).unwrap();
        assert_eq!(f.to_grid(), m.to_grid());
    }

    #[test]
    fn block_diagonal_mask() {
        let m = build_mask(4, ChunkSpec::streaming(2, LeftContext::Chunks(0))).unwrap();
        assert_eq!(grid(&m), vec!["1100", "1100", "0011", "0011"]);
    }

    #[test]
    fn one_chunk_left_context() {
        let m = build_mask(6, ChunkSpec::streaming(2, LeftContext::Chunks(1))).unwrap();
        assert_eq!(grid(&m), vec!["110000", "110000", "111100", "111100", "001111", "001111"]);
    }

    #[test]
    fn infinite_left_context_is_block_lower_triangular() {
        let m = build_mask(6, ChunkSpec::streaming(2, LeftContext::Infinite)).unwrap();
        assert_eq!(grid(&m)[4], "111111");
        assert_eq!(grid(&m)[5], "111111");
        assert_eq!(grid(&m)[0], "110000");
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(build_mask(0, ChunkSpec::FullContext).is_err());
        assert!(build_mask(4, ChunkSpec::streaming(0, LeftContext::Infinite)).is_err());
    }

    #[test]
    fn visible_counts_match_hand_masks() {
        let m = build_mask(4, ChunkSpec::streaming(2, LeftContext::Chunks(0))).unwrap();
        assert_eq!(visible_frame_count(&m, 3).unwrap(), 2);
        let m = build_mask(6, ChunkSpec::streaming(2, LeftContext::Chunks(1))).unwrap();
        assert_eq!(visible_frame_count(&m, 2).unwrap(), 4);
        let f = build_mask(5, ChunkSpec::FullContext).unwrap();
        for t in 0..5 {
            assert_eq!(visible_frame_count(&f, t).unwrap(), 5);
        }
        assert!(visible_frame_count(&f, 5).is_err());
    }

    #[test]
    fn visible_count_row_sum_agrees() {
        for t_len in [1usize, 3, 8, 13] {
            for c in 1..=t_len {
                for l in 0..=t_len.div_ceil(c) {
                    let m = build_mask(t_len, ChunkSpec::streaming(c, LeftContext::Chunks(l))).unwrap();
                    for t in 0..t_len {
                        let by_sum = (0..t_len).filter(|&u| m.bit(t, u)).count();
                        assert_eq!(visible_frame_count(&m, t).unwrap(), by_sum);
                        assert!(by_sum > t % c);
                    }
                }
            }
        }
    }

    #[test]
    fn ms_conversion() {
        assert_eq!(ms_to_frames(320.0, 10.0).unwrap(), 32);
        assert_eq!(ms_to_frames(10.0, 10.0).unwrap(), 1);
        assert_eq!(ms_to_frames(5.0, 10.0).unwrap(), 1);
        assert!(ms_to_frames(0.0, 10.0).is_err());
        assert!(ms_to_frames(10.0, -1.0).is_err());
    }

    #[test]
    fn zero_probability_always_full_context() {
        let sched = DctSchedule { streaming_probability: 0.0, ..DctSchedule::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_chunk_spec(200, &sched, &mut rng).unwrap(), ChunkSpec::FullContext);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let sched = DctSchedule::default();
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            assert_eq!(
                sample_chunk_spec(500, &sched, &mut a).unwrap(),
                sample_chunk_spec(500, &sched, &mut b).unwrap()
            );
        }
    }

    #[test]
    fn streaming_fraction_tracks_probability() {
        let sched = DctSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 10_000;
        let streaming = (0..draws)
            .filter(|_| sample_chunk_spec(500, &sched, &mut rng).unwrap().is_streaming())
            .count();
        let fraction = streaming as f64 / draws as f64;
        assert!((fraction - 0.6).abs() < 0.02, "fraction {fraction}");
    }

    #[test]
    fn sampled_specs_respect_ranges() {
        let sched = DctSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            if let ChunkSpec::Streaming { chunk_frames, left_context } =
                sample_chunk_spec(500, &sched, &mut rng).unwrap()
            {
                assert!((32..=128).contains(&chunk_frames));
                match left_context {
                    LeftContext::Chunks(l) => assert!(l >= 1),
                    LeftContext::Infinite => panic!("schedule never draws infinite"),
                }
            }
        }
        // tiny T clamps the chunk size
        for _ in 0..100 {
            if let ChunkSpec::Streaming { chunk_frames, .. } =
                sample_chunk_spec(5, &sched, &mut rng).unwrap()
            {
                assert!(chunk_frames <= 5);
            }
        }
    }

    proptest! {
        #[test]
        fn mask_matches_bruteforce_oracle(t_len in 1usize..48, c in 1usize..48, l in 0usize..8) {
            let c = c.min(t_len);
            let mask = build_mask(t_len, ChunkSpec::streaming(c, LeftContext::Chunks(l))).unwrap();
            for t in 0..t_len {
                for u in 0..t_len {
                    prop_assert_eq!(mask.bit(t, u), oracle_bit(t, u, c, LeftContext::Chunks(l)));
                }
            }
        }

        #[test]
        fn infinite_masks_grow_monotonically(t_len in 2usize..48, c in 1usize..48) {
            let c = c.min(t_len);
            let mask = build_mask(t_len, ChunkSpec::streaming(c, LeftContext::Infinite)).unwrap();
            for t in 0..t_len - 1 {
                for u in 0..t_len {
                    prop_assert!(!mask.bit(t, u) || mask.bit(t + 1, u));
                }
            }
        }

        #[test]
        fn chunk_equal_to_t_is_all_ones(t_len in 1usize..48, l in 0usize..4) {
            let mask = build_mask(t_len, ChunkSpec::streaming(t_len, LeftContext::Chunks(l))).unwrap();
            for t in 0..t_len {
                for u in 0..t_len {
                    prop_assert!(mask.bit(t, u));
                }
            }
        }

        #[test]
        fn within_chunk_visibility_is_symmetric(t_len in 1usize..48, c in 1usize..48, l in 0usize..4) {
            let c = c.min(t_len);
            let mask = build_mask(t_len, ChunkSpec::streaming(c, LeftContext::Chunks(l))).unwrap();
            for t in 0..t_len {
                for u in 0..t_len {
                    if t / c == u / c {
                        prop_assert!(mask.bit(t, u) && mask.bit(u, t));
                    }
                }
            }
        }
    }
}
