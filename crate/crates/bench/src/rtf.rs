//! Real-time-factor and peak-memory measurement over synthetic utterances.
//!
//! For each duration the streaming encoder is timed over full chunked
//! passes (one discarded warmup, then `repeats` measured repetitions), and
//! one offline masked forward is run under the allocation tracker to get a
//! measured peak to set against the closed-form model. Computed outputs
//! must be identical across repeats; only the timings may vary.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use summix_core::chunking::{ms_to_frames, ChunkSpec, LeftContext};
use summix_core::encoder::{
    encoder_forward_offline, encoder_forward_streaming, init_streaming_context, EncoderConfig,
    EncoderParams, MixingKind,
};
use summix_core::features::FeatureSequence;
use summix_core::kernel::{FloatWidth, Matrix, Scalar};

use crate::alloc_track;
use crate::error::{BenchError, Result};
use crate::memmodel::{encoder_param_count, model_peak_memory};
use crate::synth::generate_synthetic_features;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub duration_s: f64,
    pub wall_ms_mean: f64,
    pub wall_ms_p95: f64,
    pub rtf: f64,
    pub modeled_peak_bytes: u64,
    pub measured_peak_bytes: u64,
}

/// One benchmark campaign: the fixed setup plus one result row per duration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRun {
    pub config_id: String,
    pub mixing: MixingKind,
    pub durations_s: Vec<f64>,
    pub repeats: usize,
    pub frame_shift_ms: f64,
    pub chunk_ms: f64,
    pub left_context: LeftContext,
    pub seed: u64,
    pub results: Vec<BenchRow>,
}

impl BenchRun {
    pub fn new(config_id: impl Into<String>, mixing: MixingKind) -> Self {
        BenchRun {
            config_id: config_id.into(),
            mixing,
            durations_s: vec![5.0, 10.0, 20.0, 30.0, 60.0, 120.0],
            repeats: 100,
            frame_shift_ms: 10.0,
            chunk_ms: 640.0,
            left_context: LeftContext::Infinite,
            seed: 0,
            results: Vec::new(),
        }
    }

    /// Chunk spec at the post-subsampling rate implied by the config.
    pub fn chunk_spec(&self, cfg: &EncoderConfig) -> Result<ChunkSpec> {
        let post_shift = self.frame_shift_ms * cfg.subsampling_factor as f64;
        let chunk_frames = ms_to_frames(self.chunk_ms, post_shift)?;
        Ok(ChunkSpec::Streaming { chunk_frames, left_context: self.left_context })
    }

    pub fn mixing_label(&self) -> &'static str {
        match self.mixing {
            MixingKind::SummaryMixing => "summary",
            MixingKind::Mhsa => "mhsa",
        }
    }
}

fn percentile_ms(sorted_ms: &[f64], p: f64) -> f64 {
    let idx = ((p * sorted_ms.len() as f64).ceil() as usize).clamp(1, sorted_ms.len()) - 1;
    sorted_ms[idx]
}

/// Stream a whole utterance through a fresh context, returning the
/// concatenated outputs and the wall time of the pass.
fn one_streaming_pass<S: Scalar>(
    feat: &FeatureSequence<S>,
    spec: ChunkSpec,
    cfg: &EncoderConfig,
    params: &EncoderParams<S>,
) -> Result<(Matrix<S>, f64)> {
    let mut ctx = init_streaming_context::<S>(cfg, spec)?;
    let raw_chunk = ctx.raw_chunk_frames(cfg);
    let t_total = feat.num_frames();
    let t_post = t_total / cfg.subsampling_factor;
    let mut out = Matrix::zeros(t_post, cfg.d_model);
    let mut filled = 0;
    let start = Instant::now();
    let mut pos = 0;
    while pos < t_total {
        let end = (pos + raw_chunk).min(t_total);
        let piece = encoder_forward_streaming(&feat.data.row_slice(pos, end), &mut ctx, cfg, params)?;
        for r in 0..piece.rows() {
            out.row_mut(filled).copy_from_slice(piece.row(r));
            filled += 1;
        }
        pos = end;
    }
    let wall = start.elapsed().as_secs_f64();
    debug_assert_eq!(filled, t_post);
    Ok((out, wall))
}

fn run_impl<S: Scalar>(cfg: &EncoderConfig, spec: ChunkSpec, mut run: BenchRun) -> Result<BenchRun> {
    cfg.validate().map_err(BenchError::from)?;
    if run.repeats == 0 {
        return Err(BenchError::validation("repeats must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);

    let live_before = alloc_track::live_bytes();
    let params = EncoderParams::<S>::random(cfg, &mut rng)?;
    let weights_bytes = if alloc_track::enabled() {
        (alloc_track::live_bytes() - live_before) as u64
    } else {
        (encoder_param_count(cfg) * S::WIDTH) as u64
    };

    run.durations_s.sort_by(|a, b| a.partial_cmp(b).expect("finite durations"));
    run.results.clear();

    for (i, &duration_s) in run.durations_s.iter().enumerate() {
        let feat32 =
            generate_synthetic_features(duration_s, cfg.input_dim, run.frame_shift_ms, run.seed + i as u64)?;
        let feat: FeatureSequence<S> = feat32.cast::<S>();
        let t_post = feat.num_frames() / cfg.subsampling_factor;

        // warmup pass, discarded
        let (reference, _) = one_streaming_pass(&feat, spec, cfg, &params)?;

        let mut walls_ms = Vec::with_capacity(run.repeats);
        for _ in 0..run.repeats {
            let (out, wall) = one_streaming_pass(&feat, spec, cfg, &params)?;
            if out != reference {
                return Err(BenchError::validation(format!(
                    "nondeterministic encoder output at {duration_s} s"
                )));
            }
            walls_ms.push(wall * 1000.0);
        }
        walls_ms.sort_by(|a, b| a.partial_cmp(b).expect("finite walls"));
        let wall_ms_mean = walls_ms.iter().sum::<f64>() / walls_ms.len() as f64;
        if wall_ms_mean < 0.01 {
            return Err(BenchError::validation(format!(
                "measured {wall_ms_mean:.4} ms is below timer resolution; raise --repeats or use longer durations"
            )));
        }
        let wall_ms_p95 = percentile_ms(&walls_ms, 0.95);
        let rtf = wall_ms_mean / 1000.0 / duration_s;

        // one offline masked forward under the tracker for the measured peak
        let (offline, workspace) =
            alloc_track::measure_peak_delta(|| encoder_forward_offline(&feat, spec, cfg, &params));
        let _ = offline.map_err(BenchError::from)?;
        let measured_peak_bytes =
            if alloc_track::enabled() { weights_bytes + workspace as u64 } else { 0 };
        let modeled_peak_bytes = model_peak_memory(cfg, spec, t_post);

        eprintln!(
            "bench {} {:>6.1} s: rtf {:.4} (mean {:.1} ms, p95 {:.1} ms), modeled {:.1} MiB, measured {:.1} MiB",
            run.mixing_label(),
            duration_s,
            rtf,
            wall_ms_mean,
            wall_ms_p95,
            modeled_peak_bytes as f64 / (1024.0 * 1024.0),
            measured_peak_bytes as f64 / (1024.0 * 1024.0),
        );

        run.results.push(BenchRow {
            duration_s,
            wall_ms_mean,
            wall_ms_p95,
            rtf,
            modeled_peak_bytes,
            measured_peak_bytes,
        });
    }
    Ok(run)
}

/// Execute the benchmark described by `run` under `cfg`. The precision
/// policy in the config picks the floating-point width.
pub fn run_rtf_benchmark(cfg: &EncoderConfig, spec: ChunkSpec, run: BenchRun) -> Result<BenchRun> {
    match spec {
        ChunkSpec::FullContext => {
            return Err(BenchError::validation("benchmark needs a streaming chunk spec"))
        }
        ChunkSpec::Streaming { .. } => {}
    }
    match cfg.precision.compute() {
        FloatWidth::F32 => run_impl::<f32>(cfg, spec, run),
        FloatWidth::F64 => run_impl::<f64>(cfg, spec, run),
    }
}

/// Throughput mode: `streams` independent streaming contexts run in
/// parallel, one thread each. Returns aggregate audio seconds processed per
/// wall second.
pub fn run_throughput(
    cfg: &EncoderConfig,
    spec: ChunkSpec,
    duration_s: f64,
    streams: usize,
    seed: u64,
) -> Result<f64> {
    if streams == 0 {
        return Err(BenchError::validation("need at least one stream"));
    }
    cfg.validate().map_err(BenchError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = EncoderParams::<f32>::random(cfg, &mut rng)?;

    let feats: Vec<_> = (0..streams)
        .map(|i| generate_synthetic_features(duration_s, cfg.input_dim, 10.0, seed + i as u64))
        .collect::<Result<_>>()?;

    let start = Instant::now();
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for feat in &feats {
            let params = &params;
            handles.push(scope.spawn(move || one_streaming_pass(feat, spec, cfg, params).map(|_| ())));
        }
        for h in handles {
            h.join().map_err(|_| BenchError::validation("stream worker panicked"))??;
        }
        Ok(())
    })?;
    let wall = start.elapsed().as_secs_f64();
    Ok(streams as f64 * duration_s / wall)
}
