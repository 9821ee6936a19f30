use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use summix::alloc_track::TrackingAllocator;
use summix::features_io::{load_feature_file, write_feature_file};
use summix::plot::write_rtf_svg;
use summix::report::{emit_report, report_rows, ReportFormat};
use summix::rtf::{run_rtf_benchmark, run_throughput, BenchRun};
use summix::synth::generate_synthetic_features;
use summix::{BenchError, Result};
use summix_core::chunking::{build_mask, ms_to_frames, ChunkSpec, LeftContext};
use summix_core::encoder::{
    encoder_forward_streaming, init_streaming_context, load_checkpoint, save_checkpoint, ConvMode,
    EncoderConfig, EncoderParams, MixingKind,
};
use summix_core::features::FeatureSequence;
use summix_core::kernel::PrecisionPolicy;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

#[derive(Parser)]
#[command(name = "summix", version, about = "Streaming summary-mixing conformer encoder bench and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure streaming RTF and peak memory over synthetic utterances.
    Bench(BenchArgs),
    /// Print a chunked visibility mask as a 0/1 grid.
    Mask(MaskArgs),
    /// Run features from a file through a checkpointed encoder, streaming.
    Encode(EncodeArgs),
    /// Generate a synthetic feature file.
    Synth(SynthArgs),
    /// Write a randomly initialized encoder checkpoint.
    Init(InitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MixingArg {
    Summary,
    Mhsa,
}

impl From<MixingArg> for MixingKind {
    fn from(m: MixingArg) -> Self {
        match m {
            MixingArg::Summary => MixingKind::SummaryMixing,
            MixingArg::Mhsa => MixingKind::Mhsa,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for PrecisionPolicy {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => PrecisionPolicy::f32(),
            PrecisionArg::F64 => PrecisionPolicy::f64(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConvModeArg {
    DynamicChunk,
    Causal,
    Standard,
}

impl From<ConvModeArg> for ConvMode {
    fn from(m: ConvModeArg) -> Self {
        match m {
            ConvModeArg::DynamicChunk => ConvMode::DynamicChunk,
            ConvModeArg::Causal => ConvMode::Causal,
            ConvModeArg::Standard => ConvMode::Standard,
        }
    }
}

fn parse_left_context(s: &str) -> std::result::Result<LeftContext, String> {
    if s.eq_ignore_ascii_case("infinite") || s.eq_ignore_ascii_case("inf") {
        return Ok(LeftContext::Infinite);
    }
    s.parse::<usize>()
        .map(LeftContext::Chunks)
        .map_err(|_| format!("expected 'infinite' or a chunk count, got '{s}'"))
}

#[derive(Clone, Debug)]
struct DurationList(Vec<f64>);

fn parse_durations(s: &str) -> std::result::Result<DurationList, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let v: f64 =
            part.trim().parse().map_err(|_| format!("bad duration '{part}' in '{s}'"))?;
        if v <= 0.0 {
            return Err(format!("duration '{part}' must be positive"));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err("no durations given".to_string());
    }
    Ok(DurationList(out))
}

#[derive(Args)]
struct BenchArgs {
    /// Mixing cell under test.
    #[arg(long, value_enum)]
    mixing: MixingArg,
    /// Comma-separated utterance durations in seconds.
    #[arg(long, value_parser = parse_durations, default_value = "5,10,20,30,60,120")]
    durations: DurationList,
    /// Streaming chunk size in milliseconds.
    #[arg(long, default_value_t = 640.0)]
    chunk_ms: f64,
    /// Left context in chunks, or 'infinite'.
    #[arg(long, value_parser = parse_left_context, default_value = "infinite")]
    left_context: LeftContext,
    /// Timed repetitions per duration (one extra warmup pass is discarded).
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[arg(long, default_value_t = 144)]
    d_model: usize,
    #[arg(long, default_value_t = 12)]
    blocks: usize,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
    precision: PrecisionArg,
    /// Report destination (.csv or .json).
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG chart of rtf vs duration.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Attention heads (ignored for summary mixing).
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 31)]
    conv_kernel: usize,
    /// Frontend frame-rate reduction (power of two).
    #[arg(long, default_value_t = 4)]
    subsampling: usize,
    /// Synthetic feature dimension.
    #[arg(long, default_value_t = 80)]
    feature_dim: usize,
    #[arg(long, default_value_t = 10.0)]
    frame_shift_ms: f64,
    /// Throughput mode: run this many independent parallel streams instead
    /// of the timing sweep. SUMMIX_THREADS caps the worker count.
    #[arg(long)]
    streams: Option<usize>,
}

#[derive(Args)]
struct MaskArgs {
    /// Number of frames.
    #[arg(long)]
    t: usize,
    /// Chunk size in frames.
    #[arg(long)]
    chunk_frames: usize,
    /// Left context in chunks, or 'infinite'.
    #[arg(long, value_parser = parse_left_context, default_value = "infinite")]
    left: LeftContext,
}

#[derive(Args)]
struct EncodeArgs {
    /// Input feature file (.smxf).
    #[arg(long)]
    features: PathBuf,
    /// Encoder checkpoint (.smxc).
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 640.0)]
    chunk_ms: f64,
    #[arg(long, value_parser = parse_left_context, default_value = "infinite")]
    left_context: LeftContext,
    /// Output feature file with encoder states (.smxf).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    duration_s: f64,
    #[arg(long, default_value_t = 80)]
    dim: usize,
    #[arg(long, default_value_t = 10.0)]
    frame_shift_ms: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, value_enum)]
    mixing: MixingArg,
    #[arg(long, default_value_t = 144)]
    d_model: usize,
    #[arg(long, default_value_t = 12)]
    blocks: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 31)]
    conv_kernel: usize,
    #[arg(long, default_value_t = 4)]
    subsampling: usize,
    #[arg(long, default_value_t = 80)]
    input_dim: usize,
    #[arg(long, default_value_t = 4.0)]
    ffn_expansion: f64,
    #[arg(long, value_enum, default_value_t = ConvModeArg::DynamicChunk)]
    conv_mode: ConvModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn thread_cap() -> Option<usize> {
    std::env::var("SUMMIX_THREADS").ok().and_then(|v| v.parse::<usize>().ok())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg = EncoderConfig {
        num_blocks: args.blocks,
        d_model: args.d_model,
        input_dim: args.feature_dim,
        mixing: args.mixing.into(),
        num_heads: args.heads,
        conv_kernel: args.conv_kernel,
        ffn_expansion: 4.0,
        conv_mode: ConvMode::DynamicChunk,
        subsampling_factor: args.subsampling,
        precision: args.precision.into(),
    };
    cfg.validate().map_err(BenchError::from)?;

    let mut run = BenchRun::new(
        format!("{}-d{}-b{}", match args.mixing { MixingArg::Summary => "summary", MixingArg::Mhsa => "mhsa" }, args.d_model, args.blocks),
        args.mixing.into(),
    );
    run.durations_s = args.durations.0;
    run.repeats = args.repeats;
    run.frame_shift_ms = args.frame_shift_ms;
    run.chunk_ms = args.chunk_ms;
    run.left_context = args.left_context;
    run.seed = args.seed;
    let spec = run.chunk_spec(&cfg)?;

    if let Some(streams) = args.streams {
        let capped = thread_cap().map_or(streams, |cap| streams.min(cap));
        if capped != streams {
            eprintln!("SUMMIX_THREADS caps streams at {capped}");
        }
        let duration = run.durations_s.first().copied().unwrap_or(10.0);
        let xrt = run_throughput(&cfg, spec, duration, capped, run.seed)?;
        println!("throughput: {capped} streams x {duration} s -> {xrt:.2}x realtime");
        return Ok(());
    }

    let done = run_rtf_benchmark(&cfg, spec, run)?;
    let format = ReportFormat::from_path(&args.out);
    emit_report(&done, format, &args.out)?;
    println!("wrote {}", args.out.display());
    if let Some(plot_path) = args.plot {
        write_rtf_svg(&report_rows(&done), &plot_path)?;
        println!("wrote {}", plot_path.display());
    }
    Ok(())
}

fn cmd_mask(args: MaskArgs) -> Result<()> {
    let mask = build_mask(args.t, ChunkSpec::streaming(args.chunk_frames, args.left))
        .map_err(BenchError::from)?;
    print!("{}", mask.to_grid());
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<()> {
    let feat = load_feature_file(&args.features)?;
    let (cfg, params) = load_checkpoint(&args.checkpoint).map_err(BenchError::from)?;
    if feat.dim() != cfg.input_dim {
        return Err(BenchError::validation(format!(
            "feature dim {} does not match checkpoint input dim {}",
            feat.dim(),
            cfg.input_dim
        )));
    }
    let post_shift = feat.frame_shift_ms * cfg.subsampling_factor as f64;
    let chunk_frames = ms_to_frames(args.chunk_ms, post_shift).map_err(BenchError::from)?;
    let spec = ChunkSpec::Streaming { chunk_frames, left_context: args.left_context };

    let mut ctx = init_streaming_context::<f32>(&cfg, spec).map_err(BenchError::from)?;
    let raw_chunk = ctx.raw_chunk_frames(&cfg);
    let mut rows: Vec<Vec<f32>> = Vec::new();
    let mut pos = 0;
    while pos < feat.num_frames() {
        let end = (pos + raw_chunk).min(feat.num_frames());
        let piece =
            encoder_forward_streaming(&feat.data.row_slice(pos, end), &mut ctx, &cfg, &params)
                .map_err(BenchError::from)?;
        for r in 0..piece.rows() {
            rows.push(piece.row(r).to_vec());
        }
        pos = end;
    }
    if rows.is_empty() {
        return Err(BenchError::validation(
            "input shorter than one subsampled frame; nothing to encode",
        ));
    }
    let out = FeatureSequence::new(
        summix_core::kernel::Matrix::from_rows(&rows).map_err(BenchError::from)?,
        post_shift,
    );
    write_feature_file(&args.out, &out)?;
    println!(
        "encoded {} frames -> {} frames x {} ({})",
        feat.num_frames(),
        out.num_frames(),
        out.dim(),
        args.out.display()
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let feat =
        generate_synthetic_features(args.duration_s, args.dim, args.frame_shift_ms, args.seed)?;
    write_feature_file(&args.out, &feat)?;
    println!("wrote {} frames x {} ({})", feat.num_frames(), feat.dim(), args.out.display());
    Ok(())
}

fn cmd_init(args: InitArgs) -> Result<()> {
    let cfg = EncoderConfig {
        num_blocks: args.blocks,
        d_model: args.d_model,
        input_dim: args.input_dim,
        mixing: args.mixing.into(),
        num_heads: args.heads,
        conv_kernel: args.conv_kernel,
        ffn_expansion: args.ffn_expansion,
        conv_mode: args.conv_mode.into(),
        subsampling_factor: args.subsampling,
        precision: PrecisionPolicy::f32(),
    };
    cfg.validate().map_err(BenchError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let params = EncoderParams::<f32>::random(&cfg, &mut rng).map_err(BenchError::from)?;
    save_checkpoint(&args.out, &cfg, &params).map_err(BenchError::from)?;
    println!("wrote checkpoint with {} parameters ({})", params.param_count(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(args) => cmd_bench(args),
        Command::Mask(args) => cmd_mask(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Init(args) => cmd_init(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
