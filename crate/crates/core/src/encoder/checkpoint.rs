//! Flat binary checkpoint for encoder weights.
//!
//! Layout (all multi-byte values little-endian):
//!
//! ```text
//! magic     4 bytes  "SMXC"
//! version   u32      currently 1
//! config    num_blocks u32, d_model u32, input_dim u32, mixing u8
//!           (0 = summary, 1 = mhsa), num_heads u32, conv_kernel u32,
//!           ffn_expansion f32, conv_mode u8 (0 = dynamic_chunk, 1 = causal,
//!           2 = standard), subsampling_factor u32, flags u8
//!           (bit 0: absolute positional encoding)
//! tensors   repeated until EOF:
//!           name_len u16, name bytes (utf-8), rank u8, dims u32 * rank,
//!           data f32 * product(dims)
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::encoder::{
    BlockParams, ConvModuleParams, ConvMode, DepthwiseKernel, EncoderConfig, EncoderParams,
    FeedForwardParams, FrontendParams, LayerNormParams, MixingKind, MixingParams,
};
use crate::error::{Error, Result};
use crate::kernel::{Dense, Matrix, PrecisionPolicy, Scalar};
use crate::mixing::{MhsaParams, PositionalEncoding, SummaryMixingParams};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SMXC";
pub const CHECKPOINT_VERSION: u32 = 1;

struct TensorWriter<'a, W: Write> {
    out: &'a mut W,
}

impl<W: Write> TensorWriter<'_, W> {
    fn tensor(&mut self, name: &str, dims: &[u32], data: impl Iterator<Item = f32>) -> Result<()> {
        let name_bytes = name.as_bytes();
        self.out.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        self.out.write_all(name_bytes)?;
        self.out.write_all(&[dims.len() as u8])?;
        for &d in dims {
            self.out.write_all(&d.to_le_bytes())?;
        }
        let mut count = 0usize;
        for v in data {
            self.out.write_all(&v.to_le_bytes())?;
            count += 1;
        }
        debug_assert_eq!(count as u64, dims.iter().map(|&d| d as u64).product::<u64>());
        Ok(())
    }

    fn matrix<S: Scalar>(&mut self, name: &str, m: &Matrix<S>) -> Result<()> {
        self.tensor(
            name,
            &[m.rows() as u32, m.cols() as u32],
            m.data().iter().map(|v| v.to_f64() as f32),
        )
    }

    fn vector<S: Scalar>(&mut self, name: &str, v: &[S]) -> Result<()> {
        self.tensor(name, &[v.len() as u32], v.iter().map(|x| x.to_f64() as f32))
    }

    fn dense<S: Scalar>(&mut self, prefix: &str, d: &Dense<S>) -> Result<()> {
        self.matrix(&format!("{prefix}.weight"), &d.weight)?;
        self.vector(&format!("{prefix}.bias"), &d.bias)
    }

    fn layernorm<S: Scalar>(&mut self, prefix: &str, ln: &LayerNormParams<S>) -> Result<()> {
        self.vector(&format!("{prefix}.gain"), &ln.gain)?;
        self.vector(&format!("{prefix}.bias"), &ln.bias)
    }

    fn depthwise<S: Scalar>(&mut self, prefix: &str, k: &DepthwiseKernel<S>) -> Result<()> {
        self.matrix(&format!("{prefix}.weight"), &k.weights)?;
        self.vector(&format!("{prefix}.bias"), &k.bias)
    }
}

fn mixing_byte(kind: MixingKind) -> u8 {
    match kind {
        MixingKind::SummaryMixing => 0,
        MixingKind::Mhsa => 1,
    }
}

fn conv_mode_byte(mode: ConvMode) -> u8 {
    match mode {
        ConvMode::DynamicChunk => 0,
        ConvMode::Causal => 1,
        ConvMode::Standard => 2,
    }
}

/// Write `cfg` and `params` to `path`. Tensor data is stored as f32
/// regardless of the in-memory width.
pub fn save_checkpoint<S: Scalar>(
    path: impl AsRef<Path>,
    cfg: &EncoderConfig,
    params: &EncoderParams<S>,
) -> Result<()> {
    cfg.validate()?;
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(&CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(cfg.num_blocks as u32).to_le_bytes())?;
    out.write_all(&(cfg.d_model as u32).to_le_bytes())?;
    out.write_all(&(cfg.input_dim as u32).to_le_bytes())?;
    out.write_all(&[mixing_byte(cfg.mixing)])?;
    out.write_all(&(cfg.num_heads as u32).to_le_bytes())?;
    out.write_all(&(cfg.conv_kernel as u32).to_le_bytes())?;
    out.write_all(&(cfg.ffn_expansion as f32).to_le_bytes())?;
    out.write_all(&[conv_mode_byte(cfg.conv_mode)])?;
    out.write_all(&(cfg.subsampling_factor as u32).to_le_bytes())?;
    let absolute_positional = params.blocks.iter().any(|b| {
        matches!(&b.mixing, MixingParams::Mhsa(p) if p.positional == PositionalEncoding::Absolute)
    });
    out.write_all(&[absolute_positional as u8])?;

    let mut w = TensorWriter { out: &mut out };
    w.dense("frontend.proj", &params.frontend.proj)?;
    for (i, k) in params.frontend.sub_layers.iter().enumerate() {
        w.depthwise(&format!("frontend.sub{i}"), k)?;
    }
    for (i, b) in params.blocks.iter().enumerate() {
        let p = format!("block{i}");
        w.layernorm(&format!("{p}.ln_ffn1"), &b.ln_ffn1)?;
        w.dense(&format!("{p}.ffn1.w_in"), &b.ffn1.w_in)?;
        w.dense(&format!("{p}.ffn1.w_out"), &b.ffn1.w_out)?;
        w.layernorm(&format!("{p}.ln_mixing"), &b.ln_mixing)?;
        match &b.mixing {
            MixingParams::Summary(m) => {
                w.dense(&format!("{p}.mixing.local"), &m.local)?;
                w.dense(&format!("{p}.mixing.summary"), &m.summary)?;
                w.dense(&format!("{p}.mixing.combiner"), &m.combiner)?;
            }
            MixingParams::Mhsa(m) => {
                w.dense(&format!("{p}.mixing.query"), &m.query)?;
                w.dense(&format!("{p}.mixing.key"), &m.key)?;
                w.dense(&format!("{p}.mixing.value"), &m.value)?;
                w.dense(&format!("{p}.mixing.output"), &m.output)?;
            }
        }
        w.layernorm(&format!("{p}.ln_conv"), &b.ln_conv)?;
        w.dense(&format!("{p}.conv.pw_in"), &b.conv.pointwise_in)?;
        w.depthwise(&format!("{p}.conv.depthwise"), &b.conv.depthwise)?;
        w.dense(&format!("{p}.conv.pw_out"), &b.conv.pointwise_out)?;
        w.layernorm(&format!("{p}.ln_ffn2"), &b.ln_ffn2)?;
        w.dense(&format!("{p}.ffn2.w_in"), &b.ffn2.w_in)?;
        w.dense(&format!("{p}.ffn2.w_out"), &b.ffn2.w_out)?;
        w.layernorm(&format!("{p}.ln_final"), &b.ln_final)?;
    }
    out.flush()?;
    Ok(())
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|_| Error::Truncated(what))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>(what)?))
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.bytes::<1>(what)?[0])
    }

    fn f32(&mut self, what: &'static str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes::<4>(what)?))
    }
}

type TensorMap = HashMap<String, (Vec<u32>, Vec<f32>)>;

fn read_tensors<R: Read>(r: &mut Reader<R>) -> Result<TensorMap> {
    let mut map = TensorMap::new();
    loop {
        // a clean EOF here ends the tensor section
        let mut len_buf = [0u8; 2];
        match r.inner.read(&mut len_buf)? {
            0 => break,
            1 => {
                r.inner.read_exact(&mut len_buf[1..]).map_err(|_| Error::Truncated("tensor name length"))?;
            }
            _ => {}
        }
        let name_len = u16::from_le_bytes(len_buf) as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.inner.read_exact(&mut name_bytes).map_err(|_| Error::Truncated("tensor name"))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Malformed("tensor name is not utf-8".into()))?;
        let rank = r.u8("tensor rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("tensor dims")?);
        }
        let count = dims.iter().map(|&d| d as usize).product::<usize>();
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(r.f32("tensor data")?);
        }
        if map.insert(name.clone(), (dims, data)).is_some() {
            return Err(Error::Malformed(format!("duplicate tensor {name}")));
        }
    }
    Ok(map)
}

fn take_matrix(map: &mut TensorMap, name: &str) -> Result<Matrix<f32>> {
    let (dims, data) =
        map.remove(name).ok_or_else(|| Error::Malformed(format!("missing tensor {name}")))?;
    if dims.len() != 2 {
        return Err(Error::Malformed(format!("{name}: expected rank 2, got {}", dims.len())));
    }
    Matrix::from_vec(dims[0] as usize, dims[1] as usize, data)
}

fn take_vector(map: &mut TensorMap, name: &str) -> Result<Vec<f32>> {
    let (dims, data) =
        map.remove(name).ok_or_else(|| Error::Malformed(format!("missing tensor {name}")))?;
    if dims.len() != 1 {
        return Err(Error::Malformed(format!("{name}: expected rank 1, got {}", dims.len())));
    }
    Ok(data)
}

fn take_dense(map: &mut TensorMap, prefix: &str) -> Result<Dense<f32>> {
    Dense::new(take_matrix(map, &format!("{prefix}.weight"))?, take_vector(map, &format!("{prefix}.bias"))?)
}

fn take_layernorm(map: &mut TensorMap, prefix: &str) -> Result<LayerNormParams<f32>> {
    Ok(LayerNormParams {
        gain: take_vector(map, &format!("{prefix}.gain"))?,
        bias: take_vector(map, &format!("{prefix}.bias"))?,
        eps: crate::kernel::LAYERNORM_EPS,
    })
}

fn take_depthwise(map: &mut TensorMap, prefix: &str) -> Result<DepthwiseKernel<f32>> {
    DepthwiseKernel::new(
        take_matrix(map, &format!("{prefix}.weight"))?,
        take_vector(map, &format!("{prefix}.bias"))?,
    )
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(EncoderConfig, EncoderParams<f32>)> {
    let file = File::open(path)?;
    let mut r = Reader { inner: BufReader::new(file) };

    let magic = r.bytes::<4>("magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic { expected: CHECKPOINT_MAGIC, got: magic });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion { got: version, supported: CHECKPOINT_VERSION });
    }
    let num_blocks = r.u32("num_blocks")? as usize;
    let d_model = r.u32("d_model")? as usize;
    let input_dim = r.u32("input_dim")? as usize;
    let mixing = match r.u8("mixing")? {
        0 => MixingKind::SummaryMixing,
        1 => MixingKind::Mhsa,
        other => return Err(Error::Malformed(format!("unknown mixing kind {other}"))),
    };
    let num_heads = r.u32("num_heads")? as usize;
    let conv_kernel = r.u32("conv_kernel")? as usize;
    let ffn_expansion = r.f32("ffn_expansion")? as f64;
    let conv_mode = match r.u8("conv_mode")? {
        0 => ConvMode::DynamicChunk,
        1 => ConvMode::Causal,
        2 => ConvMode::Standard,
        other => return Err(Error::Malformed(format!("unknown conv mode {other}"))),
    };
    let subsampling_factor = r.u32("subsampling_factor")? as usize;
    let flags = r.u8("flags")?;
    let positional = if flags & 1 != 0 {
        PositionalEncoding::Absolute
    } else {
        PositionalEncoding::None
    };

    let cfg = EncoderConfig {
        num_blocks,
        d_model,
        input_dim,
        mixing,
        num_heads,
        conv_kernel,
        ffn_expansion,
        conv_mode,
        subsampling_factor,
        precision: PrecisionPolicy::f32(),
    };
    cfg.validate()?;

    let mut map = read_tensors(&mut r)?;
    let frontend = FrontendParams {
        proj: take_dense(&mut map, "frontend.proj")?,
        sub_layers: (0..cfg.subsample_halvings())
            .map(|i| take_depthwise(&mut map, &format!("frontend.sub{i}")))
            .collect::<Result<Vec<_>>>()?,
    };
    let mut blocks = Vec::with_capacity(num_blocks);
    for i in 0..num_blocks {
        let p = format!("block{i}");
        let mixing_params = match mixing {
            MixingKind::SummaryMixing => MixingParams::Summary(SummaryMixingParams::new(
                take_dense(&mut map, &format!("{p}.mixing.local"))?,
                crate::kernel::Activation::Gelu,
                take_dense(&mut map, &format!("{p}.mixing.summary"))?,
                crate::kernel::Activation::Gelu,
                take_dense(&mut map, &format!("{p}.mixing.combiner"))?,
                crate::kernel::Activation::Gelu,
            )?),
            MixingKind::Mhsa => MixingParams::Mhsa(MhsaParams::new(
                num_heads,
                take_dense(&mut map, &format!("{p}.mixing.query"))?,
                take_dense(&mut map, &format!("{p}.mixing.key"))?,
                take_dense(&mut map, &format!("{p}.mixing.value"))?,
                take_dense(&mut map, &format!("{p}.mixing.output"))?,
                positional,
            )?),
        };
        blocks.push(BlockParams {
            ln_ffn1: take_layernorm(&mut map, &format!("{p}.ln_ffn1"))?,
            ffn1: FeedForwardParams {
                w_in: take_dense(&mut map, &format!("{p}.ffn1.w_in"))?,
                w_out: take_dense(&mut map, &format!("{p}.ffn1.w_out"))?,
            },
            ln_mixing: take_layernorm(&mut map, &format!("{p}.ln_mixing"))?,
            mixing: mixing_params,
            ln_conv: take_layernorm(&mut map, &format!("{p}.ln_conv"))?,
            conv: ConvModuleParams {
                pointwise_in: take_dense(&mut map, &format!("{p}.conv.pw_in"))?,
                depthwise: take_depthwise(&mut map, &format!("{p}.conv.depthwise"))?,
                pointwise_out: take_dense(&mut map, &format!("{p}.conv.pw_out"))?,
            },
            ln_ffn2: take_layernorm(&mut map, &format!("{p}.ln_ffn2"))?,
            ffn2: FeedForwardParams {
                w_in: take_dense(&mut map, &format!("{p}.ffn2.w_in"))?,
                w_out: take_dense(&mut map, &format!("{p}.ffn2.w_out"))?,
            },
            ln_final: take_layernorm(&mut map, &format!("{p}.ln_final"))?,
        });
    }
    if !map.is_empty() {
        let mut names: Vec<_> = map.keys().cloned().collect();
        names.sort();
        return Err(Error::Malformed(format!("unexpected tensors: {names:?}")));
    }
    Ok((cfg, EncoderParams { frontend, blocks }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> EncoderConfig {
        EncoderConfig {
            num_blocks: 2,
            d_model: 8,
            input_dim: 5,
            mixing: MixingKind::SummaryMixing,
            num_heads: 2,
            conv_kernel: 5,
            ffn_expansion: 2.0,
            conv_mode: ConvMode::DynamicChunk,
            subsampling_factor: 4,
            precision: PrecisionPolicy::f32(),
        }
    }

    #[test]
    fn round_trip_preserves_params() {
        let dir = std::env::temp_dir().join(format!("smxc_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.smxc");

        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let cfg = cfg();
        let params = EncoderParams::<f32>::random(&cfg, &mut rng).unwrap();
        save_checkpoint(&path, &cfg, &params).unwrap();
        let (cfg2, params2) = load_checkpoint(&path).unwrap();
        assert_eq!(cfg2.num_blocks, cfg.num_blocks);
        assert_eq!(cfg2.d_model, cfg.d_model);
        assert_eq!(cfg2.subsampling_factor, 4);
        assert_eq!(params2, params);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn mhsa_round_trip() {
        let dir = std::env::temp_dir().join(format!("smxc_test_mh_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.smxc");
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let cfg = EncoderConfig { mixing: MixingKind::Mhsa, ..cfg() };
        let params = EncoderParams::<f32>::random(&cfg, &mut rng).unwrap();
        save_checkpoint(&path, &cfg, &params).unwrap();
        let (cfg2, params2) = load_checkpoint(&path).unwrap();
        assert_eq!(cfg2.mixing, MixingKind::Mhsa);
        assert_eq!(params2, params);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn bad_magic_and_truncation_are_distinct() {
        let dir = std::env::temp_dir().join(format!("smxc_test_bad_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();

        let bad = dir.join("bad.smxc");
        std::fs::write(&bad, b"NOPE0000").unwrap();
        assert!(matches!(load_checkpoint(&bad), Err(Error::BadMagic { .. })));

        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let cfg = cfg();
        let params = EncoderParams::<f32>::random(&cfg, &mut rng).unwrap();
        let full = dir.join("full.smxc");
        save_checkpoint(&full, &cfg, &params).unwrap();
        let bytes = std::fs::read(&full).unwrap();
        let cut = dir.join("cut.smxc");
        std::fs::write(&cut, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(load_checkpoint(&cut), Err(Error::Truncated(_))));

        let head = dir.join("head.smxc");
        std::fs::write(&head, &bytes[..10]).unwrap();
        assert!(matches!(load_checkpoint(&head), Err(Error::Truncated(_))));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unsupported_version_rejected() {
        let dir = std::env::temp_dir().join(format!("smxc_test_v_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v9.smxc");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&CHECKPOINT_MAGIC);
        bytes.extend_from_slice(&9u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::UnsupportedVersion { got: 9, .. })
        ));
        std::fs::remove_dir_all(&dir).ok();
    }
}
