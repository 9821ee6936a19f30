//! Feature file format.
//!
//! Layout (little-endian): magic `"SMXF"`, version `u32` (1), `T u32`,
//! `D u32`, `frame_shift_ms f32`, then `T*D` f32 values row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use summix_core::features::FeatureSequence;
use summix_core::kernel::Matrix;

use crate::error::{BenchError, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"SMXF";
pub const FEATURE_VERSION: u32 = 1;

pub fn write_feature_file(path: impl AsRef<Path>, feat: &FeatureSequence<f32>) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(&FEATURE_MAGIC)?;
    out.write_all(&FEATURE_VERSION.to_le_bytes())?;
    out.write_all(&(feat.num_frames() as u32).to_le_bytes())?;
    out.write_all(&(feat.dim() as u32).to_le_bytes())?;
    out.write_all(&(feat.frame_shift_ms as f32).to_le_bytes())?;
    for &v in feat.data.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| BenchError::validation(format!("truncated file: {what}")))
}

pub fn load_feature_file(path: impl AsRef<Path>) -> Result<FeatureSequence<f32>> {
    let file = File::open(&path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != FEATURE_MAGIC {
        return Err(BenchError::validation(format!(
            "bad magic {magic:?}, expected {FEATURE_MAGIC:?}"
        )));
    }
    let mut word = [0u8; 4];
    read_exact(&mut r, &mut word, "version")?;
    let version = u32::from_le_bytes(word);
    if version != FEATURE_VERSION {
        return Err(BenchError::validation(format!(
            "unsupported feature-file version {version}"
        )));
    }
    read_exact(&mut r, &mut word, "frame count")?;
    let t_len = u32::from_le_bytes(word) as usize;
    read_exact(&mut r, &mut word, "feature dim")?;
    let dim = u32::from_le_bytes(word) as usize;
    read_exact(&mut r, &mut word, "frame shift")?;
    let frame_shift_ms = f32::from_le_bytes(word) as f64;
    if t_len == 0 || dim == 0 || frame_shift_ms <= 0.0 {
        return Err(BenchError::validation(format!(
            "degenerate header: T={t_len} D={dim} shift={frame_shift_ms}"
        )));
    }

    let mut body = vec![0u8; t_len * dim * 4];
    read_exact(&mut r, &mut body, "body")?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(BenchError::validation("trailing bytes after feature body".to_string()));
    }
    let data: Vec<f32> =
        body.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    Ok(FeatureSequence::new(
        Matrix::from_vec(t_len, dim, data).expect("sized above"),
        frame_shift_ms,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_synthetic_features;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("smxf_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn round_trip_is_identity() {
        let feat = generate_synthetic_features(0.5, 12, 10.0, 9).unwrap();
        let path = temp_path("rt.smxf");
        write_feature_file(&path, &feat).unwrap();
        let back = load_feature_file(&path).unwrap();
        assert_eq!(back.data.data(), feat.data.data());
        assert_eq!(back.frame_shift_ms, feat.frame_shift_ms);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn truncated_body_reports_truncation() {
        let feat = generate_synthetic_features(0.2, 4, 10.0, 9).unwrap();
        let path = temp_path("trunc.smxf");
        write_feature_file(&path, &feat).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = load_feature_file(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn wrong_magic_reports_format_error() {
        let path = temp_path("magic.smxf");
        std::fs::write(&path, b"WAVExxxxyyyyzzzz").unwrap();
        let err = load_feature_file(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
        assert_eq!(err.exit_code(), 2);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_feature_file("/nonexistent/dir/f.smxf").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
