//! Synthetic feature generation. Random content is fine for throughput and
//! memory measurements: nothing downstream is autoregressive on values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use summix_core::features::FeatureSequence;
use summix_core::kernel::Matrix;

use crate::error::{BenchError, Result};

/// `floor(duration * 1000 / frame_shift)` frames of unit-variance
/// pseudo-random values, bitwise reproducible per seed.
pub fn generate_synthetic_features(
    duration_s: f64,
    dim: usize,
    frame_shift_ms: f64,
    seed: u64,
) -> Result<FeatureSequence<f32>> {
    if duration_s <= 0.0 || frame_shift_ms <= 0.0 || dim == 0 {
        return Err(BenchError::validation(format!(
            "duration {duration_s}s, dim {dim}, frame shift {frame_shift_ms}ms must all be positive"
        )));
    }
    let t_len = (duration_s * 1000.0 / frame_shift_ms).floor() as usize;
    if t_len == 0 {
        return Err(BenchError::validation("duration shorter than one frame"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // uniform on ±sqrt(3) has unit variance
    let bound = 3f64.sqrt();
    let data: Vec<f32> =
        (0..t_len * dim).map(|_| rng.random_range(-bound..bound) as f32).collect();
    Ok(FeatureSequence::new(
        Matrix::from_vec(t_len, dim, data).expect("sized above"),
        frame_shift_ms,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_counts_follow_duration() {
        let f = generate_synthetic_features(5.0, 80, 10.0, 1).unwrap();
        assert_eq!(f.num_frames(), 500);
        assert_eq!(f.dim(), 80);
        let f = generate_synthetic_features(120.0, 80, 10.0, 1).unwrap();
        assert_eq!(f.num_frames(), 12_000);
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = generate_synthetic_features(1.0, 8, 10.0, 42).unwrap();
        let b = generate_synthetic_features(1.0, 8, 10.0, 42).unwrap();
        assert_eq!(a.data.data(), b.data.data());
        let c = generate_synthetic_features(1.0, 8, 10.0, 43).unwrap();
        assert_ne!(a.data.data(), c.data.data());
    }

    #[test]
    fn unit_variance_roughly_holds() {
        let f = generate_synthetic_features(10.0, 16, 10.0, 7).unwrap();
        let n = f.data.data().len() as f64;
        let mean: f64 = f.data.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var: f64 =
            f.data.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        assert!(generate_synthetic_features(0.0, 8, 10.0, 1).is_err());
        assert!(generate_synthetic_features(1.0, 8, -1.0, 1).is_err());
    }
}
