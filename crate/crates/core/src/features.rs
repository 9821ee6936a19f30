use crate::kernel::{Matrix, Scalar};

/// A `T x D` sequence of acoustic feature frames plus the frame shift that
/// maps frame indices back to time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence<S: Scalar> {
    pub data: Matrix<S>,
    pub frame_shift_ms: f64,
}

impl<S: Scalar> FeatureSequence<S> {
    pub fn new(data: Matrix<S>, frame_shift_ms: f64) -> Self {
        FeatureSequence { data, frame_shift_ms }
    }

    pub fn num_frames(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.num_frames() as f64 * self.frame_shift_ms / 1000.0
    }

    pub fn cast<T: Scalar>(&self) -> FeatureSequence<T> {
        FeatureSequence { data: self.data.cast::<T>(), frame_shift_ms: self.frame_shift_ms }
    }
}
