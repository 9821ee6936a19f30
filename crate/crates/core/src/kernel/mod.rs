//! Minimal dense numeric kernel: matrices, elementwise ops, reductions and
//! the LSTM cell. Everything here is a pure function over immutable inputs,
//! so kernels can be called from any number of threads.

mod dense;
mod lstm;
mod matrix;
pub mod opcount;
mod ops;
mod precision;
mod scalar;

pub use dense::Dense;
pub use lstm::{lstm_cell, LstmWeights};
pub use matrix::Matrix;
pub use ops::{activations, dot, layernorm, matmul, matmul_nt, softmax_rows, softmax_rows_masked, Activation};
pub use precision::{FloatWidth, PrecisionPolicy};
pub use scalar::Scalar;

/// Default layer-norm epsilon.
pub const LAYERNORM_EPS: f64 = 1e-5;
