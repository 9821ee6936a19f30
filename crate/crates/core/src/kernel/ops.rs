use crate::error::{Error, Result};
use crate::kernel::{opcount, Matrix, Scalar};

/// Standard matrix product `a * b`.
pub fn matmul<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
    if a.cols() != b.rows() {
        return Err(Error::dim(
            "matmul",
            format!("{}x{} * {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (p, &a_val) in a_row.iter().enumerate() {
            let b_row = b.row(p);
            for (o, &b_val) in out_row.iter_mut().zip(b_row) {
                *o += a_val * b_val;
            }
        }
    }
    opcount::add((m * k * n) as u64);
    Ok(out)
}

/// `a * b^T` without materializing the transpose. `a` is `m x k`, `b` is
/// `n x k`; the result is `m x n`. Row-major makes this the cheap layout for
/// dense layers (`x * W^T`) and attention scores.
pub fn matmul_nt<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
    if a.cols() != b.cols() {
        return Err(Error::dim(
            "matmul_nt",
            format!("{}x{} * ({}x{})^T", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.rows());
    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = dot(a_row, b.row(j));
        }
    }
    opcount::add((m * k * n) as u64);
    Ok(out)
}

/// Dot product with eight independent accumulator lanes so the reduction
/// can vectorize; the lane layout is fixed, so results are deterministic.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    const LANES: usize = 8;
    let mut acc = [S::ZERO; LANES];
    let chunks = a.len() / LANES;
    for (ab, bb) in a.chunks_exact(LANES).zip(b.chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] += ab[l] * bb[l];
        }
    }
    let mut tail = S::ZERO;
    for i in chunks * LANES..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Row-wise layer normalization: each row to zero mean and unit variance
/// (population variance, stabilized by `eps`), then the affine `gain`/`bias`.
pub fn layernorm<S: Scalar>(x: &Matrix<S>, gain: &[S], bias: &[S], eps: f64) -> Result<Matrix<S>> {
    if x.cols() == 0 {
        return Err(Error::EmptyInput("layernorm"));
    }
    if gain.len() != x.cols() || bias.len() != x.cols() {
        return Err(Error::dim(
            "layernorm",
            format!("gain/bias {}/{} vs cols {}", gain.len(), bias.len(), x.cols()),
        ));
    }
    if eps <= 0.0 {
        return Err(Error::arg("layernorm", "eps must be positive"));
    }
    let n = S::from_f64(x.cols() as f64);
    let eps = S::from_f64(eps);
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mut mean = S::ZERO;
        for &v in row {
            mean += v;
        }
        mean /= n;
        let mut var = S::ZERO;
        for &v in row {
            let d = v - mean;
            var += d * d;
        }
        var /= n;
        let inv = S::ONE / (var + eps).sqrt();
        let out_row = out.row_mut(r);
        for (c, &v) in row.iter().enumerate() {
            out_row[c] = (v - mean) * inv * gain[c] + bias[c];
        }
    }
    opcount::add((x.rows() * x.cols() * 4) as u64);
    Ok(out)
}

/// Element-wise nonlinearities. `Glu` halves the column count; everything
/// else is shape-preserving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Gelu,
    Silu,
    Sigmoid,
    Tanh,
    Glu,
}

#[inline]
fn sigmoid<S: Scalar>(v: S) -> S {
    S::ONE / (S::ONE + (-v).exp())
}

// tanh form of GELU, the variant conformer stacks typically ship with.
#[inline]
fn gelu<S: Scalar>(v: S) -> S {
    let c = S::from_f64(0.7978845608028654); // sqrt(2/pi)
    let k = S::from_f64(0.044715);
    let half = S::from_f64(0.5);
    half * v * (S::ONE + (c * (v + k * v * v * v)).tanh())
}

pub fn activations<S: Scalar>(x: &Matrix<S>, kind: Activation) -> Result<Matrix<S>> {
    let out = match kind {
        Activation::Identity => x.clone(),
        Activation::Relu => x.map(|v| if v > S::ZERO { v } else { S::ZERO }),
        Activation::Gelu => x.map(gelu),
        Activation::Silu => x.map(|v| v * sigmoid(v)),
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Tanh => x.map(|v| v.tanh()),
        Activation::Glu => {
            if !x.cols().is_multiple_of(2) {
                return Err(Error::OddGluColumns { cols: x.cols() });
            }
            let half = x.cols() / 2;
            let mut out = Matrix::zeros(x.rows(), half);
            for r in 0..x.rows() {
                let row = x.row(r);
                let out_row = out.row_mut(r);
                for c in 0..half {
                    out_row[c] = row[c] * sigmoid(row[half + c]);
                }
            }
            out
        }
    };
    opcount::add((x.rows() * x.cols()) as u64);
    Ok(out)
}

/// Row-wise softmax over every column.
pub fn softmax_rows<S: Scalar>(x: &Matrix<S>) -> Result<Matrix<S>> {
    softmax_rows_masked(x, |_, _| true)
}

/// Row-wise softmax restricted to columns where `visible(row, col)` holds.
/// Masked entries come out exactly zero; visible entries are normalized with
/// max-subtraction so huge logits cannot overflow. A fully masked row is an
/// error: callers must guarantee at least self-visibility.
pub fn softmax_rows_masked<S: Scalar>(
    x: &Matrix<S>,
    visible: impl Fn(usize, usize) -> bool,
) -> Result<Matrix<S>> {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mut max = S::NEG_INFINITY;
        let mut any = false;
        for (c, &v) in row.iter().enumerate() {
            if visible(r, c) {
                any = true;
                max = max.maximum(v);
            }
        }
        if !any {
            return Err(Error::FullyMaskedRow { row: r });
        }
        let out_row = out.row_mut(r);
        let mut sum = S::ZERO;
        for (c, &v) in row.iter().enumerate() {
            if visible(r, c) {
                let e = (v - max).exp();
                out_row[c] = e;
                sum += e;
            }
        }
        let inv = S::ONE / sum;
        for (c, o) in out_row.iter_mut().enumerate() {
            if visible(r, c) {
                *o *= inv;
            }
        }
    }
    opcount::add((x.rows() * x.cols() * 2) as u64);
    Ok(out)
}
