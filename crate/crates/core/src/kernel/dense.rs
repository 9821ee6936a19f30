use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{dot, matmul_nt, opcount, Matrix, Scalar};

/// Fully connected layer `y = x W^T + b` with weight stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S: Scalar> {
    pub weight: Matrix<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(weight: Matrix<S>, bias: Vec<S>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::dim(
                "dense",
                format!("bias {} vs out dim {}", bias.len(), weight.rows()),
            ));
        }
        Ok(Dense { weight, bias })
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Dense { weight: Matrix::zeros(out_dim, in_dim), bias: vec![S::ZERO; out_dim] }
    }

    /// Identity map (square, zero bias); handy for algebraic tests.
    pub fn identity(dim: usize) -> Self {
        Dense { weight: Matrix::identity(dim), bias: vec![S::ZERO; dim] }
    }

    /// Uniform init in `±1/sqrt(in_dim)`.
    pub fn random(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (in_dim.max(1) as f64).sqrt();
        let data = (0..out_dim * in_dim)
            .map(|_| S::from_f64(rng.random_range(-scale..scale)))
            .collect();
        Dense {
            weight: Matrix::from_vec(out_dim, in_dim, data).unwrap(),
            bias: (0..out_dim).map(|_| S::from_f64(rng.random_range(-scale..scale))).collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Apply to every row of `x`.
    pub fn forward(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        let mut y = matmul_nt(x, &self.weight)?;
        for r in 0..y.rows() {
            let row = y.row_mut(r);
            for (v, &b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }

    pub fn forward_vec(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.in_dim() {
            return Err(Error::dim("dense", format!("input {} vs {}", x.len(), self.in_dim())));
        }
        let out = (0..self.out_dim()).map(|o| dot(self.weight.row(o), x) + self.bias[o]).collect();
        opcount::add((self.out_dim() * self.in_dim()) as u64);
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }

    pub fn cast<T: Scalar>(&self) -> Dense<T> {
        Dense {
            weight: self.weight.cast::<T>(),
            bias: self.bias.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_vec_path() {
        let d = Dense::new(
            Matrix::from_vec(2, 3, vec![1.0f64, 0.0, -1.0, 0.5, 2.0, 0.0]).unwrap(),
            vec![0.1, -0.2],
        )
        .unwrap();
        let x = Matrix::from_vec(1, 3, vec![2.0, 3.0, 4.0]).unwrap();
        let y = d.forward(&x).unwrap();
        let v = d.forward_vec(&[2.0, 3.0, 4.0]).unwrap();
        assert_eq!(y.row(0), v.as_slice());
        // 1*2 + 0*3 + -1*4 + 0.1 = -1.9
        assert!((y.get(0, 0) + 1.9).abs() < 1e-12);
    }
}
