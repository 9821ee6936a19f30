use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{dot, opcount, Matrix, Scalar};

/// Weights of a single LSTM cell. Gate rows are packed `[input, forget,
/// cell, output]`, each block `hidden` rows tall.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights<S: Scalar> {
    /// `4*hidden x input`
    pub w_ih: Matrix<S>,
    /// `4*hidden x hidden`
    pub w_hh: Matrix<S>,
    /// `4*hidden`
    pub bias: Vec<S>,
}

impl<S: Scalar> LstmWeights<S> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmWeights {
            w_ih: Matrix::zeros(4 * hidden, input),
            w_hh: Matrix::zeros(4 * hidden, hidden),
            bias: vec![S::ZERO; 4 * hidden],
        }
    }

    pub fn random(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (hidden.max(1) as f64).sqrt();
        let mut draw = |rows: usize, cols: usize| {
            let data = (0..rows * cols).map(|_| S::from_f64(rng.random_range(-scale..scale)));
            Matrix::from_vec(rows, cols, data.collect()).unwrap()
        };
        LstmWeights {
            w_ih: draw(4 * hidden, input),
            w_hh: draw(4 * hidden, hidden),
            bias: (0..4 * hidden).map(|_| S::from_f64(rng.random_range(-scale..scale))).collect(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn param_count(&self) -> usize {
        self.w_ih.rows() * self.w_ih.cols() + self.w_hh.rows() * self.w_hh.cols() + self.bias.len()
    }

    pub fn cast<T: Scalar>(&self) -> LstmWeights<T> {
        LstmWeights {
            w_ih: self.w_ih.cast::<T>(),
            w_hh: self.w_hh.cast::<T>(),
            bias: self.bias.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }
}

#[inline]
fn sigmoid<S: Scalar>(v: S) -> S {
    S::ONE / (S::ONE + (-v).exp())
}

/// One step of the standard LSTM recurrence.
pub fn lstm_cell<S: Scalar>(
    x: &[S],
    h: &[S],
    c: &[S],
    w: &LstmWeights<S>,
) -> Result<(Vec<S>, Vec<S>)> {
    let hidden = w.hidden();
    if x.len() != w.input() || h.len() != hidden || c.len() != hidden {
        return Err(Error::dim(
            "lstm_cell",
            format!("x {} h {} c {} vs input {} hidden {}", x.len(), h.len(), c.len(), w.input(), hidden),
        ));
    }
    let mut gates = vec![S::ZERO; 4 * hidden];
    for (g, gate) in gates.iter_mut().enumerate() {
        *gate = dot(w.w_ih.row(g), x) + dot(w.w_hh.row(g), h) + w.bias[g];
    }
    opcount::add((4 * hidden * (w.input() + hidden)) as u64);

    let mut h_next = vec![S::ZERO; hidden];
    let mut c_next = vec![S::ZERO; hidden];
    for j in 0..hidden {
        let i_gate = sigmoid(gates[j]);
        let f_gate = sigmoid(gates[hidden + j]);
        let g_gate = gates[2 * hidden + j].tanh();
        let o_gate = sigmoid(gates[3 * hidden + j]);
        c_next[j] = f_gate * c[j] + i_gate * g_gate;
        h_next[j] = o_gate * c_next[j].tanh();
    }
    Ok((h_next, c_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Plain transcription of the gate equations, kept separate from the
    /// packed-weight implementation above.
    fn reference_cell(x: &[f64], h: &[f64], c: &[f64], w: &LstmWeights<f64>) -> (Vec<f64>, Vec<f64>) {
        let hd = w.hidden();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let gate = |block: usize, j: usize| -> f64 {
            let row = block * hd + j;
            let mut acc = w.bias[row];
            for (k, &xv) in x.iter().enumerate() {
                acc += w.w_ih.get(row, k) * xv;
            }
            for (k, &hv) in h.iter().enumerate() {
                acc += w.w_hh.get(row, k) * hv;
            }
            acc
        };
        let mut hn = vec![0.0; hd];
        let mut cn = vec![0.0; hd];
        for j in 0..hd {
            let i = sig(gate(0, j));
            let f = sig(gate(1, j));
            let g = gate(2, j).tanh();
            let o = sig(gate(3, j));
            cn[j] = f * c[j] + i * g;
            hn[j] = o * cn[j].tanh();
        }
        (hn, cn)
    }

    #[test]
    fn zero_weights_zero_state_stay_zero() {
        let w = LstmWeights::<f64>::zeros(3, 2);
        let (h, c) = lstm_cell(&[1.0, -2.0, 0.5], &[0.0; 2], &[0.0; 2], &w).unwrap();
        assert_eq!(h, vec![0.0; 2]);
        assert_eq!(c, vec![0.0; 2]);
    }

    #[test]
    fn saturated_forget_gate_preserves_cell() {
        // forget bias 20 => f ~ 1, so c' ~ c + i*g
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut w = LstmWeights::<f64>::random(2, 3, &mut rng);
        for j in 0..3 {
            w.bias[3 + j] = 20.0;
        }
        let x = [0.3, -0.8];
        let h = [0.1, 0.2, -0.4];
        let c = [0.5, -1.0, 2.0];
        let (_, c_next) = lstm_cell(&x, &h, &c, &w).unwrap();
        // recompute i*g with the same gates
        for j in 0..3 {
            let mut zi = w.bias[j];
            let mut zg = w.bias[6 + j];
            for (k, &xv) in x.iter().enumerate() {
                zi += w.w_ih.get(j, k) * xv;
                zg += w.w_ih.get(6 + j, k) * xv;
            }
            for (k, &hv) in h.iter().enumerate() {
                zi += w.w_hh.get(j, k) * hv;
                zg += w.w_hh.get(6 + j, k) * hv;
            }
            let expected = c[j] + (1.0 / (1.0 + (-zi).exp())) * zg.tanh();
            assert!((c_next[j] - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn matches_reference_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = LstmWeights::<f64>::random(4, 5, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (h1, c1) = lstm_cell(&x, &h, &c, &w).unwrap();
        let (h2, c2) = reference_cell(&x, &h, &c, &w);
        for j in 0..5 {
            assert!((h1[j] - h2[j]).abs() < 1e-6);
            assert!((c1[j] - c2[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch_errors() {
        let w = LstmWeights::<f64>::zeros(3, 2);
        assert!(lstm_cell(&[1.0; 2], &[0.0; 2], &[0.0; 2], &w).is_err());
    }
}
