//! Label-history network: token embedding into a single LSTM layer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{lstm_cell, LstmWeights, Matrix, Scalar};
use crate::transducer::BLANK;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams<S: Scalar> {
    /// `vocab x embed_dim`; row 0 embeds the blank used as start-of-stream.
    pub embedding: Matrix<S>,
    pub lstm: LstmWeights<S>,
}

impl<S: Scalar> PredictorParams<S> {
    pub fn random(vocab: usize, embed_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let data = (0..vocab * embed_dim).map(|_| S::from_f64(rng.random_range(-0.5..0.5)));
        PredictorParams {
            embedding: Matrix::from_vec(vocab, embed_dim, data.collect()).unwrap(),
            lstm: LstmWeights::random(embed_dim, hidden, rng),
        }
    }

    pub fn vocab(&self) -> usize {
        self.embedding.rows()
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden()
    }

    pub fn param_count(&self) -> usize {
        self.embedding.rows() * self.embedding.cols() + self.lstm.param_count()
    }
}

/// LSTM carry between calls.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<S: Scalar> {
    pub h: Vec<S>,
    pub c: Vec<S>,
}

impl<S: Scalar> LstmState<S> {
    pub fn zeros(hidden: usize) -> Self {
        LstmState { h: vec![S::ZERO; hidden], c: vec![S::ZERO; hidden] }
    }
}

/// Run the predictor over a token sequence.
///
/// Stateless (`state == None`): a blank start step is prepended, so the
/// output has `U + 1` rows — row 0 is the blank-context output and row `u`
/// conditions on `tokens[0..u]`. Stateful: the recurrence continues from
/// `state` and emits exactly one row per token, so splitting a sequence
/// across two calls reproduces the single-call output.
pub fn predictor_forward<S: Scalar>(
    tokens: &[usize],
    params: &PredictorParams<S>,
    state: Option<&LstmState<S>>,
) -> Result<(Matrix<S>, LstmState<S>)> {
    for &t in tokens {
        if t >= params.vocab() {
            return Err(Error::TokenOutOfRange { id: t, vocab: params.vocab() });
        }
    }
    let hidden = params.hidden();
    let mut current = match state {
        Some(s) => {
            if s.h.len() != hidden || s.c.len() != hidden {
                return Err(Error::dim("predictor", "state width vs lstm hidden"));
            }
            s.clone()
        }
        None => LstmState::zeros(hidden),
    };
    let mut rows: Vec<Vec<S>> = Vec::with_capacity(tokens.len() + 1);
    let mut step = |token: usize, current: &mut LstmState<S>| -> Result<()> {
        let (h, c) = lstm_cell(params.embedding.row(token), &current.h, &current.c, &params.lstm)?;
        current.h = h;
        current.c = c;
        rows.push(current.h.clone());
        Ok(())
    };
    if state.is_none() {
        step(BLANK, &mut current)?;
    }
    for &t in tokens {
        step(t, &mut current)?;
    }
    Ok((Matrix::from_rows(&rows)?, current))
}
