//! Greedy transducer decoding, streamable over encoder chunks: partial
//! hypotheses come out as soon as their frames do.

use rand::Rng;

use crate::error::Result;
use crate::kernel::{Matrix, Scalar};
use crate::transducer::joiner::{joiner, JoinerParams};
use crate::transducer::predictor::{predictor_forward, LstmState, PredictorParams};
use crate::transducer::BLANK;

/// Cap on non-blank emissions per frame; prevents livelock on models that
/// never prefer blank.
pub const MAX_EMITS_PER_FRAME: usize = 10;

/// Predictor plus joiner; the decoder side of the transducer.
#[derive(Debug, Clone, PartialEq)]
pub struct TransducerParams<S: Scalar> {
    pub predictor: PredictorParams<S>,
    pub joiner: JoinerParams<S>,
}

impl<S: Scalar> TransducerParams<S> {
    pub fn random(
        vocab: usize,
        enc_dim: usize,
        embed_dim: usize,
        pred_hidden: usize,
        joint_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        TransducerParams {
            predictor: PredictorParams::random(vocab, embed_dim, pred_hidden, rng),
            joiner: JoinerParams::random(enc_dim, pred_hidden, joint_dim, vocab, rng),
        }
    }
}

/// Carry between decode calls: the predictor recurrence, its current output
/// vector, and the last emitted token.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeState<S: Scalar> {
    lstm: LstmState<S>,
    pred_out: Vec<S>,
    pub last_token: usize,
}

impl<S: Scalar> DecodeState<S> {
    /// Blank-context start state.
    pub fn new(model: &TransducerParams<S>) -> Result<Self> {
        let (out, lstm) = predictor_forward(&[], &model.predictor, None)?;
        Ok(DecodeState { lstm, pred_out: out.row(0).to_vec(), last_token: BLANK })
    }

    fn advance(&mut self, token: usize, model: &TransducerParams<S>) -> Result<()> {
        let (out, lstm) = predictor_forward(&[token], &model.predictor, Some(&self.lstm))?;
        self.lstm = lstm;
        self.pred_out = out.row(0).to_vec();
        self.last_token = token;
        Ok(())
    }
}

fn argmax<S: Scalar>(logits: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Greedy-decode one chunk of encoder frames, mutating the carried state.
/// Per frame: take the argmax of the joint; emit and advance the predictor
/// on non-blank (up to [`MAX_EMITS_PER_FRAME`]), move on at blank.
pub fn greedy_decode_streaming<S: Scalar>(
    enc_chunk: &Matrix<S>,
    state: &mut DecodeState<S>,
    model: &TransducerParams<S>,
) -> Result<Vec<usize>> {
    let mut emitted = Vec::new();
    for t in 0..enc_chunk.rows() {
        let enc_row = enc_chunk.row(t);
        let mut emits_here = 0;
        loop {
            let logits = joiner(enc_row, &state.pred_out, &model.joiner)?;
            let best = argmax(&logits);
            if best == BLANK || emits_here >= MAX_EMITS_PER_FRAME {
                break;
            }
            emitted.push(best);
            state.advance(best, model)?;
            emits_here += 1;
        }
    }
    Ok(emitted)
}

/// Whole-utterance greedy decode from a fresh state.
pub fn greedy_decode<S: Scalar>(
    enc: &Matrix<S>,
    model: &TransducerParams<S>,
) -> Result<Vec<usize>> {
    let mut state = DecodeState::new(model)?;
    greedy_decode_streaming(enc, &mut state, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Activation, Dense};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_enc(t: usize, d: usize, rng: &mut impl Rng) -> Matrix<f64> {
        let data = (0..t * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(t, d, data).unwrap()
    }

    #[test]
    fn blank_favoring_model_emits_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(307);
        let mut model = TransducerParams::<f64>::random(5, 3, 2, 4, 4, &mut rng);
        model.joiner.out_proj.bias[BLANK] = 50.0;
        let enc = random_enc(6, 3, &mut rng);
        assert!(greedy_decode(&enc, &model).unwrap().is_empty());
    }

    #[test]
    fn chunked_decode_equals_whole_utterance() {
        let mut rng = ChaCha8Rng::seed_from_u64(311);
        for trial in 0..20 {
            let model = TransducerParams::<f64>::random(6, 4, 3, 5, 4, &mut rng);
            let t = rng.random_range(3..=24);
            let enc = random_enc(t, 4, &mut rng);
            let whole = greedy_decode(&enc, &model).unwrap();

            let mut state = DecodeState::new(&model).unwrap();
            let mut chunked = Vec::new();
            let mut start = 0;
            while start < t {
                let end = (start + rng.random_range(1..=4)).min(t);
                chunked.extend(
                    greedy_decode_streaming(&enc.row_slice(start, end), &mut state, &model)
                        .unwrap(),
                );
                start = end;
            }
            assert_eq!(chunked, whole, "trial {trial}");
        }
    }

    #[test]
    fn emit_cap_prevents_livelock() {
        // joiner that can never prefer blank: huge bias on symbol 2
        let mut rng = ChaCha8Rng::seed_from_u64(313);
        let mut model = TransducerParams::<f64>::random(4, 2, 2, 3, 3, &mut rng);
        model.joiner.out_proj = Dense::new(
            Matrix::zeros(4, 3),
            vec![0.0, 0.0, 100.0, 0.0],
        )
        .unwrap();
        model.joiner.activation = Activation::Tanh;
        let enc = random_enc(3, 2, &mut rng);
        let out = greedy_decode(&enc, &model).unwrap();
        assert_eq!(out.len(), 3 * MAX_EMITS_PER_FRAME);
        assert!(out.iter().all(|&t| t == 2));
    }
}
