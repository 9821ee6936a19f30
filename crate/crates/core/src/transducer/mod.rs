//! Transducer head: LSTM predictor, sum-then-project joiner, the
//! precision-configurable loss with its brute-force oracle, and greedy
//! streaming decoding.

mod decode;
mod joiner;
mod loss;
mod predictor;

/// Blank symbol id, fixed at index 0 throughout.
pub const BLANK: usize = 0;

pub use decode::{
    greedy_decode, greedy_decode_streaming, DecodeState, TransducerParams, MAX_EMITS_PER_FRAME,
};
pub use joiner::{joiner, JoinerParams};
pub use loss::{
    build_lattice, bruteforce_path_count, rnnt_loss, rnnt_loss_bruteforce, RnntLattice,
    TransducerLossResult,
};
pub use predictor::{predictor_forward, LstmState, PredictorParams};
