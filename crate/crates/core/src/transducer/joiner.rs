//! Joint network: encoder and predictor vectors are projected to a common
//! width, summed, passed through one nonlinearity, and projected to logits.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{Activation, Dense, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct JoinerParams<S: Scalar> {
    pub enc_proj: Dense<S>,
    pub pred_proj: Dense<S>,
    pub out_proj: Dense<S>,
    pub activation: Activation,
}

impl<S: Scalar> JoinerParams<S> {
    pub fn new(
        enc_proj: Dense<S>,
        pred_proj: Dense<S>,
        out_proj: Dense<S>,
        activation: Activation,
    ) -> Result<Self> {
        if enc_proj.out_dim() != pred_proj.out_dim() || out_proj.in_dim() != enc_proj.out_dim() {
            return Err(Error::dim("joiner", "projection widths disagree"));
        }
        Ok(JoinerParams { enc_proj, pred_proj, out_proj, activation })
    }

    pub fn random(
        enc_dim: usize,
        pred_dim: usize,
        joint_dim: usize,
        vocab: usize,
        rng: &mut impl Rng,
    ) -> Self {
        JoinerParams {
            enc_proj: Dense::random(joint_dim, enc_dim, rng),
            pred_proj: Dense::random(joint_dim, pred_dim, rng),
            out_proj: Dense::random(vocab, joint_dim, rng),
            activation: Activation::Tanh,
        }
    }

    pub fn vocab(&self) -> usize {
        self.out_proj.out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.enc_proj.param_count() + self.pred_proj.param_count() + self.out_proj.param_count()
    }
}

fn apply_scalar_activation<S: Scalar>(v: S, kind: Activation) -> S {
    match kind {
        Activation::Identity => v,
        Activation::Tanh => v.tanh(),
        Activation::Relu => {
            if v > S::ZERO {
                v
            } else {
                S::ZERO
            }
        }
        Activation::Sigmoid => S::ONE / (S::ONE + (-v).exp()),
        Activation::Silu => v * (S::ONE / (S::ONE + (-v).exp())),
        Activation::Gelu => {
            let c = S::from_f64(0.7978845608028654);
            let k = S::from_f64(0.044715);
            S::from_f64(0.5) * v * (S::ONE + (c * (v + k * v * v * v)).tanh())
        }
        Activation::Glu => v, // gating needs paired columns; not meaningful here
    }
}

/// Logits over the vocabulary for one (frame, label-history) pair.
pub fn joiner<S: Scalar>(enc_t: &[S], pred_u: &[S], p: &JoinerParams<S>) -> Result<Vec<S>> {
    let mut z = p.enc_proj.forward_vec(enc_t)?;
    let zp = p.pred_proj.forward_vec(pred_u)?;
    for (a, &b) in z.iter_mut().zip(&zp) {
        *a += b;
    }
    for v in &mut z {
        *v = apply_scalar_activation(*v, p.activation);
    }
    p.out_proj.forward_vec(&z)
}
