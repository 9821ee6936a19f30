//! Transducer loss over the `T' x (U+1) x V` lattice.
//!
//! `rnnt_loss` runs the forward-backward recursion in log space with the
//! accumulation width chosen by the precision policy and returns analytic
//! gradients with respect to the logits. `rnnt_loss_bruteforce` enumerates
//! every monotone blank/emit path on tiny lattices; the two must agree, and
//! the gradient must match finite differences — both are asserted in tests.

use crate::error::{Error, Result};
use crate::kernel::{FloatWidth, Matrix, PrecisionPolicy, Scalar};
use crate::transducer::joiner::{joiner, JoinerParams};
use crate::transducer::BLANK;

/// Log-probability lattice for one utterance: `t_len` encoder frames,
/// `u_len` target tokens (so `u_len + 1` label contexts) and `vocab`
/// output symbols with blank at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RnntLattice<S: Scalar> {
    t_len: usize,
    u_len: usize,
    vocab: usize,
    logits: Vec<S>,
    log_probs: Vec<S>,
}

impl<S: Scalar> RnntLattice<S> {
    pub fn from_logits(t_len: usize, u_len: usize, vocab: usize, logits: Vec<S>) -> Result<Self> {
        if t_len == 0 || vocab < 2 {
            return Err(Error::arg("rnnt_lattice", "need at least one frame and two symbols"));
        }
        let expected = t_len * (u_len + 1) * vocab;
        if logits.len() != expected {
            return Err(Error::dim(
                "rnnt_lattice",
                format!("logits {} vs {}x{}x{}", logits.len(), t_len, u_len + 1, vocab),
            ));
        }
        let mut log_probs = vec![S::ZERO; logits.len()];
        for row in 0..t_len * (u_len + 1) {
            let chunk = &logits[row * vocab..(row + 1) * vocab];
            let out = &mut log_probs[row * vocab..(row + 1) * vocab];
            let mut max = S::NEG_INFINITY;
            for &v in chunk {
                max = max.maximum(v);
            }
            let mut sum = S::ZERO;
            for &v in chunk {
                sum += (v - max).exp();
            }
            let lse = max + sum.ln();
            for (o, &v) in out.iter_mut().zip(chunk) {
                *o = v - lse;
            }
        }
        Ok(RnntLattice { t_len, u_len, vocab, logits, log_probs })
    }

    #[inline]
    fn idx(&self, t: usize, u: usize, v: usize) -> usize {
        (t * (self.u_len + 1) + u) * self.vocab + v
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn u_len(&self) -> usize {
        self.u_len
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn logit(&self, t: usize, u: usize, v: usize) -> S {
        self.logits[self.idx(t, u, v)]
    }

    pub fn log_prob(&self, t: usize, u: usize, v: usize) -> S {
        self.log_probs[self.idx(t, u, v)]
    }

    /// Heap bytes of the stored lattice (logits + log-probs). Under the f32
    /// policy this is exactly half the f64 figure.
    pub fn storage_bytes(&self) -> usize {
        (self.logits.len() + self.log_probs.len()) * S::WIDTH
    }
}

/// Joint evaluation of encoder output x predictor output into a lattice.
pub fn build_lattice<S: Scalar>(
    enc: &Matrix<S>,
    pred: &Matrix<S>,
    joint: &JoinerParams<S>,
) -> Result<RnntLattice<S>> {
    let t_len = enc.rows();
    let u_plus_1 = pred.rows();
    if t_len == 0 || u_plus_1 == 0 {
        return Err(Error::EmptyInput("build_lattice"));
    }
    let vocab = joint.vocab();
    let mut logits = Vec::with_capacity(t_len * u_plus_1 * vocab);
    for t in 0..t_len {
        for u in 0..u_plus_1 {
            logits.extend(joiner(enc.row(t), pred.row(u), joint)?);
        }
    }
    RnntLattice::from_logits(t_len, u_plus_1 - 1, vocab, logits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransducerLossResult<S: Scalar> {
    pub neg_log_likelihood: S,
    /// Same layout as the lattice logits.
    pub grad_logits: Vec<S>,
}

fn validate_targets<S: Scalar>(lattice: &RnntLattice<S>, targets: &[usize]) -> Result<()> {
    if targets.len() != lattice.u_len {
        return Err(Error::dim(
            "rnnt_loss",
            format!("targets {} vs lattice U {}", targets.len(), lattice.u_len),
        ));
    }
    for &y in targets {
        if y == BLANK {
            return Err(Error::BlankInTargets);
        }
        if y >= lattice.vocab {
            return Err(Error::TokenOutOfRange { id: y, vocab: lattice.vocab });
        }
    }
    Ok(())
}

#[inline]
fn log_sum_exp<A: Scalar>(a: A, b: A) -> A {
    if a == A::NEG_INFINITY {
        return b;
    }
    if b == A::NEG_INFINITY {
        return a;
    }
    let m = a.maximum(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn loss_impl<S: Scalar, A: Scalar>(
    lattice: &RnntLattice<S>,
    targets: &[usize],
) -> TransducerLossResult<S> {
    let (t_len, u_len, vocab) = (lattice.t_len, lattice.u_len, lattice.vocab);
    let width = u_len + 1;
    let lp = |t: usize, u: usize, v: usize| -> A { A::from_f64(lattice.log_prob(t, u, v).to_f64()) };

    // forward: alpha[t][u] = log prob of consuming t frames and u labels
    let mut alpha = vec![A::NEG_INFINITY; t_len * width];
    alpha[0] = A::ZERO;
    for t in 0..t_len {
        for u in 0..width {
            if t == 0 && u == 0 {
                continue;
            }
            let mut acc = A::NEG_INFINITY;
            if t > 0 {
                acc = log_sum_exp(acc, alpha[(t - 1) * width + u] + lp(t - 1, u, BLANK));
            }
            if u > 0 {
                acc = log_sum_exp(acc, alpha[t * width + u - 1] + lp(t, u - 1, targets[u - 1]));
            }
            alpha[t * width + u] = acc;
        }
    }
    let total = alpha[(t_len - 1) * width + u_len] + lp(t_len - 1, u_len, BLANK);

    // backward: beta[t][u] = log prob of completing from (t, u), including
    // the final blank off the last frame
    let mut beta = vec![A::NEG_INFINITY; t_len * width];
    for t in (0..t_len).rev() {
        for u in (0..width).rev() {
            let mut acc = A::NEG_INFINITY;
            if t + 1 < t_len {
                acc = log_sum_exp(acc, lp(t, u, BLANK) + beta[(t + 1) * width + u]);
            } else if u == u_len {
                acc = lp(t, u, BLANK); // termination
            }
            if u < u_len {
                acc = log_sum_exp(acc, lp(t, u, targets[u]) + beta[t * width + u + 1]);
            }
            beta[t * width + u] = acc;
        }
    }

    // arc posteriors -> gradient of the NLL w.r.t. logits
    let mut grad = vec![S::ZERO; lattice.logits.len()];
    for t in 0..t_len {
        for u in 0..width {
            let a = alpha[t * width + u];
            if a == A::NEG_INFINITY {
                continue;
            }
            let blank_continue = if t + 1 < t_len {
                beta[(t + 1) * width + u]
            } else if u == u_len {
                A::ZERO
            } else {
                A::NEG_INFINITY
            };
            let p_blank = if blank_continue == A::NEG_INFINITY {
                A::ZERO
            } else {
                (a + lp(t, u, BLANK) + blank_continue - total).exp()
            };
            let p_emit = if u < u_len {
                (a + lp(t, u, targets[u]) + beta[t * width + u + 1] - total).exp()
            } else {
                A::ZERO
            };
            let occupancy = p_blank + p_emit;
            let base = lattice.idx(t, u, 0);
            for v in 0..vocab {
                let soft = lp(t, u, v).exp();
                let mut g = soft * occupancy;
                if v == BLANK {
                    g -= p_blank;
                }
                if u < u_len && v == targets[u] {
                    g -= p_emit;
                }
                grad[base + v] = S::from_f64(g.to_f64());
            }
        }
    }

    TransducerLossResult { neg_log_likelihood: S::from_f64(-total.to_f64()), grad_logits: grad }
}

/// Forward-backward transducer loss with analytic gradients. Accumulations
/// (the log-sum-exp recursions and posteriors) run at the policy's
/// accumulate width; inputs and outputs stay at the lattice's storage width.
pub fn rnnt_loss<S: Scalar>(
    lattice: &RnntLattice<S>,
    targets: &[usize],
    policy: PrecisionPolicy,
) -> Result<TransducerLossResult<S>> {
    validate_targets(lattice, targets)?;
    if policy.compute().bytes() != S::WIDTH {
        return Err(Error::arg(
            "rnnt_loss",
            format!("policy compute width {:?} vs lattice storage {} bytes", policy.compute(), S::WIDTH),
        ));
    }
    Ok(match policy.accumulate() {
        FloatWidth::F32 => loss_impl::<S, f32>(lattice, targets),
        FloatWidth::F64 => loss_impl::<S, f64>(lattice, targets),
    })
}

const BRUTE_FORCE_MAX_T: usize = 6;
const BRUTE_FORCE_MAX_U: usize = 4;

/// Exact reference: enumerate every monotone blank/emit path that produces
/// the target sequence (final arc is always the terminating blank off the
/// last frame), log-sum-exp their log-probabilities, and negate.
pub fn rnnt_loss_bruteforce<S: Scalar>(lattice: &RnntLattice<S>, targets: &[usize]) -> Result<f64> {
    validate_targets(lattice, targets)?;
    if lattice.t_len > BRUTE_FORCE_MAX_T || lattice.u_len > BRUTE_FORCE_MAX_U {
        return Err(Error::BruteForceTooLarge {
            t_len: lattice.t_len,
            u_len: lattice.u_len,
            max_t: BRUTE_FORCE_MAX_T,
            max_u: BRUTE_FORCE_MAX_U,
        });
    }
    let mut path_log_probs = Vec::new();
    walk(lattice, targets, 0, 0, 0.0, &mut path_log_probs);
    if path_log_probs.is_empty() {
        return Err(Error::arg("rnnt_loss_bruteforce", "no complete path"));
    }
    let max = path_log_probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = path_log_probs.iter().map(|&lp| (lp - max).exp()).sum();
    Ok(-(max + sum.ln()))
}

fn walk<S: Scalar>(
    lattice: &RnntLattice<S>,
    targets: &[usize],
    t: usize,
    u: usize,
    acc: f64,
    out: &mut Vec<f64>,
) {
    // blank arc: advances time; from the last frame it terminates the path
    // if and only if every target has been emitted
    let blank_lp = lattice.log_prob(t, u, BLANK).to_f64();
    if t + 1 < lattice.t_len {
        walk(lattice, targets, t + 1, u, acc + blank_lp, out);
    } else if u == lattice.u_len {
        out.push(acc + blank_lp);
    }
    // emit arc: advances the label index within the same frame
    if u < lattice.u_len {
        let emit_lp = lattice.log_prob(t, u, targets[u]).to_f64();
        walk(lattice, targets, t, u + 1, acc + emit_lp, out);
    }
}

/// Number of complete paths the brute-force enumeration visits.
pub fn bruteforce_path_count(t_len: usize, u_len: usize) -> u64 {
    fn count(t: usize, u: usize, t_len: usize, u_len: usize) -> u64 {
        let mut n = 0;
        if t + 1 < t_len {
            n += count(t + 1, u, t_len, u_len);
        } else if u == u_len {
            n += 1;
        }
        if u < u_len {
            n += count(t, u + 1, t_len, u_len);
        }
        n
    }
    count(0, 0, t_len, u_len)
}
