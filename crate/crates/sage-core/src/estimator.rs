//! Score-function (REINFORCE) gradient estimation with a baseline.
//!
//! The estimator is (1/N)·Σ ∇log P(z)·(R(z) − b). Any constant baseline b
//! leaves the expectation unchanged because E[∇log P(z)] = 0; a good
//! baseline shrinks the variance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, CoreResult};
use crate::model::{log_softmax_f64, sample_index, softmax_f64};

/// A stochastic policy over token sequences with a differentiable log-prob.
pub trait ScorePolicy {
    fn param_len(&self) -> usize;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize>;
    fn log_prob(&self, trace: &[usize]) -> f64;
    /// Adds `scale · ∇ log P(trace)` into `out` (length `param_len`).
    fn add_grad_log_prob(&self, trace: &[usize], scale: f64, out: &mut [f64]);
}

/// Monte Carlo estimate of ∇ E[R(z)] over `num_samples` draws,
/// deterministic per seed.
pub fn inverse_gradient_estimate<P: ScorePolicy>(
    policy: &P,
    reward: impl Fn(&[usize]) -> f64,
    num_samples: usize,
    baseline: f64,
    seed: u64,
) -> CoreResult<Vec<f64>> {
    if num_samples == 0 {
        return Err(CoreError::InvalidArgument(
            "inverse_gradient_estimate: num_samples must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; policy.param_len()];
    let inv_n = 1.0 / num_samples as f64;
    for _ in 0..num_samples {
        let z = policy.sample(&mut rng);
        let advantage = reward(&z) - baseline;
        policy.add_grad_log_prob(&z, advantage * inv_n, &mut out);
    }
    Ok(out)
}

/// Factorized categorical policy: an independent softmax per step.
/// Parameters are the flattened per-step logits, row-major
/// `[step][token]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalSeqPolicy {
    logits: Vec<Vec<f64>>,
}

impl CategoricalSeqPolicy {
    pub fn new(logits: Vec<Vec<f64>>) -> CoreResult<Self> {
        if logits.is_empty() || logits.iter().any(|row| row.len() < 2) {
            return Err(CoreError::InvalidArgument(
                "policy needs >= 1 step and >= 2 tokens per step".into(),
            ));
        }
        let w = logits[0].len();
        if logits.iter().any(|row| row.len() != w) {
            return Err(CoreError::InvalidArgument(
                "all steps must share one vocab size".into(),
            ));
        }
        Ok(Self { logits })
    }

    pub fn uniform(steps: usize, vocab: usize) -> CoreResult<Self> {
        Self::new(vec![vec![0.0; vocab]; steps])
    }

    pub fn steps(&self) -> usize {
        self.logits.len()
    }

    pub fn vocab(&self) -> usize {
        self.logits[0].len()
    }

    pub fn step_probs(&self, t: usize) -> Vec<f64> {
        softmax_f64(&self.logits[t])
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.logits
    }

    /// Applies a flat parameter update in the `param_len` layout.
    pub fn apply_update(&mut self, delta: &[f64], scale: f64) {
        assert_eq!(delta.len(), self.param_len());
        let v = self.vocab();
        for (t, row) in self.logits.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x += scale * delta[t * v + j];
            }
        }
    }

    /// All `vocab^steps` sequences with their probabilities. Only sensible
    /// for tiny policies; callers own the blow-up check.
    pub fn enumerate(&self) -> Vec<(Vec<usize>, f64)> {
        let v = self.vocab();
        let probs: Vec<Vec<f64>> = (0..self.steps()).map(|t| self.step_probs(t)).collect();
        let mut out: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
        for step_probs in &probs {
            let mut next = Vec::with_capacity(out.len() * v);
            for (prefix, p) in &out {
                for (tok, &tp) in step_probs.iter().enumerate() {
                    let mut seq = prefix.clone();
                    seq.push(tok);
                    next.push((seq, p * tp));
                }
            }
            out = next;
        }
        out
    }
}

impl ScorePolicy for CategoricalSeqPolicy {
    fn param_len(&self) -> usize {
        self.steps() * self.vocab()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.steps())
            .map(|t| sample_index(&self.step_probs(t), rng))
            .collect()
    }

    fn log_prob(&self, trace: &[usize]) -> f64 {
        assert_eq!(trace.len(), self.steps());
        trace
            .iter()
            .enumerate()
            .map(|(t, &tok)| log_softmax_f64(&self.logits[t])[tok])
            .sum()
    }

    fn add_grad_log_prob(&self, trace: &[usize], scale: f64, out: &mut [f64]) {
        assert_eq!(trace.len(), self.steps());
        assert_eq!(out.len(), self.param_len());
        let v = self.vocab();
        for (t, &tok) in trace.iter().enumerate() {
            let probs = self.step_probs(t);
            for (j, &p) in probs.iter().enumerate() {
                let onehot = if j == tok { 1.0 } else { 0.0 };
                out[t * v + j] += scale * (onehot - p);
            }
        }
    }
}
