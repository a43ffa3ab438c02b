//! Entropy-gated fast/slow mode switching and its cost ledger.

use crate::error::{CoreError, CoreResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Normal,
    Reasoning,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateDecision {
    /// Next-step entropy in nats.
    pub entropy: f64,
    pub mode: Mode,
    pub threshold: f64,
}

/// Shannon entropy (nats) of the softmax of `logits`. `-inf` entries carry
/// zero probability and are fine; NaN or `+inf` entries, or a row with no
/// finite entry, are rejected.
pub fn step_entropy(logits: &[f64]) -> CoreResult<f64> {
    if logits.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(CoreError::InvalidArgument(
            "step_entropy: logits must not contain NaN or +inf".into(),
        ));
    }
    if !logits.iter().any(|x| x.is_finite()) {
        return Err(CoreError::InvalidArgument(
            "step_entropy: needs at least one finite logit".into(),
        ));
    }
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&x| (x - mx).exp()).sum();
    let mut h = 0.0;
    for &x in logits {
        let p = (x - mx).exp() / sum;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    Ok(h)
}

/// Reasoning iff the entropy strictly exceeds τ. Total: at the boundary the
/// gate stays Normal, and a non-finite τ simply never (or always) fires.
pub fn gate(entropy: f64, tau: f64) -> GateDecision {
    let mode = if entropy > tau {
        Mode::Reasoning
    } else {
        Mode::Normal
    };
    GateDecision {
        entropy,
        mode,
        threshold: tau,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostLedger {
    pub n_steps: usize,
    pub n_slow: usize,
    pub c_base: f64,
    pub c_mch: f64,
    /// Switching rate n_slow / n_steps.
    pub mu: f64,
    pub c_total: f64,
}

impl CostLedger {
    /// The bound the ledger must satisfy: N·(c_base + μ·c_mch). With the
    /// per-step prices used here it is met with equality.
    pub fn bound(&self) -> f64 {
        self.n_steps as f64 * (self.c_base + self.mu * self.c_mch)
    }
}

/// Prices a decision trace: fast steps cost c_base, slow steps
/// c_base + c_mch.
pub fn cost_account(trace: &[GateDecision], c_base: f64, c_mch: f64) -> CoreResult<CostLedger> {
    if trace.is_empty() {
        return Err(CoreError::InvalidArgument(
            "cost_account: empty trace".into(),
        ));
    }
    if !(c_base >= 0.0) || !(c_mch >= 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "cost_account: costs must be >= 0, got {c_base} and {c_mch}"
        )));
    }
    let n = trace.len();
    let n_slow = trace.iter().filter(|d| d.mode == Mode::Reasoning).count();
    let c_total = n as f64 * c_base + n_slow as f64 * c_mch;
    Ok(CostLedger {
        n_steps: n,
        n_slow,
        c_base,
        c_mch,
        mu: n_slow as f64 / n as f64,
        c_total,
    })
}
