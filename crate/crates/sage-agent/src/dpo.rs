//! Preference loss over chosen/rejected pairs and a tabular refinement
//! step that descends it.
//!
//! loss = mean over pairs of -ln sigma(beta * m) where the margin m is
//! (log pi - log ref) on the chosen minus the same on the rejected.
//! Identical policy and reference give -ln sigma(0) = ln 2 regardless
//! of beta, which pins the scale of the loss.

use sage_core::estimator::{CategoricalSeqPolicy, ScorePolicy};

use crate::error::{AgentError, AgentResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLogps {
    pub policy_chosen: f64,
    pub policy_rejected: f64,
    pub ref_chosen: f64,
    pub ref_rejected: f64,
}

impl PairLogps {
    pub fn margin(&self) -> f64 {
        (self.policy_chosen - self.ref_chosen) - (self.policy_rejected - self.ref_rejected)
    }
}

/// ln(1 + e^x) without overflow on either side.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn dpo_loss(pairs: &[PairLogps], beta: f64) -> AgentResult<f64> {
    if pairs.is_empty() {
        return Err(AgentError::EmptyInput("dpo_loss needs pairs".into()));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(AgentError::InvalidArgument(format!(
            "beta must be finite and nonnegative, got {beta}"
        )));
    }
    let total: f64 = pairs.iter().map(|p| softplus(-beta * p.margin())).sum();
    Ok(total / pairs.len() as f64)
}

/// Gradient descent on the preference loss for a tabular policy whose
/// actions are the traces in `pairs`. The reference stays frozen.
/// Returns the loss before each epoch plus the final loss.
pub fn dpo_refine(
    policy: &mut CategoricalSeqPolicy,
    reference: &CategoricalSeqPolicy,
    pairs: &[(Vec<usize>, Vec<usize>)],
    beta: f64,
    lr: f64,
    epochs: usize,
) -> AgentResult<Vec<f64>> {
    if pairs.is_empty() {
        return Err(AgentError::EmptyInput("dpo_refine needs pairs".into()));
    }
    if !beta.is_finite() || beta < 0.0 || !lr.is_finite() || lr <= 0.0 {
        return Err(AgentError::InvalidArgument(format!(
            "bad beta {beta} or lr {lr}"
        )));
    }
    for (chosen, rejected) in pairs {
        if chosen.len() != policy.steps() || rejected.len() != policy.steps() {
            return Err(AgentError::InvalidArgument(
                "trace length must match the policy's step count".into(),
            ));
        }
    }

    let current_loss = |policy: &CategoricalSeqPolicy| -> AgentResult<f64> {
        let logps: Vec<PairLogps> = pairs
            .iter()
            .map(|(c, r)| PairLogps {
                policy_chosen: policy.log_prob(c),
                policy_rejected: policy.log_prob(r),
                ref_chosen: reference.log_prob(c),
                ref_rejected: reference.log_prob(r),
            })
            .collect();
        dpo_loss(&logps, beta)
    };

    let n = pairs.len() as f64;
    let mut losses = Vec::with_capacity(epochs + 1);
    for _ in 0..epochs {
        losses.push(current_loss(policy)?);
        let mut grad = vec![0.0; policy.param_len()];
        for (chosen, rejected) in pairs {
            let z = beta
                * ((policy.log_prob(chosen) - reference.log_prob(chosen))
                    - (policy.log_prob(rejected) - reference.log_prob(rejected)));
            // d(-ln sigma(z))/dz = -sigma(-z); descend through both traces
            let coeff = sigmoid(-z) * beta / n;
            policy.add_grad_log_prob(chosen, coeff, &mut grad);
            policy.add_grad_log_prob(rejected, -coeff, &mut grad);
        }
        policy.apply_update(&grad, lr);
    }
    losses.push(current_loss(policy)?);
    Ok(losses)
}
