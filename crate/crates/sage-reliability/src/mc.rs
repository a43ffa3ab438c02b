//! Monte Carlo cross-checks for the closed forms.
//!
//! Every simulator is a pure function of its seed, so batches can be
//! partitioned across threads by giving each partition its own seed and
//! averaging the results.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::check_prob;
use crate::error::{ReliabilityError, ReliabilityResult};

/// Standard error of a proportion estimated from `trials` draws.
pub fn binomial_se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

fn check_trials(trials: u64) -> ReliabilityResult<()> {
    if trials == 0 {
        return Err(ReliabilityError::InvalidArgument(
            "needs at least one trial".into(),
        ));
    }
    Ok(())
}

/// Fraction of simulated `n`-step chains with no error at all.
pub fn mc_chain_success(eps: f64, n: usize, trials: u64, seed: u64) -> ReliabilityResult<f64> {
    check_prob("eps", eps)?;
    check_trials(trials)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0u64;
    'chain: for _ in 0..trials {
        for _ in 0..n {
            if rng.random::<f64>() < eps {
                continue 'chain;
            }
        }
        ok += 1;
    }
    Ok(ok as f64 / trials as f64)
}

/// Simulates detect-and-retry per step: fail with `eps`; a failure is
/// flagged with `alpha`; a flagged step is redone once with error rate
/// `eps_retry`. Returns the fraction of steps still wrong.
pub fn mc_effective_error(
    eps: f64,
    alpha: f64,
    eps_retry: f64,
    trials: u64,
    seed: u64,
) -> ReliabilityResult<f64> {
    check_prob("eps", eps)?;
    check_prob("alpha", alpha)?;
    check_prob("eps_retry", eps_retry)?;
    check_trials(trials)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wrong = 0u64;
    for _ in 0..trials {
        if rng.random::<f64>() < eps {
            if rng.random::<f64>() < alpha {
                if rng.random::<f64>() < eps_retry {
                    wrong += 1;
                }
            } else {
                wrong += 1;
            }
        }
    }
    Ok(wrong as f64 / trials as f64)
}

/// Simulates one gated step: the slow path engages with `s_engage`; the base
/// attempt succeeds with `p`; an engaged, failed step is flagged with
/// `alpha` and then repaired with `p_recovered`.
pub fn mc_hybrid_success_step(
    p: f64,
    s_engage: f64,
    alpha: f64,
    p_recovered: f64,
    trials: u64,
    seed: u64,
) -> ReliabilityResult<f64> {
    check_prob("p", p)?;
    check_prob("s_engage", s_engage)?;
    check_prob("alpha", alpha)?;
    check_prob("p_recovered", p_recovered)?;
    check_trials(trials)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0u64;
    for _ in 0..trials {
        let engaged = rng.random::<f64>() < s_engage;
        let mut success = rng.random::<f64>() < p;
        if !success && engaged && rng.random::<f64>() < alpha {
            success = rng.random::<f64>() < p_recovered;
        }
        if success {
            ok += 1;
        }
    }
    Ok(ok as f64 / trials as f64)
}

/// Detect-and-retry outcome when the detector can also false-alarm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Fraction of steps that end up wrong.
    pub error_rate: f64,
    /// Fraction of steps that were redone.
    pub retry_rate: f64,
}

/// Closed form for the false-alarm extension of `effective_error`: a correct
/// step is flagged anyway with probability 1 - `beta_spec` and redone, and
/// the redo can spoil it. `beta_spec` = 1 collapses to `effective_error`.
pub fn detector_model(
    eps: f64,
    alpha: f64,
    beta_spec: f64,
    eps_retry: f64,
) -> ReliabilityResult<DetectorModel> {
    check_prob("eps", eps)?;
    check_prob("alpha", alpha)?;
    check_prob("beta_spec", beta_spec)?;
    check_prob("eps_retry", eps_retry)?;
    let false_alarm = 1.0 - beta_spec;
    Ok(DetectorModel {
        error_rate: eps * (1.0 - alpha) + eps * alpha * eps_retry
            + (1.0 - eps) * false_alarm * eps_retry,
        retry_rate: eps * alpha + (1.0 - eps) * false_alarm,
    })
}

/// Monte Carlo companion to `detector_model`.
pub fn mc_detector_model(
    eps: f64,
    alpha: f64,
    beta_spec: f64,
    eps_retry: f64,
    trials: u64,
    seed: u64,
) -> ReliabilityResult<DetectorModel> {
    check_prob("eps", eps)?;
    check_prob("alpha", alpha)?;
    check_prob("beta_spec", beta_spec)?;
    check_prob("eps_retry", eps_retry)?;
    check_trials(trials)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wrong = 0u64;
    let mut retried = 0u64;
    for _ in 0..trials {
        let failed = rng.random::<f64>() < eps;
        let flagged = if failed {
            rng.random::<f64>() < alpha
        } else {
            rng.random::<f64>() >= beta_spec
        };
        if flagged {
            retried += 1;
            if rng.random::<f64>() < eps_retry {
                wrong += 1;
            }
        } else if failed {
            wrong += 1;
        }
    }
    Ok(DetectorModel {
        error_rate: wrong as f64 / trials as f64,
        retry_rate: retried as f64 / trials as f64,
    })
}
