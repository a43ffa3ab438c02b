//! Reinforcement refinement of a tabular policy with the score-function
//! estimator and a moving-average reward baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sage_core::estimator::{inverse_gradient_estimate, CategoricalSeqPolicy, ScorePolicy};

use crate::error::{AgentError, AgentResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RlOptions {
    pub updates: usize,
    pub samples_per_update: usize,
    pub lr: f64,
    /// Weight kept by the old baseline each update; 0 tracks the latest
    /// batch only, values near 1 average over a long horizon.
    pub baseline_decay: f64,
    pub seed: u64,
}

impl Default for RlOptions {
    fn default() -> Self {
        Self {
            updates: 200,
            samples_per_update: 64,
            lr: 0.1,
            baseline_decay: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlReport {
    /// Batch mean reward before each update.
    pub mean_rewards: Vec<f64>,
    /// Baseline value after folding in each batch.
    pub baselines: Vec<f64>,
}

/// Ascend E[R] in place. Each update draws one batch, estimates the
/// gradient against the running baseline, applies it, then folds the
/// batch mean into the baseline.
pub fn rl_refine(
    policy: &mut CategoricalSeqPolicy,
    reward: impl Fn(&[usize]) -> f64,
    opts: &RlOptions,
) -> AgentResult<RlReport> {
    if opts.samples_per_update == 0 {
        return Err(AgentError::InvalidArgument(
            "samples_per_update must be >= 1".into(),
        ));
    }
    if !opts.lr.is_finite() || opts.lr <= 0.0 {
        return Err(AgentError::InvalidArgument(format!("bad lr {}", opts.lr)));
    }
    if !(0.0..=1.0).contains(&opts.baseline_decay) {
        return Err(AgentError::InvalidArgument(format!(
            "baseline_decay must sit in [0, 1], got {}",
            opts.baseline_decay
        )));
    }

    let mut baseline = 0.0;
    let mut report = RlReport {
        mean_rewards: Vec::with_capacity(opts.updates),
        baselines: Vec::with_capacity(opts.updates),
    };
    for update in 0..opts.updates {
        let seed = opts.seed.wrapping_add(update as u64);
        let grad = inverse_gradient_estimate(
            policy,
            &reward,
            opts.samples_per_update,
            baseline,
            seed,
        )?;
        // the same seed replays the estimator's exact sample stream
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch_mean = (0..opts.samples_per_update)
            .map(|_| reward(&policy.sample(&mut rng)))
            .sum::<f64>()
            / opts.samples_per_update as f64;

        policy.apply_update(&grad, opts.lr);
        baseline = opts.baseline_decay * baseline + (1.0 - opts.baseline_decay) * batch_mean;
        report.mean_rewards.push(batch_mean);
        report.baselines.push(baseline);
    }
    Ok(report)
}
