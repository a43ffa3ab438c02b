//! Closed-form success and error models for multi-step chains.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ReliabilityError, ReliabilityResult};

pub(crate) fn check_prob(name: &str, p: f64) -> ReliabilityResult<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ReliabilityError::InvalidArgument(format!(
            "{name} must be a probability in [0,1], got {p}"
        )))
    }
}

/// Probability that all `n` independent steps succeed: (1-eps)^n.
pub fn chain_success(eps: f64, n: usize) -> ReliabilityResult<f64> {
    check_prob("eps", eps)?;
    let n = i32::try_from(n)
        .map_err(|_| ReliabilityError::InvalidArgument(format!("n = {n} is out of range")))?;
    Ok((1.0 - eps).powi(n))
}

/// Error rate after detect-and-retry: a wrong step is caught with
/// probability `alpha` and redone once with error rate `eps_retry`; a missed
/// error stays.
pub fn effective_error(eps: f64, alpha: f64, eps_retry: f64) -> ReliabilityResult<f64> {
    check_prob("eps", eps)?;
    check_prob("alpha", alpha)?;
    check_prob("eps_retry", eps_retry)?;
    Ok(eps * (1.0 - alpha) + eps * alpha * eps_retry)
}

/// One-step success when the slow path engages with probability `s_engage`
/// and a detected failure is repaired with probability `p_recovered`.
pub fn hybrid_success_step(
    p: f64,
    s_engage: f64,
    alpha: f64,
    p_recovered: f64,
) -> ReliabilityResult<f64> {
    check_prob("p", p)?;
    check_prob("s_engage", s_engage)?;
    check_prob("alpha", alpha)?;
    check_prob("p_recovered", p_recovered)?;
    Ok(s_engage * (p + (1.0 - p) * alpha * p_recovered) + (1.0 - s_engage) * p)
}

/// Survival probabilities p_step^N for N = 0..=n_max.
pub fn survival_curve(p_step: f64, n_max: usize) -> ReliabilityResult<Vec<f64>> {
    check_prob("p_step", p_step)?;
    let mut curve = Vec::with_capacity(n_max + 1);
    let mut phi = 1.0;
    curve.push(phi);
    for _ in 0..n_max {
        phi *= p_step;
        curve.push(phi);
    }
    Ok(curve)
}

/// Sample variance of the per-chain error count over simulated chains of
/// `n` independent steps. Under independence the true value is n*eps*(1-eps).
/// At least 10^3 trials are required; below that the estimate is noise.
pub fn variance_scaling(eps: f64, n: usize, trials: u64, seed: u64) -> ReliabilityResult<f64> {
    check_prob("eps", eps)?;
    if trials < 1_000 {
        return Err(ReliabilityError::InvalidArgument(format!(
            "variance_scaling needs at least 1000 trials, got {trials}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Welford accumulation; counts fit f64 exactly (n < 2^53).
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for t in 0..trials {
        let mut errors = 0usize;
        for _ in 0..n {
            if rng.random::<f64>() < eps {
                errors += 1;
            }
        }
        let x = errors as f64;
        let delta = x - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (x - mean);
    }
    Ok(m2 / (trials - 1) as f64)
}

/// Least-squares slope of the empirical error-count variance against chain
/// length. Under independence the slope is eps*(1-eps).
pub fn variance_slope(eps: f64, ns: &[usize], trials: u64, seed: u64) -> ReliabilityResult<f64> {
    if ns.len() < 2 {
        return Err(ReliabilityError::InvalidArgument(
            "variance_slope needs at least two chain lengths".into(),
        ));
    }
    let mut xs = Vec::with_capacity(ns.len());
    let mut ys = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        xs.push(n as f64);
        ys.push(variance_scaling(eps, n, trials, seed.wrapping_add(i as u64))?);
    }
    let k = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / k;
    let y_bar = ys.iter().sum::<f64>() / k;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - x_bar) * (y - y_bar);
        den += (x - x_bar) * (x - x_bar);
    }
    if den == 0.0 {
        return Err(ReliabilityError::InvalidArgument(
            "variance_slope needs at least two distinct chain lengths".into(),
        ));
    }
    Ok(num / den)
}
