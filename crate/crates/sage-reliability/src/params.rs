//! Scenario parameters and their key=value file format.

use serde::{Deserialize, Serialize};

use crate::error::{ReliabilityError, ReliabilityResult};

/// Inputs for one reliability scenario.
///
/// All rates are probabilities in [0,1]. `c_base` must be strictly positive
/// so per-step cost ratios are well defined; `c_mch` may be zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityParams {
    /// Per-step error rate with no checking at all.
    pub eps: f64,
    /// Detector sensitivity: probability a wrong step is flagged.
    pub alpha: f64,
    /// Detector specificity: probability a correct step is left alone.
    /// Unused by the closed forms; only the false-alarm Monte Carlo model
    /// reads it.
    pub beta_spec: f64,
    /// Error rate of a redone step.
    pub eps_retry: f64,
    /// Probability the slow path engages on a given step.
    pub s_engage: f64,
    /// Probability a flagged failure is actually repaired.
    pub p_recovered: f64,
    /// Chain length.
    pub n_steps: usize,
    /// Cost of one fast step.
    pub c_base: f64,
    /// Extra cost of engaging the slow path on a step.
    pub c_mch: f64,
}

impl Default for ReliabilityParams {
    fn default() -> Self {
        ReliabilityParams {
            eps: 0.1,
            alpha: 0.8,
            beta_spec: 1.0,
            eps_retry: 0.05,
            s_engage: 1.0,
            p_recovered: 0.7,
            n_steps: 20,
            c_base: 1.0,
            c_mch: 1.0,
        }
    }
}

impl ReliabilityParams {
    pub fn validate(&self) -> ReliabilityResult<()> {
        let probs = [
            ("eps", self.eps),
            ("alpha", self.alpha),
            ("beta_spec", self.beta_spec),
            ("eps_retry", self.eps_retry),
            ("s_engage", self.s_engage),
            ("p_recovered", self.p_recovered),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ReliabilityError::InvalidArgument(format!(
                    "{name} must be a probability in [0,1], got {p}"
                )));
            }
        }
        if !(self.c_base > 0.0) || !self.c_base.is_finite() {
            return Err(ReliabilityError::InvalidArgument(format!(
                "c_base must be finite and > 0, got {}",
                self.c_base
            )));
        }
        if !(self.c_mch >= 0.0) || !self.c_mch.is_finite() {
            return Err(ReliabilityError::InvalidArgument(format!(
                "c_mch must be finite and >= 0, got {}",
                self.c_mch
            )));
        }
        Ok(())
    }
}

/// Parses a `key=value` scenario file into parameters.
///
/// Unset keys keep their defaults; a repeated key takes its last value.
/// Blank lines and lines starting with `#` are skipped. Unknown keys are
/// errors so typos cannot silently run the default scenario.
pub fn parse_scenario(text: &str) -> ReliabilityResult<ReliabilityParams> {
    let mut p = ReliabilityParams::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ReliabilityError::Scenario(format!("line {lineno}: expected key=value, got {line:?}"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let parse_f64 = |v: &str| {
            v.parse::<f64>().map_err(|_| {
                ReliabilityError::Scenario(format!("line {lineno}: {key} wants a number, got {v:?}"))
            })
        };
        match key {
            "eps" => p.eps = parse_f64(value)?,
            "alpha" => p.alpha = parse_f64(value)?,
            "beta_spec" => p.beta_spec = parse_f64(value)?,
            "eps_retry" => p.eps_retry = parse_f64(value)?,
            "s_engage" => p.s_engage = parse_f64(value)?,
            "p_recovered" => p.p_recovered = parse_f64(value)?,
            "c_base" => p.c_base = parse_f64(value)?,
            "c_mch" => p.c_mch = parse_f64(value)?,
            "n_steps" => {
                p.n_steps = value.parse::<usize>().map_err(|_| {
                    ReliabilityError::Scenario(format!(
                        "line {lineno}: n_steps wants a non-negative integer, got {value:?}"
                    ))
                })?
            }
            _ => {
                return Err(ReliabilityError::Scenario(format!(
                    "line {lineno}: unknown key {key:?}"
                )))
            }
        }
    }
    p.validate()?;
    Ok(p)
}
