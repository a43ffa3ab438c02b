//! Model hyperparameters, persisted as a flat `key = value` text file.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CoreError, CoreResult};

/// All architecture and inference knobs in one place. Defaults are the
/// desk-scale configuration used by the test suites.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Transformer layer count (the L of the init scale 0.02/√(2L)).
    pub l_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    /// Hidden width of the gated FFN.
    pub d_ff: usize,
    pub vocab_nl: usize,
    pub vocab_code: usize,
    /// Landmark interval: positions ≡ 0 mod k stay attendable forever.
    pub k_landmark: usize,
    /// Dense causal attention span in tokens.
    pub local_window: usize,
    /// Capacity of the learned position table.
    pub max_seq_len: usize,
    pub eps_rms: f64,
    pub beta_swish: f64,
    /// λ weighting ICS inside the candidate energy.
    pub lambda_skepticism: f64,
    /// τ: entropy threshold (nats) above which the gate picks Reasoning.
    pub tau_uncertainty: f64,
    /// Width of the confidence head output.
    pub d_critic: usize,
    /// Weight on the inverse reconstruction loss inside the dual loss.
    pub inv_loss_weight: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            l_layers: 2,
            d_model: 32,
            n_heads: 2,
            d_ff: 64,
            vocab_nl: 64,
            vocab_code: 64,
            k_landmark: 16,
            local_window: 32,
            max_seq_len: 256,
            eps_rms: 1e-6,
            beta_swish: 1.0,
            lambda_skepticism: 0.5,
            tau_uncertainty: 1.0,
            d_critic: 8,
            inv_loss_weight: 0.5,
        }
    }
}

impl ModelConfig {
    /// Token ids must be valid in both embedding tables, so this is the id
    /// space the model predicts over.
    pub fn shared_vocab(&self) -> usize {
        self.vocab_nl.min(self.vocab_code)
    }

    pub fn validate(&self) -> CoreResult<()> {
        let bad = |msg: String| Err(CoreError::InvalidArgument(msg));
        if self.l_layers == 0 {
            return bad("l_layers must be >= 1".into());
        }
        if self.d_model == 0 || self.d_ff == 0 || self.d_critic == 0 {
            return bad("widths must be positive".into());
        }
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!(
                "n_heads {} must divide d_model {}",
                self.n_heads, self.d_model
            ));
        }
        if self.vocab_nl == 0 || self.vocab_code == 0 {
            return bad("vocab sizes must be positive".into());
        }
        if self.k_landmark < 1 {
            return bad("k_landmark must be >= 1".into());
        }
        if self.local_window < 1 {
            return bad("local_window must be >= 1".into());
        }
        if self.max_seq_len == 0 {
            return bad("max_seq_len must be positive".into());
        }
        if !(self.eps_rms > 0.0) {
            return bad(format!("eps_rms must be > 0, got {}", self.eps_rms));
        }
        if !(self.inv_loss_weight >= 0.0) {
            return bad(format!(
                "inv_loss_weight must be >= 0, got {}",
                self.inv_loss_weight
            ));
        }
        if !(self.lambda_skepticism >= 0.0) {
            return bad(format!(
                "lambda_skepticism must be >= 0, got {}",
                self.lambda_skepticism
            ));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").unwrap();
        };
        kv("l_layers", self.l_layers.to_string());
        kv("d_model", self.d_model.to_string());
        kv("n_heads", self.n_heads.to_string());
        kv("d_ff", self.d_ff.to_string());
        kv("vocab_nl", self.vocab_nl.to_string());
        kv("vocab_code", self.vocab_code.to_string());
        kv("k_landmark", self.k_landmark.to_string());
        kv("local_window", self.local_window.to_string());
        kv("max_seq_len", self.max_seq_len.to_string());
        kv("eps_rms", format!("{:?}", self.eps_rms));
        kv("beta_swish", format!("{:?}", self.beta_swish));
        kv("lambda_skepticism", format!("{:?}", self.lambda_skepticism));
        kv("tau_uncertainty", format!("{:?}", self.tau_uncertainty));
        kv("d_critic", self.d_critic.to_string());
        kv("inv_loss_weight", format!("{:?}", self.inv_loss_weight));
        s
    }

    /// Parses `key = value` lines. Empty lines and `#` comments are skipped;
    /// unknown keys are errors. Missing keys keep their defaults.
    pub fn from_text(text: &str) -> CoreResult<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CoreError::Parse(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let parse_usize = || {
                value.parse::<usize>().map_err(|_| {
                    CoreError::Parse(format!("config key {key}: bad integer {value:?}"))
                })
            };
            let parse_f64 = || {
                value.parse::<f64>().map_err(|_| {
                    CoreError::Parse(format!("config key {key}: bad number {value:?}"))
                })
            };
            match key {
                "l_layers" => cfg.l_layers = parse_usize()?,
                "d_model" => cfg.d_model = parse_usize()?,
                "n_heads" => cfg.n_heads = parse_usize()?,
                "d_ff" => cfg.d_ff = parse_usize()?,
                "vocab_nl" => cfg.vocab_nl = parse_usize()?,
                "vocab_code" => cfg.vocab_code = parse_usize()?,
                "k_landmark" => cfg.k_landmark = parse_usize()?,
                "local_window" => cfg.local_window = parse_usize()?,
                "max_seq_len" => cfg.max_seq_len = parse_usize()?,
                "eps_rms" => cfg.eps_rms = parse_f64()?,
                "beta_swish" => cfg.beta_swish = parse_f64()?,
                "lambda_skepticism" => cfg.lambda_skepticism = parse_f64()?,
                "tau_uncertainty" => cfg.tau_uncertainty = parse_f64()?,
                "d_critic" => cfg.d_critic = parse_usize()?,
                "inv_loss_weight" => cfg.inv_loss_weight = parse_f64()?,
                _ => {
                    return Err(CoreError::Parse(format!(
                        "config line {}: unknown key {key:?}",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> CoreResult<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> CoreResult<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
