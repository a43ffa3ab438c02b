//! The toy dual-head transformer.
//!
//! Architecture per block: pre-norm RMSNorm, multi-head causal attention
//! restricted to a landmark pattern (dense local window plus every k-th
//! position), residual add, pre-norm RMSNorm, gated SwiGLU FFN, residual
//! add. Token embeddings are a learned per-token blend of two tables; a
//! learned absolute position table is added on top. Three output heads
//! share the final normed states: next-token logits, a prompt
//! reconstruction head, and a confidence head.
//!
//! The reconstruction head always reads states produced by encoding the
//! reasoning tokens as their own sequence, both in the training loss and
//! in [`SageModel::compute_ics`], so scoring sees the distribution it was
//! trained on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{CoreError, CoreResult};
use crate::graph::{Graph, NodeId};
use crate::init::{fill_truncated_normal, init_sigma};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

// ---------------------------------------------------------------------------
// parameters

#[derive(Debug, Clone)]
pub struct HeadParams<S: Scalar> {
    pub wq: Tensor<S>,
    pub wk: Tensor<S>,
    pub wv: Tensor<S>,
    pub wo: Tensor<S>,
}

#[derive(Debug, Clone)]
pub struct LayerParams<S: Scalar> {
    pub gamma1: Tensor<S>,
    pub heads: Vec<HeadParams<S>>,
    pub gamma2: Tensor<S>,
    pub wg: Tensor<S>,
    pub w1: Tensor<S>,
    pub w2: Tensor<S>,
}

/// Every learnable tensor. All linear maps are bias-free.
#[derive(Debug, Clone)]
pub struct ParamSet<S: Scalar> {
    pub e_nl: Tensor<S>,
    pub e_code: Tensor<S>,
    /// Per-token mode score, stored `[shared_vocab, 1]`; sigmoid gives the
    /// blend weight α. Zero-initialized so every α starts at 0.5.
    pub mode_score: Tensor<S>,
    pub pos: Tensor<S>,
    pub layers: Vec<LayerParams<S>>,
    pub gamma_f: Tensor<S>,
    pub w_lm: Tensor<S>,
    pub w_inv: Tensor<S>,
    pub w_mch: Tensor<S>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn init(config: &ModelConfig, seed: u64) -> CoreResult<Self> {
        config.validate()?;
        let (d, v) = (config.d_model, config.shared_vocab());
        let dh = d / config.n_heads;
        let sigma = init_sigma(config.l_layers);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |r: usize, c: usize| {
            let mut t = Tensor::zeros(vec![r, c]);
            fill_truncated_normal(&mut rng, sigma, t.data_mut());
            t
        };
        let e_nl = mat(config.vocab_nl, d);
        let e_code = mat(config.vocab_code, d);
        let mode_score = Tensor::zeros(vec![v, 1]);
        let pos = mat(config.max_seq_len, d);
        let mut layers = Vec::with_capacity(config.l_layers);
        for _ in 0..config.l_layers {
            let heads = (0..config.n_heads)
                .map(|_| HeadParams {
                    wq: mat(d, dh),
                    wk: mat(d, dh),
                    wv: mat(d, dh),
                    wo: mat(dh, d),
                })
                .collect();
            layers.push(LayerParams {
                gamma1: Tensor::full(vec![d], S::one()),
                heads,
                gamma2: Tensor::full(vec![d], S::one()),
                wg: mat(d, config.d_ff),
                w1: mat(d, config.d_ff),
                w2: mat(config.d_ff, d),
            });
        }
        Ok(Self {
            e_nl,
            e_code,
            mode_score,
            pos,
            layers,
            gamma_f: Tensor::full(vec![d], S::one()),
            w_lm: mat(d, v),
            w_inv: mat(d, v),
            w_mch: mat(d, config.d_critic),
        })
    }

    /// Stable (name, tensor) order used by checkpoints and the optimizer.
    pub fn named(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out: Vec<(String, &Tensor<S>)> = vec![
            ("e_nl".into(), &self.e_nl),
            ("e_code".into(), &self.e_code),
            ("mode_score".into(), &self.mode_score),
            ("pos".into(), &self.pos),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.gamma1"), &l.gamma1));
            for (h, hd) in l.heads.iter().enumerate() {
                out.push((format!("layer{i}.head{h}.wq"), &hd.wq));
                out.push((format!("layer{i}.head{h}.wk"), &hd.wk));
                out.push((format!("layer{i}.head{h}.wv"), &hd.wv));
                out.push((format!("layer{i}.head{h}.wo"), &hd.wo));
            }
            out.push((format!("layer{i}.gamma2"), &l.gamma2));
            out.push((format!("layer{i}.wg"), &l.wg));
            out.push((format!("layer{i}.w1"), &l.w1));
            out.push((format!("layer{i}.w2"), &l.w2));
        }
        out.push(("gamma_f".into(), &self.gamma_f));
        out.push(("w_lm".into(), &self.w_lm));
        out.push(("w_inv".into(), &self.w_inv));
        out.push(("w_mch".into(), &self.w_mch));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out: Vec<&mut Tensor<S>> = vec![
            &mut self.e_nl,
            &mut self.e_code,
            &mut self.mode_score,
            &mut self.pos,
        ];
        for l in self.layers.iter_mut() {
            out.push(&mut l.gamma1);
            for hd in l.heads.iter_mut() {
                out.push(&mut hd.wq);
                out.push(&mut hd.wk);
                out.push(&mut hd.wv);
                out.push(&mut hd.wo);
            }
            out.push(&mut l.gamma2);
            out.push(&mut l.wg);
            out.push(&mut l.w1);
            out.push(&mut l.w2);
        }
        out.push(&mut self.gamma_f);
        out.push(&mut self.w_lm);
        out.push(&mut self.w_inv);
        out.push(&mut self.w_mch);
        out
    }

    pub fn param_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }
}

// Graph-side mirror of ParamSet: the node ids of one binding.
pub(crate) struct HeadNodes {
    wq: NodeId,
    wk: NodeId,
    wv: NodeId,
    wo: NodeId,
}

pub(crate) struct LayerNodes {
    gamma1: NodeId,
    heads: Vec<HeadNodes>,
    gamma2: NodeId,
    wg: NodeId,
    w1: NodeId,
    w2: NodeId,
}

pub(crate) struct ParamNodes {
    e_nl: NodeId,
    e_code: NodeId,
    mode_score: NodeId,
    pos: NodeId,
    layers: Vec<LayerNodes>,
    gamma_f: NodeId,
    w_lm: NodeId,
    w_inv: NodeId,
    w_mch: NodeId,
}

impl ParamNodes {
    /// Node ids in the same order as [`ParamSet::named`].
    pub(crate) fn ordered(&self) -> Vec<NodeId> {
        let mut out = vec![self.e_nl, self.e_code, self.mode_score, self.pos];
        for l in &self.layers {
            out.push(l.gamma1);
            for hd in &l.heads {
                out.extend([hd.wq, hd.wk, hd.wv, hd.wo]);
            }
            out.extend([l.gamma2, l.wg, l.w1, l.w2]);
        }
        out.extend([self.gamma_f, self.w_lm, self.w_inv, self.w_mch]);
        out
    }
}

// ---------------------------------------------------------------------------
// graph building blocks

/// RMS normalization over each row of `x`, scaled elementwise by `gamma`:
/// `x / sqrt(mean(x^2) + eps) * gamma`.
pub fn rmsnorm_node<S: Scalar>(g: &mut Graph<S>, x: NodeId, gamma: NodeId, eps: f64) -> NodeId {
    let sq = g.mul(x, x);
    let ms = g.row_mean(sq);
    let shifted = g.add_const(ms, eps);
    let inv = g.pow_const(shifted, -0.5);
    let xn = g.scale_rows(x, inv);
    g.mul_row_vec(xn, gamma)
}

/// `z * sigmoid(beta * z)` elementwise.
pub fn swish_node<S: Scalar>(g: &mut Graph<S>, z: NodeId, beta: f64) -> NodeId {
    let bz = g.mul_const(z, beta);
    let s = g.sigmoid(bz);
    g.mul(z, s)
}

/// Gated FFN: `(swish_beta(x W_g) ⊙ (x W_1)) W_2`.
pub fn swiglu_ffn_node<S: Scalar>(
    g: &mut Graph<S>,
    x: NodeId,
    wg: NodeId,
    w1: NodeId,
    w2: NodeId,
    beta: f64,
) -> NodeId {
    let gz = g.matmul(x, wg);
    let gate = swish_node(g, gz, beta);
    let up = g.matmul(x, w1);
    let h = g.mul(gate, up);
    g.matmul(h, w2)
}

// ---------------------------------------------------------------------------
// landmark attention pattern

/// Position `i` may attend to `j` iff `j` is causal and either inside the
/// trailing dense window or a landmark (j ≡ 0 mod k).
pub fn landmark_allowed(i: usize, j: usize, k: usize, window: usize) -> bool {
    j <= i && (i - j < window || j % k == 0)
}

/// Additive attention mask: 0 where allowed, -inf elsewhere.
pub fn landmark_mask_tensor<S: Scalar>(n: usize, k: usize, window: usize) -> Tensor<S> {
    let mut data = vec![S::neg_infinity(); n * n];
    for i in 0..n {
        for j in 0..=i {
            if landmark_allowed(i, j, k, window) {
                data[i * n + j] = S::zero();
            }
        }
    }
    Tensor::matrix(n, n, data).unwrap()
}

/// Number of (query, key) pairs the pattern leaves attendable.
pub fn attended_pair_count(n: usize, k: usize, window: usize) -> usize {
    let mut count = 0;
    for i in 0..n {
        for j in 0..=i {
            if landmark_allowed(i, j, k, window) {
                count += 1;
            }
        }
    }
    count
}

// ---------------------------------------------------------------------------
// the model

/// Final-layer states and head outputs for one sequence.
#[derive(Debug, Clone)]
pub struct ForwardOutput<S: Scalar> {
    /// `[n, shared_vocab]` next-token scores per position.
    pub logits: Tensor<S>,
    /// `[n, d_model]` final normed states.
    pub hidden_last: Tensor<S>,
    /// `[n, d_critic]` per-position confidence, each entry in (0,1).
    pub confidence: Tensor<S>,
}

pub(crate) struct ForwardNodes {
    pub hidden: NodeId,
    pub logits: NodeId,
    pub confidence: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualLossValue {
    pub total: f64,
    pub fwd: f64,
    pub inv: f64,
}

#[derive(Debug, Clone)]
pub struct SageModel<S: Scalar> {
    pub config: ModelConfig,
    pub params: ParamSet<S>,
}

impl<S: Scalar> SageModel<S> {
    pub fn new(config: ModelConfig, seed: u64) -> CoreResult<Self> {
        let params = ParamSet::init(&config, seed)?;
        Ok(Self { config, params })
    }

    pub(crate) fn bind(&self, g: &mut Graph<S>, trainable: bool) -> ParamNodes {
        let mut leaf = |t: &Tensor<S>| g.leaf(t.clone(), trainable);
        let layers = self
            .params
            .layers
            .iter()
            .map(|l| LayerNodes {
                gamma1: leaf(&l.gamma1),
                heads: l
                    .heads
                    .iter()
                    .map(|hd| HeadNodes {
                        wq: leaf(&hd.wq),
                        wk: leaf(&hd.wk),
                        wv: leaf(&hd.wv),
                        wo: leaf(&hd.wo),
                    })
                    .collect(),
                gamma2: leaf(&l.gamma2),
                wg: leaf(&l.wg),
                w1: leaf(&l.w1),
                w2: leaf(&l.w2),
            })
            .collect();
        ParamNodes {
            e_nl: leaf(&self.params.e_nl),
            e_code: leaf(&self.params.e_code),
            mode_score: leaf(&self.params.mode_score),
            pos: leaf(&self.params.pos),
            layers,
            gamma_f: leaf(&self.params.gamma_f),
            w_lm: leaf(&self.params.w_lm),
            w_inv: leaf(&self.params.w_inv),
            w_mch: leaf(&self.params.w_mch),
        }
    }

    fn check_tokens(&self, tokens: &[usize]) -> CoreResult<()> {
        if tokens.is_empty() {
            return Err(CoreError::InvalidArgument(
                "cannot encode an empty sequence".into(),
            ));
        }
        if tokens.len() > self.config.max_seq_len {
            return Err(CoreError::InvalidArgument(format!(
                "sequence length {} exceeds max_seq_len {}",
                tokens.len(),
                self.config.max_seq_len
            )));
        }
        for &t in tokens {
            if t >= self.config.vocab_nl {
                return Err(CoreError::TokenOutOfRange {
                    token: t,
                    vocab: self.config.vocab_nl,
                });
            }
            if t >= self.config.vocab_code {
                return Err(CoreError::TokenOutOfRange {
                    token: t,
                    vocab: self.config.vocab_code,
                });
            }
        }
        Ok(())
    }

    /// Builds the full encoder on `g` and returns the head nodes.
    pub(crate) fn encode(
        &self,
        g: &mut Graph<S>,
        nodes: &ParamNodes,
        tokens: &[usize],
    ) -> CoreResult<ForwardNodes> {
        self.check_tokens(tokens)?;
        let n = tokens.len();
        let cfg = &self.config;
        let dh = cfg.d_model / cfg.n_heads;

        // blended token embedding
        let x_nl = g.gather_rows(nodes.e_nl, tokens);
        let x_code = g.gather_rows(nodes.e_code, tokens);
        let score_col = g.gather_rows(nodes.mode_score, tokens);
        let alpha_col = g.sigmoid(score_col);
        let alpha = g.reshape(alpha_col, vec![n]);
        let neg_alpha = g.neg(alpha);
        let one_minus = g.add_const(neg_alpha, 1.0);
        let nl_part = g.scale_rows(x_nl, alpha);
        let code_part = g.scale_rows(x_code, one_minus);
        let blended = g.add(nl_part, code_part);

        let positions: Vec<usize> = (0..n).collect();
        let pos_rows = g.gather_rows(nodes.pos, &positions);
        let mut x = g.add(blended, pos_rows);

        let mask = g.constant(landmark_mask_tensor(n, cfg.k_landmark, cfg.local_window));
        let scale = 1.0 / (dh as f64).sqrt();

        for layer in &nodes.layers {
            // attention sublayer
            let h = rmsnorm_node(g, x, layer.gamma1, cfg.eps_rms);
            let mut attn: Option<NodeId> = None;
            for head in &layer.heads {
                let q = g.matmul(h, head.wq);
                let k = g.matmul(h, head.wk);
                let v = g.matmul(h, head.wv);
                let kt = g.transpose(k);
                let raw = g.matmul(q, kt);
                let scaled = g.mul_const(raw, scale);
                let masked = g.add(scaled, mask);
                let a = g.softmax_rows(masked);
                let ctx = g.matmul(a, v);
                let o = g.matmul(ctx, head.wo);
                attn = Some(match attn {
                    Some(acc) => g.add(acc, o),
                    None => o,
                });
            }
            x = g.add(x, attn.expect("n_heads >= 1"));

            // FFN sublayer
            let h2 = rmsnorm_node(g, x, layer.gamma2, cfg.eps_rms);
            let f = swiglu_ffn_node(g, h2, layer.wg, layer.w1, layer.w2, cfg.beta_swish);
            x = g.add(x, f);
        }

        let hidden = rmsnorm_node(g, x, nodes.gamma_f, cfg.eps_rms);
        let logits = g.matmul(hidden, nodes.w_lm);
        let conf_raw = g.matmul(hidden, nodes.w_mch);
        let confidence = g.sigmoid(conf_raw);
        Ok(ForwardNodes {
            hidden,
            logits,
            confidence,
        })
    }

    /// Runs the encoder without gradient tracking.
    pub fn forward(&self, tokens: &[usize]) -> CoreResult<ForwardOutput<S>> {
        let mut g = Graph::new();
        let nodes = self.bind(&mut g, false);
        let f = self.encode(&mut g, &nodes, tokens)?;
        Ok(ForwardOutput {
            logits: g.value(f.logits).clone(),
            hidden_last: g.value(f.hidden).clone(),
            confidence: g.value(f.confidence).clone(),
        })
    }

    /// Blend weight α for one token: sigmoid of its learned mode score.
    pub fn classify_mode(&self, token_id: usize) -> CoreResult<f64> {
        let v = self.config.shared_vocab();
        if token_id >= v {
            return Err(CoreError::TokenOutOfRange {
                token: token_id,
                vocab: v,
            });
        }
        let score = self.params.mode_score.at2(token_id, 0).as_f64();
        Ok(1.0 / (1.0 + (-score).exp()))
    }

    /// Fits the per-token mode scores to binary labels (true = NL) by
    /// logistic-loss gradient descent. Tokens without labels are untouched.
    pub fn fit_mode_classifier(
        &mut self,
        labels: &[(usize, bool)],
        steps: usize,
        lr: f64,
    ) -> CoreResult<()> {
        let v = self.config.shared_vocab();
        for &(tok, _) in labels {
            if tok >= v {
                return Err(CoreError::TokenOutOfRange {
                    token: tok,
                    vocab: v,
                });
            }
        }
        for _ in 0..steps {
            for &(tok, is_nl) in labels {
                let s = self.params.mode_score.at2(tok, 0).as_f64();
                let p = 1.0 / (1.0 + (-s).exp());
                let y = if is_nl { 1.0 } else { 0.0 };
                let updated = s - lr * (p - y);
                self.params.mode_score.data_mut()[tok] = S::of_f64(updated);
            }
        }
        Ok(())
    }

    /// Blend of the two embedding tables with caller-supplied α per token.
    pub fn split_embed(&self, token_ids: &[usize], alpha: &[f64]) -> CoreResult<Tensor<S>> {
        if token_ids.len() != alpha.len() {
            return Err(CoreError::InvalidArgument(format!(
                "split_embed: {} tokens but {} alphas",
                token_ids.len(),
                alpha.len()
            )));
        }
        for &a in alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(CoreError::InvalidArgument(format!(
                    "split_embed: alpha {a} outside [0,1]"
                )));
            }
        }
        let d = self.config.d_model;
        let mut data = Vec::with_capacity(token_ids.len() * d);
        for (&t, &a) in token_ids.iter().zip(alpha) {
            if t >= self.config.vocab_nl {
                return Err(CoreError::TokenOutOfRange {
                    token: t,
                    vocab: self.config.vocab_nl,
                });
            }
            if t >= self.config.vocab_code {
                return Err(CoreError::TokenOutOfRange {
                    token: t,
                    vocab: self.config.vocab_code,
                });
            }
            let (a, b) = (S::of_f64(a), S::of_f64(1.0 - a));
            for (x, y) in self.params.e_nl.row(t).iter().zip(self.params.e_code.row(t)) {
                data.push(a * *x + b * *y);
            }
        }
        Tensor::matrix(token_ids.len(), d, data)
    }

    // -- losses ------------------------------------------------------------

    /// Builds the dual loss for a batch of (tokens, reasoning_mask) pairs.
    /// Returns (total, fwd, inv) nodes; fwd and inv are scalar constants of
    /// the graph when their side of the batch is empty.
    pub(crate) fn dual_loss_graph(
        &self,
        g: &mut Graph<S>,
        nodes: &ParamNodes,
        batch: &[(Vec<usize>, Vec<bool>)],
    ) -> CoreResult<(NodeId, NodeId, NodeId)> {
        if batch.is_empty() {
            return Err(CoreError::InvalidArgument("dual_loss: empty batch".into()));
        }
        for (tokens, mask) in batch {
            if tokens.len() != mask.len() {
                return Err(CoreError::InvalidArgument(format!(
                    "dual_loss: mask length {} does not match sequence length {}",
                    mask.len(),
                    tokens.len()
                )));
            }
        }

        // forward next-token cross-entropy, averaged over all predicted
        // positions in the batch
        let mut fwd_sum: Option<NodeId> = None;
        let mut fwd_count = 0usize;
        // inverse reconstruction loss, averaged over sequences that have
        // both a prompt side and a reasoning side
        let mut inv_sum: Option<NodeId> = None;
        let mut inv_count = 0usize;

        for (tokens, mask) in batch {
            let f = self.encode(g, nodes, tokens)?;
            if tokens.len() >= 2 {
                let n = tokens.len();
                let ctx: Vec<usize> = (0..n - 1).collect();
                let pred_rows = g.gather_rows(f.logits, &ctx);
                let lsm = g.log_softmax_rows(pred_rows);
                let picked = g.pick_per_row(lsm, &tokens[1..]);
                let nll_sum = g.sum_all(picked);
                let neg = g.neg(nll_sum);
                fwd_sum = Some(match fwd_sum {
                    Some(acc) => g.add(acc, neg),
                    None => neg,
                });
                fwd_count += n - 1;
            }

            let prompt: Vec<usize> = tokens
                .iter()
                .zip(mask)
                .filter(|(_, &m)| !m)
                .map(|(&t, _)| t)
                .collect();
            let trace: Vec<usize> = tokens
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(&t, _)| t)
                .collect();
            if !prompt.is_empty() && !trace.is_empty() {
                let kl = self.reconstruction_kl(g, nodes, &trace, &prompt)?;
                inv_sum = Some(match inv_sum {
                    Some(acc) => g.add(acc, kl),
                    None => kl,
                });
                inv_count += 1;
            }
        }

        let fwd = match fwd_sum {
            Some(sum) => g.mul_const(sum, 1.0 / fwd_count as f64),
            None => g.scalar_const(0.0),
        };
        let inv = match inv_sum {
            Some(sum) => g.mul_const(sum, 1.0 / inv_count as f64),
            None => g.scalar_const(0.0),
        };
        let weighted = g.mul_const(inv, self.config.inv_loss_weight);
        let total = g.add(fwd, weighted);
        Ok((total, fwd, inv))
    }

    /// KL(prompt unigram ‖ reconstruction) where the reconstruction
    /// distribution comes from mean-pooled states of the trace encoded
    /// alone. The entropy of the prompt unigram is a constant, so it is
    /// folded in outside the graph.
    fn reconstruction_kl(
        &self,
        g: &mut Graph<S>,
        nodes: &ParamNodes,
        trace: &[usize],
        prompt: &[usize],
    ) -> CoreResult<NodeId> {
        let v = self.config.shared_vocab();
        let f = self.encode(g, nodes, trace)?;
        let pooled = g.mean_rows(f.hidden);
        let recon = g.matmul(pooled, nodes.w_inv);
        let lsm = g.log_softmax_rows(recon);

        let mut p = vec![0.0f64; v];
        for &t in prompt {
            if t >= v {
                return Err(CoreError::TokenOutOfRange { token: t, vocab: v });
            }
            p[t] += 1.0 / prompt.len() as f64;
        }
        let entropy: f64 = p
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| -x * x.ln())
            .sum();
        let p_node = g.constant(Tensor::from_f64_slice(vec![1, v], &p)?);
        let weighted = g.mul(lsm, p_node);
        let ce_neg = g.sum_all(weighted);
        let ce = g.neg(ce_neg);
        Ok(g.add_const(ce, -entropy))
    }

    /// Evaluates the dual loss without touching gradients.
    pub fn dual_loss(&self, batch: &[(Vec<usize>, Vec<bool>)]) -> CoreResult<DualLossValue> {
        let mut g = Graph::new();
        let nodes = self.bind(&mut g, false);
        let (total, fwd, inv) = self.dual_loss_graph(&mut g, &nodes, batch)?;
        Ok(DualLossValue {
            total: g.value(total).item().as_f64(),
            fwd: g.value(fwd).item().as_f64(),
            inv: g.value(inv).item().as_f64(),
        })
    }

    /// Dual loss plus the gradient of its total w.r.t. every parameter,
    /// aligned with [`ParamSet::named`]. `None` marks parameters the loss
    /// never touches (the confidence head, for one).
    pub fn dual_loss_with_grads(
        &self,
        batch: &[(Vec<usize>, Vec<bool>)],
    ) -> CoreResult<(DualLossValue, Vec<Option<Tensor<S>>>)> {
        let mut g = Graph::new();
        let nodes = self.bind(&mut g, true);
        let (total, fwd, inv) = self.dual_loss_graph(&mut g, &nodes, batch)?;
        let grads = g.backward(total);
        let by_param = nodes
            .ordered()
            .iter()
            .map(|&id| grads.get(id).cloned())
            .collect();
        Ok((
            DualLossValue {
                total: g.value(total).item().as_f64(),
                fwd: g.value(fwd).item().as_f64(),
                inv: g.value(inv).item().as_f64(),
            },
            by_param,
        ))
    }

    /// Mean log-probability the reconstruction head assigns to the prompt
    /// tokens, reconstructing from the trace encoded alone. Higher means
    /// the trace carries its constraints; always ≤ 0.
    pub fn compute_ics(&self, reasoning_trace: &[usize], prompt: &[usize]) -> CoreResult<f64> {
        if reasoning_trace.is_empty() || prompt.is_empty() {
            return Err(CoreError::InvalidArgument(
                "compute_ics: trace and prompt must be non-empty".into(),
            ));
        }
        let v = self.config.shared_vocab();
        for &t in prompt {
            if t >= v {
                return Err(CoreError::TokenOutOfRange { token: t, vocab: v });
            }
        }
        let mut g = Graph::new();
        let nodes = self.bind(&mut g, false);
        let f = self.encode(&mut g, &nodes, reasoning_trace)?;
        let pooled = g.mean_rows(f.hidden);
        let recon = g.matmul(pooled, nodes.w_inv);
        let lsm = g.log_softmax_rows(recon);
        let row = g.value(lsm);
        let mean = prompt
            .iter()
            .map(|&t| row.at2(0, t).as_f64())
            .sum::<f64>()
            / prompt.len() as f64;
        Ok(mean)
    }

    // -- decoding ----------------------------------------------------------

    /// Next-token logits after the given context, as f64.
    pub fn next_token_logits(&self, tokens: &[usize]) -> CoreResult<Vec<f64>> {
        let out = self.forward(tokens)?;
        let last = out.logits.rows() - 1;
        Ok(out.logits.row(last).iter().map(|x| x.as_f64()).collect())
    }

    /// Samples `len` tokens after `prefix` at the given temperature.
    /// Returns the sampled tokens and their total log-probability under the
    /// untempered model.
    pub fn sample_continuation<R: Rng + ?Sized>(
        &self,
        prefix: &[usize],
        len: usize,
        temperature: f64,
        rng: &mut R,
    ) -> CoreResult<(Vec<usize>, f64)> {
        if !(temperature > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "temperature must be > 0, got {temperature}"
            )));
        }
        let mut tokens = prefix.to_vec();
        let mut sampled = Vec::with_capacity(len);
        let mut logp = 0.0;
        for _ in 0..len {
            let logits = self.next_token_logits(&tokens)?;
            let lsm = log_softmax_f64(&logits);
            let tempered: Vec<f64> = logits.iter().map(|&x| x / temperature).collect();
            let probs = softmax_f64(&tempered);
            let choice = sample_index(&probs, rng);
            logp += lsm[choice];
            tokens.push(choice);
            sampled.push(choice);
        }
        Ok((sampled, logp))
    }

    /// Greedy continuation; ties resolved toward the lowest token id.
    pub fn greedy_continuation(&self, prefix: &[usize], len: usize) -> CoreResult<Vec<usize>> {
        let mut tokens = prefix.to_vec();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let logits = self.next_token_logits(&tokens)?;
            let mut best = 0usize;
            for (i, &x) in logits.iter().enumerate() {
                if x > logits[best] {
                    best = i;
                }
            }
            tokens.push(best);
            out.push(best);
        }
        Ok(out)
    }

    // -- persistence ---------------------------------------------------------

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> CoreResult<()> {
        let entries: Vec<(String, Tensor<S>)> = self
            .params
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        crate::checkpoint::save_checkpoint(path, &entries)
    }

    pub fn load(config: ModelConfig, path: impl AsRef<std::path::Path>) -> CoreResult<Self> {
        let entries = crate::checkpoint::load_checkpoint::<S>(path)?;
        let mut model = Self::new(config, 0)?;
        let mut by_name: std::collections::BTreeMap<String, Tensor<S>> =
            entries.into_iter().collect();
        let expected: Vec<String> = model.params.named().iter().map(|(n, _)| n.clone()).collect();
        for (name, slot) in expected.iter().zip(model.params.tensors_mut()) {
            let tensor = by_name.remove(name).ok_or_else(|| {
                CoreError::Parse(format!("checkpoint missing tensor {name:?}"))
            })?;
            if tensor.shape() != slot.shape() {
                return Err(CoreError::ShapeMismatch(format!(
                    "checkpoint tensor {name:?} has shape {:?}, config wants {:?}",
                    tensor.shape(),
                    slot.shape()
                )));
            }
            *slot = tensor;
        }
        if let Some((name, _)) = by_name.into_iter().next() {
            return Err(CoreError::Parse(format!(
                "checkpoint has unexpected tensor {name:?}"
            )));
        }
        Ok(model)
    }
}

// ---------------------------------------------------------------------------
// plain helpers shared by decoding and the gate

pub fn softmax_f64(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - mx).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

pub fn log_softmax_f64(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|&x| (x - mx).exp()).sum::<f64>().ln() + mx;
    logits.iter().map(|&x| x - lse).collect()
}

pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Vector-level RMS normalization; `eps` may be 0, in which case the input
/// must not be the zero vector for a finite result.
pub fn rmsnorm<S: Scalar>(x: &[S], gamma: &[S], eps: f64) -> CoreResult<Vec<S>> {
    if x.len() != gamma.len() {
        return Err(CoreError::InvalidArgument(format!(
            "rmsnorm: x has {} entries, gamma {}",
            x.len(),
            gamma.len()
        )));
    }
    if x.is_empty() {
        return Err(CoreError::InvalidArgument("rmsnorm: empty input".into()));
    }
    if eps < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "rmsnorm: eps must be >= 0, got {eps}"
        )));
    }
    let mut g = Graph::new();
    let xs = g.constant(Tensor::matrix(1, x.len(), x.to_vec())?);
    let gs = g.constant(Tensor::from_vec(gamma.to_vec()));
    let out = rmsnorm_node(&mut g, xs, gs, eps);
    Ok(g.value(out).data().to_vec())
}

/// Vector-level gated FFN evaluation.
pub fn swiglu_ffn<S: Scalar>(
    x: &[S],
    wg: &Tensor<S>,
    w1: &Tensor<S>,
    w2: &Tensor<S>,
    beta: f64,
) -> CoreResult<Vec<S>> {
    let d = x.len();
    let ff = wg.cols();
    if wg.rank() != 2 || w1.rank() != 2 || w2.rank() != 2 {
        return Err(CoreError::InvalidArgument(
            "swiglu_ffn: weights must be matrices".into(),
        ));
    }
    if wg.rows() != d || w1.rows() != d || w1.cols() != ff || w2.rows() != ff {
        return Err(CoreError::ShapeMismatch(format!(
            "swiglu_ffn: x[{d}] with wg{:?} w1{:?} w2{:?}",
            wg.shape(),
            w1.shape(),
            w2.shape()
        )));
    }
    let mut g = Graph::new();
    let xs = g.constant(Tensor::matrix(1, d, x.to_vec())?);
    let wgn = g.constant(wg.clone());
    let w1n = g.constant(w1.clone());
    let w2n = g.constant(w2.clone());
    let out = swiglu_ffn_node(&mut g, xs, wgn, w1n, w2n, beta);
    Ok(g.value(out).data().to_vec())
}

/// Confidence head: `sigmoid(h_last · W)` giving one value per critic
/// dimension, each strictly inside (0,1).
pub fn mch_confidence<S: Scalar>(h_last: &[S], w_mch: &Tensor<S>) -> CoreResult<Vec<S>> {
    if w_mch.rank() != 2 || w_mch.rows() != h_last.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "mch_confidence: h[{}] with W{:?}",
            h_last.len(),
            w_mch.shape()
        )));
    }
    let dc = w_mch.cols();
    let mut out = Vec::with_capacity(dc);
    for j in 0..dc {
        let mut z = S::zero();
        for (i, &h) in h_last.iter().enumerate() {
            z += h * w_mch.at2(i, j);
        }
        out.push(S::one() / (S::one() + (-z).exp()));
    }
    Ok(out)
}
