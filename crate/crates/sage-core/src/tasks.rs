//! Synthetic task generators and their evaluation loops.
//!
//! Two families:
//!   * needle retrieval: a payload token from a dedicated alphabet is
//!     planted at a landmark position well before the final dense window;
//!     the model must emit it after the trailing query token. Solvable
//!     only if attention reaches back through the landmark pattern.
//!   * constraint echo: a prompt names one constraint token; the model
//!     must echo it as a one-token reasoning trace and then emit the
//!     paired answer token. The training corpus can inject "confident
//!     hallucinations": traces that echo a fixed decoy constraint with the
//!     decoy's (wrong) answer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, CoreResult};
use crate::graph::Graph;
use crate::model::SageModel;
use crate::optim::{clip_global_norm, Adam};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

// ---------------------------------------------------------------------------
// needle retrieval

#[derive(Debug, Clone, Copy)]
pub struct NeedleVocab {
    pub n_filler: usize,
    pub n_payload: usize,
}

impl NeedleVocab {
    pub fn filler(&self, i: usize) -> usize {
        debug_assert!(i < self.n_filler);
        i
    }
    pub fn payload(&self, i: usize) -> usize {
        debug_assert!(i < self.n_payload);
        self.n_filler + i
    }
    pub fn qry(&self) -> usize {
        self.n_filler + self.n_payload
    }
    pub fn size(&self) -> usize {
        self.n_filler + self.n_payload + 1
    }
}

#[derive(Debug, Clone)]
pub struct NeedleTask {
    /// Full input sequence ending in the query token.
    pub tokens: Vec<usize>,
    /// The payload token the model must emit after the query.
    pub target: usize,
    pub payload_pos: usize,
}

/// Landmark positions early enough that the final position can only see
/// them through the landmark pattern, never the dense window.
pub fn needle_positions(seq_len: usize, window: usize, k: usize) -> Vec<usize> {
    (1..)
        .map(|m| m * k)
        .take_while(|&p| p + window < seq_len)
        .collect()
}

pub fn gen_needle_task<R: Rng + ?Sized>(
    vocab: &NeedleVocab,
    seq_len: usize,
    window: usize,
    k: usize,
    rng: &mut R,
) -> CoreResult<NeedleTask> {
    let positions = needle_positions(seq_len, window, k);
    if positions.is_empty() {
        return Err(CoreError::InvalidArgument(format!(
            "no landmark fits before the window: len {seq_len}, window {window}, k {k}"
        )));
    }
    let payload_pos = positions[rng.random_range(0..positions.len())];
    let payload = vocab.payload(rng.random_range(0..vocab.n_payload));
    let mut tokens: Vec<usize> = (0..seq_len)
        .map(|_| vocab.filler(rng.random_range(0..vocab.n_filler)))
        .collect();
    tokens[payload_pos] = payload;
    tokens[seq_len - 1] = vocab.qry();
    Ok(NeedleTask {
        tokens,
        target: payload,
        payload_pos,
    })
}

pub fn gen_needle_set(
    vocab: &NeedleVocab,
    count: usize,
    seq_len: usize,
    window: usize,
    k: usize,
    seed: u64,
) -> CoreResult<Vec<NeedleTask>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| gen_needle_task(vocab, seq_len, window, k, &mut rng))
        .collect()
}

/// Trains with cross-entropy on the final position only, drawing fresh
/// tasks every step. Returns the per-step loss curve.
pub fn train_needle<S: Scalar>(
    model: &mut SageModel<S>,
    vocab: &NeedleVocab,
    seq_len: usize,
    steps: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> CoreResult<Vec<f64>> {
    let (window, k) = (model.config.local_window, model.config.k_landmark);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = Adam::new(lr);
    let mut curve = Vec::with_capacity(steps);

    for _ in 0..steps {
        let mut g = Graph::new();
        let nodes = model.bind(&mut g, true);
        let mut loss_sum = None;
        for _ in 0..batch_size {
            let task = gen_needle_task(vocab, seq_len, window, k, &mut rng)?;
            let f = model.encode(&mut g, &nodes, &task.tokens)?;
            let last = g.gather_rows(f.logits, &[task.tokens.len() - 1]);
            let lsm = g.log_softmax_rows(last);
            let picked = g.pick_per_row(lsm, &[task.target]);
            let nll = g.neg(picked);
            let nll = g.sum_all(nll);
            loss_sum = Some(match loss_sum {
                Some(acc) => g.add(acc, nll),
                None => nll,
            });
        }
        let loss = g.mul_const(loss_sum.expect("batch_size >= 1"), 1.0 / batch_size as f64);
        let grads = g.backward(loss);
        let ids = nodes.ordered();
        let mut grad_list: Vec<Option<Tensor<S>>> =
            ids.iter().map(|&id| grads.get(id).cloned()).collect();
        clip_global_norm(&mut grad_list, 1.0);
        opt.step(model.params.tensors_mut(), &grad_list);
        curve.push(g.value(loss).item().as_f64());
    }
    Ok(curve)
}

/// Fraction of tasks whose greedy next token after the query equals the
/// planted payload.
pub fn eval_needle<S: Scalar>(model: &SageModel<S>, tasks: &[NeedleTask]) -> CoreResult<f64> {
    if tasks.is_empty() {
        return Err(CoreError::InvalidArgument("eval_needle: no tasks".into()));
    }
    let mut hits = 0usize;
    for task in tasks {
        let pred = model.greedy_continuation(&task.tokens, 1)?[0];
        if pred == task.target {
            hits += 1;
        }
    }
    Ok(hits as f64 / tasks.len() as f64)
}

// ---------------------------------------------------------------------------
// constraint echo

#[derive(Debug, Clone, Copy)]
pub struct EchoVocab {
    pub n_fillers: usize,
    pub n_constraints: usize,
}

impl EchoVocab {
    pub fn bos(&self) -> usize {
        0
    }
    pub fn qry(&self) -> usize {
        1
    }
    pub fn filler(&self, i: usize) -> usize {
        debug_assert!(i < self.n_fillers);
        2 + i
    }
    pub fn constraint(&self, i: usize) -> usize {
        debug_assert!(i < self.n_constraints);
        2 + self.n_fillers + i
    }
    pub fn answer(&self, i: usize) -> usize {
        debug_assert!(i < self.n_constraints);
        2 + self.n_fillers + self.n_constraints + i
    }
    pub fn size(&self) -> usize {
        2 + self.n_fillers + 2 * self.n_constraints
    }
    pub fn constraint_index(&self, token: usize) -> Option<usize> {
        let base = 2 + self.n_fillers;
        (base..base + self.n_constraints)
            .contains(&token)
            .then(|| token - base)
    }
    pub fn answer_index(&self, token: usize) -> Option<usize> {
        let base = 2 + self.n_fillers + self.n_constraints;
        (base..base + self.n_constraints)
            .contains(&token)
            .then(|| token - base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoDifficulty {
    /// Constraint token sits directly before the query.
    Easy,
    /// Constraint token sits directly after BOS, fillers in between.
    Hard,
}

#[derive(Debug, Clone)]
pub struct EchoTask {
    pub prompt: Vec<usize>,
    /// True constraint index; index 0 is reserved for the decoy, so real
    /// tasks use 1.. .
    pub constraint_idx: usize,
    pub difficulty: EchoDifficulty,
}

impl EchoTask {
    pub fn true_answer(&self, v: &EchoVocab) -> usize {
        v.answer(self.constraint_idx)
    }
}

pub fn gen_echo_task<R: Rng + ?Sized>(
    v: &EchoVocab,
    difficulty: EchoDifficulty,
    prompt_len: usize,
    rng: &mut R,
) -> CoreResult<EchoTask> {
    if prompt_len < 4 {
        return Err(CoreError::InvalidArgument(
            "echo prompt needs at least 4 positions".into(),
        ));
    }
    if v.n_constraints < 2 {
        return Err(CoreError::InvalidArgument(
            "echo vocab needs a decoy plus at least one real constraint".into(),
        ));
    }
    let constraint_idx = rng.random_range(1..v.n_constraints);
    let mut prompt = vec![v.bos()];
    let n_fill = prompt_len - 3;
    match difficulty {
        EchoDifficulty::Easy => {
            for _ in 0..n_fill {
                prompt.push(v.filler(rng.random_range(0..v.n_fillers)));
            }
            prompt.push(v.constraint(constraint_idx));
        }
        EchoDifficulty::Hard => {
            prompt.push(v.constraint(constraint_idx));
            for _ in 0..n_fill {
                prompt.push(v.filler(rng.random_range(0..v.n_fillers)));
            }
        }
    }
    prompt.push(v.qry());
    Ok(EchoTask {
        prompt,
        constraint_idx,
        difficulty,
    })
}

/// One training sequence: prompt ⊕ trace ⊕ answer, with the reasoning mask
/// covering the continuation. With probability `noise` the teacher echoes
/// the decoy constraint 0 and, consistently, answers the decoy's answer.
pub fn echo_training_sequence<R: Rng + ?Sized>(
    task: &EchoTask,
    v: &EchoVocab,
    noise: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<bool>) {
    let j = if rng.random::<f64>() < noise {
        0
    } else {
        task.constraint_idx
    };
    let mut tokens = task.prompt.clone();
    let mut mask = vec![false; tokens.len()];
    tokens.push(v.constraint(j));
    tokens.push(v.answer(j));
    mask.push(true);
    mask.push(true);
    (tokens, mask)
}

/// Mixed corpus: `counts[i]` sequences at `(difficulty, noise)` from
/// `kinds[i]`.
pub fn echo_training_corpus(
    v: &EchoVocab,
    kinds: &[(EchoDifficulty, f64, usize)],
    prompt_len: usize,
    seed: u64,
) -> CoreResult<Vec<(Vec<usize>, Vec<bool>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &(difficulty, noise, count) in kinds {
        for _ in 0..count {
            let task = gen_echo_task(v, difficulty, prompt_len, &mut rng)?;
            out.push(echo_training_sequence(&task, v, noise, &mut rng));
        }
    }
    Ok(out)
}

pub fn gen_echo_set(
    v: &EchoVocab,
    difficulty: EchoDifficulty,
    count: usize,
    prompt_len: usize,
    seed: u64,
) -> CoreResult<Vec<EchoTask>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| gen_echo_task(v, difficulty, prompt_len, &mut rng))
        .collect()
}

/// One sampled (trace, answer) continuation with its scores.
#[derive(Debug, Clone)]
pub struct EchoSample {
    pub trace: Vec<usize>,
    pub answer_token: usize,
    pub logp: f64,
    pub ics: f64,
}

/// Samples k two-token continuations and scores each: logp from the
/// sampler, ICS of the continuation against the prompt.
pub fn echo_sample_k<S: Scalar, R: Rng + ?Sized>(
    model: &SageModel<S>,
    task: &EchoTask,
    k: usize,
    temperature: f64,
    rng: &mut R,
) -> CoreResult<Vec<EchoSample>> {
    if k == 0 {
        return Err(CoreError::InvalidArgument("echo_sample_k: k = 0".into()));
    }
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let (cont, logp) = model.sample_continuation(&task.prompt, 2, temperature, rng)?;
        let ics = model.compute_ics(&cont, &task.prompt)?;
        out.push(EchoSample {
            trace: cont.clone(),
            answer_token: cont[1],
            logp,
            ics,
        });
    }
    Ok(out)
}

/// Greedy two-token continuation; the answer is its second token.
pub fn echo_greedy_answer<S: Scalar>(
    model: &SageModel<S>,
    task: &EchoTask,
) -> CoreResult<usize> {
    Ok(model.greedy_continuation(&task.prompt, 2)?[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needle_positions_stay_clear_of_the_window() {
        let ps = needle_positions(128, 32, 16);
        assert_eq!(ps, vec![16, 32, 48, 64, 80]);
        for &p in &ps {
            assert!(p % 16 == 0 && p + 32 < 128);
        }
        assert!(needle_positions(16, 32, 16).is_empty());
    }

    #[test]
    fn needle_task_layout() {
        let vocab = NeedleVocab {
            n_filler: 8,
            n_payload: 16,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = gen_needle_task(&vocab, 128, 32, 16, &mut rng).unwrap();
        assert_eq!(t.tokens.len(), 128);
        assert_eq!(t.tokens[127], vocab.qry());
        assert_eq!(t.tokens[t.payload_pos], t.target);
        assert!(t.target >= 8 && t.target < 24, "payload alphabet");
        // the payload is the only payload-alphabet token
        let payload_count = t
            .tokens
            .iter()
            .filter(|&&x| (8..24).contains(&x))
            .count();
        assert_eq!(payload_count, 1);
    }

    #[test]
    fn echo_vocab_partitions_ids() {
        let v = EchoVocab {
            n_fillers: 6,
            n_constraints: 5,
        };
        assert_eq!(v.size(), 18);
        assert_eq!(v.constraint_index(v.constraint(3)), Some(3));
        assert_eq!(v.answer_index(v.answer(4)), Some(4));
        assert_eq!(v.answer_index(v.constraint(4)), None);
        assert_eq!(v.constraint_index(v.filler(0)), None);
    }

    #[test]
    fn echo_task_layouts_and_noise() {
        let v = EchoVocab {
            n_fillers: 6,
            n_constraints: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let easy = gen_echo_task(&v, EchoDifficulty::Easy, 10, &mut rng).unwrap();
        assert_eq!(easy.prompt.len(), 10);
        assert_eq!(easy.prompt[0], v.bos());
        assert_eq!(easy.prompt[9], v.qry());
        assert_eq!(easy.prompt[8], v.constraint(easy.constraint_idx));
        assert!(easy.constraint_idx >= 1, "index 0 is the decoy");

        let hard = gen_echo_task(&v, EchoDifficulty::Hard, 10, &mut rng).unwrap();
        assert_eq!(hard.prompt[1], v.constraint(hard.constraint_idx));

        // noise 1 always echoes the decoy with the decoy's answer
        let (tokens, mask) = echo_training_sequence(&hard, &v, 1.0, &mut rng);
        assert_eq!(tokens[tokens.len() - 2], v.constraint(0));
        assert_eq!(tokens[tokens.len() - 1], v.answer(0));
        assert_eq!(&mask[tokens.len() - 2..], &[true, true]);
        assert!(mask[..tokens.len() - 2].iter().all(|&m| !m));

        // noise 0 echoes the true constraint
        let (tokens, _) = echo_training_sequence(&hard, &v, 0.0, &mut rng);
        assert_eq!(tokens[tokens.len() - 2], v.constraint(hard.constraint_idx));
        assert_eq!(tokens[tokens.len() - 1], hard.true_answer(&v));
    }

    #[test]
    fn corpus_counts_follow_the_mix() {
        let v = EchoVocab {
            n_fillers: 4,
            n_constraints: 3,
        };
        let corpus = echo_training_corpus(
            &v,
            &[
                (EchoDifficulty::Easy, 0.0, 7),
                (EchoDifficulty::Hard, 0.4, 5),
            ],
            8,
            0,
        )
        .unwrap();
        assert_eq!(corpus.len(), 12);
        for (tokens, mask) in &corpus {
            assert_eq!(tokens.len(), 10);
            assert_eq!(mask.len(), 10);
            assert!(tokens.iter().all(|&t| t < v.size()));
        }
    }
}
