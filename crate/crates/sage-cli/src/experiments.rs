//! End-to-end synthetic experiments behind `gate-bench` and the acceptance
//! ablations. Each one trains a small model from scratch inside the run so
//! the directional claims are measured on fresh weights, not assumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sage_core::config::ModelConfig;
use sage_core::gate::{cost_account, gate, step_entropy, GateDecision};
use sage_core::model::SageModel;
use sage_core::rerank::{ir_guided_vote, rerank_candidates, Candidate, VoteSample};
use sage_core::tasks::{
    echo_greedy_answer, echo_sample_k, echo_training_corpus, gen_echo_set, EchoDifficulty,
    EchoTask, EchoVocab,
};
use sage_core::trainer::{train_model, TrainOptions};

use crate::error::{CliError, CliResult};

fn echo_vocab() -> EchoVocab {
    EchoVocab {
        n_fillers: 6,
        n_constraints: 5,
    }
}

const PROMPT_LEN: usize = 10;

// ---------------------------------------------------------------------------
// voting ablation

/// Fixture for the vote comparison: a model taught to echo the prompt's
/// constraint but poisoned so that 45% of the hard training sequences echo
/// the decoy instead. Votes are then taken over hard tasks only.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoVoteOptions {
    pub n_tasks: usize,
    pub k: usize,
    /// Fraction of hard training sequences that echo the decoy.
    pub noise: f64,
    pub train_steps: usize,
    pub seed: u64,
}

impl Default for EchoVoteOptions {
    fn default() -> Self {
        Self {
            n_tasks: 200,
            k: 8,
            noise: 0.45,
            train_steps: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoVoteReport {
    pub n_tasks: usize,
    pub k: usize,
    /// Floor used by the filtered vote, calibrated on held-out tasks.
    pub ics_floor: f64,
    /// Mean ICS of held-out true-constraint traces and decoy traces.
    pub mean_ics_true: f64,
    pub mean_ics_decoy: f64,
    pub acc_vanilla: f64,
    pub acc_ir: f64,
}

/// Majority vote with and without the ICS floor over the same samples.
/// The floor sits halfway between the held-out mean ICS of true and decoy
/// traces, so it is fixed before the evaluation set is drawn.
pub fn echo_vote_ablation(opts: &EchoVoteOptions) -> CliResult<EchoVoteReport> {
    if opts.n_tasks == 0 || opts.k == 0 {
        return Err(CliError::Usage(
            "echo_vote_ablation: n_tasks and k must be >= 1".into(),
        ));
    }
    let v = echo_vocab();
    let config = ModelConfig {
        l_layers: 2,
        d_model: 16,
        n_heads: 2,
        d_ff: 32,
        vocab_nl: v.size(),
        vocab_code: v.size(),
        k_landmark: 4,
        local_window: 16,
        max_seq_len: 32,
        ..ModelConfig::default()
    };
    let corpus = echo_training_corpus(
        &v,
        &[
            (EchoDifficulty::Easy, 0.0, 32),
            (EchoDifficulty::Hard, opts.noise, 32),
        ],
        PROMPT_LEN,
        opts.seed.wrapping_add(1),
    )?;
    let mut model = SageModel::<f64>::new(config, opts.seed)?;
    train_model(
        &mut model,
        &corpus,
        &TrainOptions {
            steps: opts.train_steps,
            seed: opts.seed.wrapping_add(2),
            ..TrainOptions::default()
        },
    )?;

    // calibrate the floor on held-out prompts the evaluation never sees
    let held_out = gen_echo_set(
        &v,
        EchoDifficulty::Hard,
        32,
        PROMPT_LEN,
        opts.seed.wrapping_add(3),
    )?;
    let mut sum_true = 0.0;
    let mut sum_decoy = 0.0;
    for task in &held_out {
        let j = task.constraint_idx;
        sum_true += model.compute_ics(&[v.constraint(j), v.answer(j)], &task.prompt)?;
        sum_decoy += model.compute_ics(&[v.constraint(0), v.answer(0)], &task.prompt)?;
    }
    let mean_ics_true = sum_true / held_out.len() as f64;
    let mean_ics_decoy = sum_decoy / held_out.len() as f64;
    let ics_floor = 0.5 * (mean_ics_true + mean_ics_decoy);

    let tasks = gen_echo_set(
        &v,
        EchoDifficulty::Hard,
        opts.n_tasks,
        PROMPT_LEN,
        opts.seed.wrapping_add(4),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(5));
    let mut hits_vanilla = 0usize;
    let mut hits_ir = 0usize;
    for task in &tasks {
        let samples = echo_sample_k(&model, task, opts.k, 1.0, &mut rng)?;
        let votes: Vec<VoteSample> = samples
            .iter()
            .map(|s| VoteSample {
                answer: vec![s.answer_token],
                ics: s.ics,
            })
            .collect();
        let want = vec![task.true_answer(&v)];
        if ir_guided_vote(&votes, f64::NEG_INFINITY)?.winner == want {
            hits_vanilla += 1;
        }
        if ir_guided_vote(&votes, ics_floor)?.winner == want {
            hits_ir += 1;
        }
    }
    Ok(EchoVoteReport {
        n_tasks: opts.n_tasks,
        k: opts.k,
        ics_floor,
        mean_ics_true,
        mean_ics_decoy,
        acc_vanilla: hits_vanilla as f64 / opts.n_tasks as f64,
        acc_ir: hits_ir as f64 / opts.n_tasks as f64,
    })
}

// ---------------------------------------------------------------------------
// gate benchmark

/// Fixture for the entropy-gate sweep. The attention geometry makes hard
/// prompts unanswerable on the cheap path: with `local_window` 4 and
/// landmarks every 8 positions, the constraint behind BOS is invisible from
/// the generation site, while the easy position sits on a landmark. The
/// slow path samples `k_slow` candidates and reranks them by energy, which
/// recovers the constraint through the inverse readout.
#[derive(Debug, Clone, PartialEq)]
pub struct GateBenchOptions {
    pub n_tasks: usize,
    /// Fraction of the evaluation suite drawn as hard tasks.
    pub hard_fraction: f64,
    pub k_slow: usize,
    pub train_steps: usize,
    pub c_base: f64,
    pub c_mch: f64,
    /// Evaluate only this threshold instead of sweeping.
    pub tau: Option<f64>,
    pub seed: u64,
}

impl Default for GateBenchOptions {
    fn default() -> Self {
        Self {
            n_tasks: 200,
            hard_fraction: 0.3,
            k_slow: 8,
            train_steps: 600,
            c_base: 1.0,
            c_mch: 7.0,
            tau: None,
            seed: 0,
        }
    }
}

/// One operating point of the gated system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePoint {
    pub tau: f64,
    pub accuracy: f64,
    pub cost: f64,
    /// Fraction of tasks routed to the slow path.
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateBenchReport {
    pub n_tasks: usize,
    pub k_slow: usize,
    pub c_base: f64,
    pub c_mch: f64,
    pub always_fast: GatePoint,
    pub always_slow: GatePoint,
    /// Swept operating points, one per distinct observed entropy plus the
    /// two extremes, sorted by tau.
    pub points: Vec<GatePoint>,
    /// Best point that keeps >= 95% of always-slow accuracy at <= 50% of
    /// always-slow cost, if any: highest accuracy, then lowest cost.
    pub best: Option<GatePoint>,
}

struct TaskOutcome {
    entropy: f64,
    fast_correct: bool,
    slow_correct: bool,
}

fn gate_point(outcomes: &[TaskOutcome], tau: f64, c_base: f64, c_mch: f64) -> CliResult<GatePoint> {
    let decisions: Vec<GateDecision> = outcomes.iter().map(|o| gate(o.entropy, tau)).collect();
    let ledger = cost_account(&decisions, c_base, c_mch)?;
    let hits = outcomes
        .iter()
        .zip(&decisions)
        .filter(|(o, d)| {
            if d.mode == sage_core::gate::Mode::Reasoning {
                o.slow_correct
            } else {
                o.fast_correct
            }
        })
        .count();
    Ok(GatePoint {
        tau,
        accuracy: hits as f64 / outcomes.len() as f64,
        cost: ledger.c_total,
        mu: ledger.mu,
    })
}

/// Sweeps the entropy gate over a mixed easy/hard suite and reports the
/// accuracy/cost frontier against the always-fast and always-slow baselines.
pub fn gate_cost_ablation(opts: &GateBenchOptions) -> CliResult<GateBenchReport> {
    if opts.n_tasks == 0 || opts.k_slow == 0 {
        return Err(CliError::Usage(
            "gate_cost_ablation: n_tasks and k_slow must be >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&opts.hard_fraction) {
        return Err(CliError::Usage(
            "gate_cost_ablation: hard_fraction must be in [0, 1]".into(),
        ));
    }
    let v = echo_vocab();
    let config = ModelConfig {
        l_layers: 2,
        d_model: 16,
        n_heads: 2,
        d_ff: 32,
        vocab_nl: v.size(),
        vocab_code: v.size(),
        k_landmark: 8,
        local_window: 4,
        max_seq_len: 16,
        ..ModelConfig::default()
    };
    let lambda = config.lambda_skepticism;
    let corpus = echo_training_corpus(
        &v,
        &[
            (EchoDifficulty::Easy, 0.0, 48),
            (EchoDifficulty::Hard, 0.0, 48),
        ],
        PROMPT_LEN,
        opts.seed.wrapping_add(1),
    )?;
    let mut model = SageModel::<f64>::new(config, opts.seed)?;
    train_model(
        &mut model,
        &corpus,
        &TrainOptions {
            steps: opts.train_steps,
            seed: opts.seed.wrapping_add(2),
            ..TrainOptions::default()
        },
    )?;

    let n_hard = (opts.n_tasks as f64 * opts.hard_fraction).round() as usize;
    let n_easy = opts.n_tasks - n_hard;
    let mut tasks: Vec<EchoTask> = gen_echo_set(
        &v,
        EchoDifficulty::Easy,
        n_easy,
        PROMPT_LEN,
        opts.seed.wrapping_add(3),
    )?;
    tasks.extend(gen_echo_set(
        &v,
        EchoDifficulty::Hard,
        n_hard,
        PROMPT_LEN,
        opts.seed.wrapping_add(4),
    )?);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(5));
    let mut outcomes = Vec::with_capacity(tasks.len());
    for task in &tasks {
        let want = task.true_answer(&v);
        let entropy = step_entropy(&model.next_token_logits(&task.prompt)?)?;
        let fast_correct = echo_greedy_answer(&model, task)? == want;
        let samples = echo_sample_k(&model, task, opts.k_slow, 1.0, &mut rng)?;
        let cands: Vec<Candidate> = samples
            .iter()
            .map(|s| Candidate::new(s.trace.clone(), s.logp, s.ics, lambda))
            .collect::<Result<_, _>>()?;
        let winner = rerank_candidates(&cands, lambda)?;
        let slow_correct = winner.tokens.last() == Some(&want);
        outcomes.push(TaskOutcome {
            entropy,
            fast_correct,
            slow_correct,
        });
    }

    // entropy is non-negative, so tau = -1 routes everything slow and
    // tau = max entropy routes everything fast (the gate is strict)
    let always_slow = gate_point(&outcomes, -1.0, opts.c_base, opts.c_mch)?;
    let max_entropy = outcomes.iter().map(|o| o.entropy).fold(0.0, f64::max);
    let always_fast = gate_point(&outcomes, max_entropy, opts.c_base, opts.c_mch)?;

    let taus: Vec<f64> = match opts.tau {
        Some(t) => vec![t],
        None => {
            let mut es: Vec<f64> = outcomes.iter().map(|o| o.entropy).collect();
            es.push(-1.0);
            es.sort_by(f64::total_cmp);
            es.dedup();
            es
        }
    };
    let points: Vec<GatePoint> = taus
        .iter()
        .map(|&t| gate_point(&outcomes, t, opts.c_base, opts.c_mch))
        .collect::<Result<_, _>>()?;

    let best = points
        .iter()
        .filter(|p| {
            p.accuracy >= 0.95 * always_slow.accuracy && p.cost <= 0.5 * always_slow.cost
        })
        .max_by(|a, b| {
            a.accuracy
                .total_cmp(&b.accuracy)
                .then(b.cost.total_cmp(&a.cost))
        })
        .copied();

    Ok(GateBenchReport {
        n_tasks: opts.n_tasks,
        k_slow: opts.k_slow,
        c_base: opts.c_base,
        c_mch: opts.c_mch,
        always_fast,
        always_slow,
        points,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_options() {
        let bad = EchoVoteOptions {
            n_tasks: 0,
            ..EchoVoteOptions::default()
        };
        assert!(echo_vote_ablation(&bad).is_err());
        let bad = GateBenchOptions {
            k_slow: 0,
            ..GateBenchOptions::default()
        };
        assert!(gate_cost_ablation(&bad).is_err());
        let bad = GateBenchOptions {
            hard_fraction: 1.5,
            ..GateBenchOptions::default()
        };
        assert!(gate_cost_ablation(&bad).is_err());
    }

    #[test]
    fn vote_ablation_is_deterministic_and_separates_ics() {
        let opts = EchoVoteOptions {
            n_tasks: 24,
            train_steps: 200,
            ..EchoVoteOptions::default()
        };
        let a = echo_vote_ablation(&opts).unwrap();
        let b = echo_vote_ablation(&opts).unwrap();
        assert_eq!(a, b);
        assert!(
            a.mean_ics_true > a.mean_ics_decoy,
            "true traces must reconstruct the prompt better: {} vs {}",
            a.mean_ics_true,
            a.mean_ics_decoy
        );
    }

    #[test]
    fn gate_sweep_brackets_the_baselines() {
        let opts = GateBenchOptions {
            n_tasks: 30,
            train_steps: 200,
            ..GateBenchOptions::default()
        };
        let report = gate_cost_ablation(&opts).unwrap();
        assert_eq!(report.always_slow.mu, 1.0);
        assert_eq!(report.always_fast.mu, 0.0);
        let slow_cost = 30.0 * (opts.c_base + opts.c_mch);
        assert!((report.always_slow.cost - slow_cost).abs() < 1e-9);
        for p in &report.points {
            assert!(p.cost >= report.always_fast.cost - 1e-9);
            assert!(p.cost <= report.always_slow.cost + 1e-9);
        }
        // the sweep includes both extremes
        assert!(report.points.iter().any(|p| p.mu == 1.0));
        assert!(report.points.iter().any(|p| p.mu == 0.0));
    }
}
