//! Subcommand implementations. Each one validates its inputs, writes
//! `manifest.json` plus its artifacts into the output directory, and
//! returns a summary for the binary to print. All file contents are pure
//! functions of (config, seed), never of the clock.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sage_agent::{distill_then_rl_pipeline, mch_recovery_ablation, PipelineOptions};
use sage_core::config::ModelConfig;
use sage_core::model::SageModel;
use sage_core::rerank::{ir_guided_vote, rerank_candidates, Candidate, VoteSample};
use sage_core::trainer::{train_model, TrainOptions, TrainStats};
use sage_reliability::{parse_scenario, run_scenario, ReliabilityParams, ScenarioReport};
use sage_tools::{
    negative_constraint_samples, run_episode, standard_tasks, validate_call, GarbagePolicy,
    OraclePolicy, ToolEnv, ToolRegistry,
};

use crate::error::{CliError, CliResult};
use crate::experiments::{gate_cost_ablation, GateBenchOptions, GateBenchReport};
use crate::manifest::RunManifest;

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct CommonOpts {
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

impl CommonOpts {
    fn manifest(&self, subcommand: &str) -> RunManifest {
        RunManifest::new(subcommand, self.config.as_deref(), self.seed, &self.out)
    }
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(dir, name, &(text + "\n"))
}

// ---------------------------------------------------------------------------
// train

/// One corpus line: whitespace-separated token ids, with an optional `|`
/// splitting the prompt from the reasoning continuation the mask covers.
fn parse_corpus_line(line: &str, lineno: usize) -> CliResult<(Vec<usize>, Vec<bool>)> {
    let bad = |msg: String| CliError::Usage(format!("corpus line {lineno}: {msg}"));
    let (left, right) = match line.split_once('|') {
        Some((l, r)) => {
            if r.contains('|') {
                return Err(bad("more than one '|'".into()));
            }
            (l, r)
        }
        None => (line, ""),
    };
    let parse = |part: &str| -> CliResult<Vec<usize>> {
        part.split_whitespace()
            .map(|w| {
                w.parse::<usize>()
                    .map_err(|_| bad(format!("bad token {w:?}")))
            })
            .collect()
    };
    let prompt = parse(left)?;
    let masked = parse(right)?;
    if prompt.is_empty() && masked.is_empty() {
        return Err(bad("no tokens".into()));
    }
    let mut tokens = prompt.clone();
    tokens.extend(&masked);
    let mut mask = vec![false; prompt.len()];
    mask.extend(std::iter::repeat(true).take(masked.len()));
    Ok((tokens, mask))
}

pub fn parse_corpus(text: &str) -> CliResult<Vec<(Vec<usize>, Vec<bool>)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_corpus_line(line, i + 1)?);
    }
    if out.is_empty() {
        return Err(CliError::Usage("corpus has no sequences".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub final_total: f64,
    pub final_fwd: f64,
    pub final_inv: f64,
}

/// Trains on the corpus and writes `model.ckpt` plus `loss.csv`
/// (step, total, forward, inverse).
pub fn cmd_train(common: &CommonOpts, corpus_path: &Path, steps: usize) -> CliResult<TrainSummary> {
    let text = fs::read_to_string(corpus_path)
        .map_err(|e| CliError::Usage(format!("corpus {}: {e}", corpus_path.display())))?;
    let corpus = parse_corpus(&text)?;
    let config = match &common.config {
        Some(p) => ModelConfig::load(p)?,
        None => ModelConfig::default(),
    };
    common.manifest("train").write()?;

    let mut model = SageModel::<f64>::new(config, common.seed)?;
    let stats = train_model(
        &mut model,
        &corpus,
        &TrainOptions {
            steps,
            seed: common.seed,
            ..TrainOptions::default()
        },
    )?;

    let mut csv = String::from("step,loss_total,loss_fwd,loss_inv\n");
    for TrainStats {
        step,
        total,
        fwd,
        inv,
    } in &stats
    {
        writeln!(csv, "{step},{total},{fwd},{inv}").expect("string write");
    }
    write_text(&common.out, "loss.csv", &csv)?;
    model.save(common.out.join("model.ckpt"))?;

    let last = stats.last().expect("steps >= 1 was validated by training");
    Ok(TrainSummary {
        steps: stats.len(),
        final_total: last.total,
        final_fwd: last.fwd,
        final_inv: last.inv,
    })
}

// ---------------------------------------------------------------------------
// rank

/// One prompt line: token ids, optionally `-> t` with the expected final
/// token for scoring.
fn parse_prompt_line(line: &str, lineno: usize) -> CliResult<(Vec<usize>, Option<usize>)> {
    let bad = |msg: String| CliError::Usage(format!("prompts line {lineno}: {msg}"));
    let (left, key) = match line.split_once("->") {
        Some((l, r)) => {
            let t = r
                .trim()
                .parse::<usize>()
                .map_err(|_| bad(format!("bad answer key {:?}", r.trim())))?;
            (l, Some(t))
        }
        None => (line, None),
    };
    let tokens: Vec<usize> = left
        .split_whitespace()
        .map(|w| {
            w.parse::<usize>()
                .map_err(|_| bad(format!("bad token {w:?}")))
        })
        .collect::<CliResult<_>>()?;
    if tokens.is_empty() {
        return Err(bad("empty prompt".into()));
    }
    Ok((tokens, key))
}

pub fn parse_prompts(text: &str) -> CliResult<Vec<(Vec<usize>, Option<usize>)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_prompt_line(line, i + 1)?);
    }
    if out.is_empty() {
        return Err(CliError::Usage("prompts file has no prompts".into()));
    }
    Ok(out)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Vote and winner accuracies over the prompts that carry answer keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAccuracy {
    pub n_scored: usize,
    pub ics_floor: f64,
    pub acc_vanilla_vote: f64,
    pub acc_ir_vote: f64,
    pub acc_energy_winner: f64,
    pub acc_logp_winner: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub n_prompts: usize,
    pub k: usize,
    pub lambda: f64,
    pub accuracy: Option<RankAccuracy>,
}

fn same_candidate(c: &Candidate, w: &Candidate) -> bool {
    c.tokens == w.tokens && c.logp == w.logp && c.ics == w.ics
}

/// Samples `k` two-token continuations per prompt, scores them, and writes
/// `rank.csv` with per-candidate rows plus energy- and likelihood-winner
/// flags. Prompts with `-> t` answer keys additionally produce
/// `rank_report.json` comparing plain and ICS-filtered majority votes.
pub fn cmd_rank(
    common: &CommonOpts,
    checkpoint: &Path,
    prompts_path: &Path,
    k: usize,
    lambda: Option<f64>,
) -> CliResult<RankSummary> {
    if k == 0 {
        return Err(CliError::Usage("rank: k must be >= 1".into()));
    }
    let config_path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("rank: --config is required to shape the model".into()))?;
    let config = ModelConfig::load(config_path)?;
    let lambda = lambda.unwrap_or(config.lambda_skepticism);
    let model = SageModel::<f64>::load(config, checkpoint)?;
    let text = fs::read_to_string(prompts_path)
        .map_err(|e| CliError::Usage(format!("prompts {}: {e}", prompts_path.display())))?;
    let prompts = parse_prompts(&text)?;
    common.manifest("rank").write()?;

    let mut csv =
        String::from("prompt,candidate,tokens,logp,ics,energy,energy_winner,logp_winner\n");
    let mut keyed: Vec<(Vec<VoteSample>, usize, usize, usize)> = Vec::new();
    let mut all_keyed_ics: Vec<f64> = Vec::new();
    for (i, (prompt, key)) in prompts.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(common.seed.wrapping_add(i as u64));
        let mut cands = Vec::with_capacity(k);
        for _ in 0..k {
            let (tokens, logp) = model.sample_continuation(prompt, 2, 1.0, &mut rng)?;
            let ics = model.compute_ics(&tokens, prompt)?;
            cands.push(Candidate::new(tokens, logp, ics, lambda)?);
        }
        let by_energy = rerank_candidates(&cands, lambda)?;
        let by_logp = rerank_candidates(&cands, 0.0)?;
        let mut energy_flagged = false;
        let mut logp_flagged = false;
        for (j, c) in cands.iter().enumerate() {
            let is_energy = !energy_flagged && same_candidate(c, &by_energy);
            energy_flagged |= is_energy;
            let is_logp = !logp_flagged && same_candidate(c, &by_logp);
            logp_flagged |= is_logp;
            let toks: Vec<String> = c.tokens.iter().map(|t| t.to_string()).collect();
            writeln!(
                csv,
                "{i},{j},{},{},{},{},{},{}",
                toks.join(";"),
                c.logp,
                c.ics,
                c.energy,
                u8::from(is_energy),
                u8::from(is_logp)
            )
            .expect("string write");
        }
        if let Some(want) = key {
            let votes: Vec<VoteSample> = cands
                .iter()
                .map(|c| VoteSample {
                    answer: vec![*c.tokens.last().expect("continuation length 2")],
                    ics: c.ics,
                })
                .collect();
            all_keyed_ics.extend(votes.iter().map(|s| s.ics));
            let hit_energy = usize::from(by_energy.tokens.last() == Some(want));
            let hit_logp = usize::from(by_logp.tokens.last() == Some(want));
            keyed.push((votes, *want, hit_energy, hit_logp));
        }
    }
    write_text(&common.out, "rank.csv", &csv)?;

    let accuracy = if keyed.is_empty() {
        None
    } else {
        let floor = median(all_keyed_ics);
        let n = keyed.len() as f64;
        let mut vanilla = 0usize;
        let mut ir = 0usize;
        let mut energy = 0usize;
        let mut logp = 0usize;
        for (votes, want, hit_energy, hit_logp) in &keyed {
            let target = vec![*want];
            vanilla += usize::from(ir_guided_vote(votes, f64::NEG_INFINITY)?.winner == target);
            ir += usize::from(ir_guided_vote(votes, floor)?.winner == target);
            energy += hit_energy;
            logp += hit_logp;
        }
        let acc = RankAccuracy {
            n_scored: keyed.len(),
            ics_floor: floor,
            acc_vanilla_vote: vanilla as f64 / n,
            acc_ir_vote: ir as f64 / n,
            acc_energy_winner: energy as f64 / n,
            acc_logp_winner: logp as f64 / n,
        };
        write_json(&common.out, "rank_report.json", &acc)?;
        Some(acc)
    };

    Ok(RankSummary {
        n_prompts: prompts.len(),
        k,
        lambda,
        accuracy,
    })
}

// ---------------------------------------------------------------------------
// reliability

/// Runs the scenario checks and writes `report.json` plus `curves.csv`.
/// A failed check is reported through the exit code, after the artifacts
/// are on disk.
pub fn cmd_reliability(common: &CommonOpts, trials: u64) -> CliResult<ScenarioReport> {
    let params = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("scenario {}: {e}", p.display())))?;
            parse_scenario(&text)?
        }
        None => ReliabilityParams::default(),
    };
    common.manifest("reliability").write()?;

    let report = run_scenario(&params, trials, common.seed)?;
    write_json(&common.out, "report.json", &report)?;

    let mut csv = String::from("n,standard,retry,hybrid\n");
    for n in 0..report.curves.standard.len() {
        writeln!(
            csv,
            "{n},{},{},{}",
            report.curves.standard[n], report.curves.retry[n], report.curves.hybrid[n]
        )
        .expect("string write");
    }
    write_text(&common.out, "curves.csv", &csv)?;

    if !report.all_passed() {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(CliError::Check(format!(
            "reliability checks failed: {}",
            failed.join(", ")
        )));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// distill

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillRow {
    pub task: String,
    pub exact_base: f64,
    pub exact_distill: f64,
    pub exact_rl: f64,
    pub sampled_base: f64,
    pub sampled_distill: f64,
    pub sampled_rl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillSummary {
    pub rows: Vec<DistillRow>,
    pub mean_exact_base: f64,
    pub mean_exact_distill: f64,
    pub mean_exact_rl: f64,
    /// Base >= distill >= RL on the mean exact hallucination rate.
    pub ordering_holds: bool,
}

/// Runs the distill-then-reinforce pipeline on every standard task and
/// writes `distill.csv` plus `distill_report.json` with the hallucination
/// rate at each stage.
pub fn cmd_distill(common: &CommonOpts, rate_samples: usize) -> CliResult<DistillSummary> {
    if rate_samples == 0 {
        return Err(CliError::Usage("distill: trials must be >= 1".into()));
    }
    common.manifest("distill").write()?;

    let mut rows = Vec::new();
    for (i, task) in standard_tasks().iter().enumerate() {
        let mut opts = PipelineOptions::default();
        opts.rate_samples = rate_samples;
        opts.seed = common.seed.wrapping_add(i as u64);
        opts.rl.seed = common.seed.wrapping_add(1000 + i as u64);
        let report = distill_then_rl_pipeline(task, &opts)?;
        rows.push(DistillRow {
            task: task.name.clone(),
            exact_base: report.exact_base,
            exact_distill: report.exact_distill,
            exact_rl: report.exact_rl,
            sampled_base: report.base_rate,
            sampled_distill: report.post_distill_rate,
            sampled_rl: report.post_rl_rate,
        });
    }

    let mut csv = String::from(
        "task,exact_base,exact_distill,exact_rl,sampled_base,sampled_distill,sampled_rl\n",
    );
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.task,
            r.exact_base,
            r.exact_distill,
            r.exact_rl,
            r.sampled_base,
            r.sampled_distill,
            r.sampled_rl
        )
        .expect("string write");
    }
    write_text(&common.out, "distill.csv", &csv)?;

    let n = rows.len() as f64;
    let mean_exact_base = rows.iter().map(|r| r.exact_base).sum::<f64>() / n;
    let mean_exact_distill = rows.iter().map(|r| r.exact_distill).sum::<f64>() / n;
    let mean_exact_rl = rows.iter().map(|r| r.exact_rl).sum::<f64>() / n;
    let summary = DistillSummary {
        ordering_holds: mean_exact_base >= mean_exact_distill
            && mean_exact_distill >= mean_exact_rl,
        mean_exact_base,
        mean_exact_distill,
        mean_exact_rl,
        rows,
    };
    write_json(&common.out, "distill_report.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// gate-bench

/// Runs the entropy-gate sweep and writes `gate_bench.csv` plus
/// `gate_report.json`.
pub fn cmd_gate_bench(common: &CommonOpts, opts: &GateBenchOptions) -> CliResult<GateBenchReport> {
    common.manifest("gate-bench").write()?;
    let report = gate_cost_ablation(opts)?;

    let mut csv = String::from("tau,accuracy,cost,mu\n");
    for p in &report.points {
        writeln!(csv, "{},{},{},{}", p.tau, p.accuracy, p.cost, p.mu).expect("string write");
    }
    write_text(&common.out, "gate_bench.csv", &csv)?;
    write_json(&common.out, "gate_report.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// eval-tools

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalToolsReport {
    pub oracle_success_rate: f64,
    pub garbage_success_rate: f64,
    pub negatives_total: usize,
    /// Mutants that tripped exactly their intended violation class.
    pub negatives_confirmed: usize,
    pub irr_with_mch: f64,
    pub irr_without: f64,
    pub detector_accuracy: f64,
}

/// Exercises the tool suite: oracle and garbage success rates, negative
/// sample confirmation, and the recovery-rate ablation. Writes
/// `eval_tools.json`.
pub fn cmd_eval_tools(common: &CommonOpts, episodes: usize) -> CliResult<EvalToolsReport> {
    if episodes == 0 {
        return Err(CliError::Usage("eval-tools: trials must be >= 1".into()));
    }
    common.manifest("eval-tools").write()?;

    let tasks = standard_tasks();
    let registry = ToolRegistry::standard();
    let mut oracle_hits = 0usize;
    let mut garbage_hits = 0usize;
    let mut negatives_total = 0usize;
    let mut negatives_confirmed = 0usize;
    for (i, task) in tasks.iter().enumerate() {
        let mut env = ToolEnv::standard();
        oracle_hits += usize::from(run_episode(&mut env, task, &mut OraclePolicy, 4).success);
        let mut env = ToolEnv::standard();
        garbage_hits += usize::from(run_episode(&mut env, task, &mut GarbagePolicy, 4).success);

        let schema = registry
            .schemas
            .get(&task.oracle.name)
            .ok_or_else(|| CliError::Usage(format!("no schema for {}", task.oracle.name)))?;
        let samples =
            negative_constraint_samples(&task.oracle, schema, common.seed.wrapping_add(i as u64))?;
        for sample in samples {
            negatives_total += 1;
            let violations = validate_call(&sample.call, &registry.schemas);
            if violations.len() == 1 && violations[0].class() == sample.intended {
                negatives_confirmed += 1;
            }
        }
    }

    let ablation = mch_recovery_ablation(episodes)?;
    let report = EvalToolsReport {
        oracle_success_rate: oracle_hits as f64 / tasks.len() as f64,
        garbage_success_rate: garbage_hits as f64 / tasks.len() as f64,
        negatives_total,
        negatives_confirmed,
        irr_with_mch: ablation.irr_with_mch,
        irr_without: ablation.irr_without,
        detector_accuracy: ablation.detector_accuracy,
    };
    write_json(&common.out, "eval_tools.json", &report)?;
    Ok(report)
}
