//! The full refinement loop on a tabular policy over call templates:
//! collect episodes, distill against teacher preferences, then refine
//! with reinforcement, tracking hallucination frequency at each stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sage_core::estimator::{CategoricalSeqPolicy, ScorePolicy};
use sage_tools::{
    run_episode, to_wire, ArgValue, EpisodeResult, FixedPolicy, TaskSpec, ToolEnv, ToolRegistry,
    ViolationClass, DECOY_KEYS,
};

use crate::dpo::dpo_refine;
use crate::error::{AgentError, AgentResult};
use crate::rl::{rl_refine, RlOptions};
use crate::teacher::build_buffer;

/// Four one-call behaviors for a task: the clean reference call, the
/// same call with one invented option, with two invented options, and
/// with its first required argument dropped.
pub fn call_templates(task: &TaskSpec, registry: &ToolRegistry) -> AgentResult<Vec<String>> {
    let schema = registry.get(&task.oracle.name).ok_or_else(|| {
        AgentError::InvalidArgument(format!("no schema for {}", task.oracle.name))
    })?;
    let decoys: Vec<&str> = DECOY_KEYS
        .iter()
        .filter(|d| !schema.params.contains_key(**d))
        .take(3)
        .copied()
        .collect();
    if decoys.len() < 3 {
        return Err(AgentError::InvalidArgument(
            "schema claims too many decoy names".into(),
        ));
    }
    let first_required = schema
        .params
        .iter()
        .find(|(_, s)| s.required)
        .map(|(k, _)| k.clone())
        .ok_or_else(|| {
            AgentError::InvalidArgument(format!("{} has no required parameter", schema.name))
        })?;

    let mut one_decoy = task.oracle.clone();
    one_decoy
        .arguments
        .insert(decoys[0].to_string(), ArgValue::Bool(true));
    let mut two_decoys = task.oracle.clone();
    two_decoys
        .arguments
        .insert(decoys[1].to_string(), ArgValue::Bool(true));
    two_decoys
        .arguments
        .insert(decoys[2].to_string(), ArgValue::Bool(false));
    let mut dropped = task.oracle.clone();
    dropped.arguments.remove(&first_required);

    Ok(vec![
        to_wire(&task.oracle),
        to_wire(&one_decoy),
        to_wire(&two_decoys),
        to_wire(&dropped),
    ])
}

/// One fresh-environment episode emitting exactly this action text.
pub fn run_template_episode(task: &TaskSpec, text: &str) -> EpisodeResult {
    let mut env = ToolEnv::standard();
    run_episode(&mut env, task, &mut FixedPolicy(text.to_string()), 1)
}

/// +1 for success; failures pay -1 when any serialization or validation
/// violation occurred, plus -0.5 for each invented argument key.
pub fn episode_reward(episode: &EpisodeResult) -> f64 {
    if episode.success {
        return 1.0;
    }
    let mut reward = 0.0;
    if episode.violations().next().is_some() {
        reward -= 1.0;
    }
    let hallucinated = episode
        .violations()
        .filter(|v| v.class() == ViolationClass::HallucinatedKey)
        .count();
    reward -= 0.5 * hallucinated as f64;
    reward
}

/// Fraction of `n` sampled episodes whose call carries an invented key.
pub fn sampled_hallucination_rate(
    policy: &CategoricalSeqPolicy,
    template_hallucinates: &[bool],
    n: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..n)
        .filter(|_| template_hallucinates[policy.sample(&mut rng)[0]])
        .count();
    hits as f64 / n as f64
}

fn exact_hallucination_prob(policy: &CategoricalSeqPolicy, flags: &[bool]) -> f64 {
    policy
        .step_probs(0)
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(p, _)| p)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub collect_episodes: usize,
    pub rate_samples: usize,
    pub distill_beta: f64,
    pub distill_lr: f64,
    pub distill_epochs: usize,
    pub rl: RlOptions,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            collect_episodes: 64,
            rate_samples: 400,
            distill_beta: 0.5,
            distill_lr: 0.5,
            distill_epochs: 30,
            rl: RlOptions {
                updates: 150,
                samples_per_update: 32,
                lr: 0.2,
                baseline_decay: 0.9,
                seed: 0,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    /// Sampled hallucination rates at each stage.
    pub base_rate: f64,
    pub post_distill_rate: f64,
    pub post_rl_rate: f64,
    /// The same quantities computed from the policy distribution.
    pub exact_base: f64,
    pub exact_distill: f64,
    pub exact_rl: f64,
}

/// Base policy, then distillation on teacher preference pairs, then
/// reinforcement against the episode reward.
pub fn distill_then_rl_pipeline(
    task: &TaskSpec,
    opts: &PipelineOptions,
) -> AgentResult<PipelineReport> {
    if opts.collect_episodes == 0 || opts.rate_samples == 0 {
        return Err(AgentError::EmptyInput(
            "pipeline needs episodes and rate samples".into(),
        ));
    }
    let registry = ToolRegistry::standard();
    let templates = call_templates(task, &registry)?;
    let episodes: Vec<EpisodeResult> = templates
        .iter()
        .map(|t| run_template_episode(task, t))
        .collect();
    let flags: Vec<bool> = episodes
        .iter()
        .map(|ep| ep.has_violation(ViolationClass::HallucinatedKey))
        .collect();
    let rewards: Vec<f64> = episodes.iter().map(episode_reward).collect();

    let mut policy = CategoricalSeqPolicy::uniform(1, templates.len())?;
    let reference = policy.clone();
    let base_rate =
        sampled_hallucination_rate(&policy, &flags, opts.rate_samples, opts.seed ^ 0xA5A5);
    let exact_base = exact_hallucination_prob(&policy, &flags);

    // stage one: collect under the base policy and distill on the
    // teacher's corrected-vs-critiqued pairs
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let batch: Vec<(TaskSpec, EpisodeResult)> = (0..opts.collect_episodes)
        .map(|_| {
            let idx = policy.sample(&mut rng)[0];
            (task.clone(), episodes[idx].clone())
        })
        .collect();
    let buffer = build_buffer(&batch, &registry, &ToolEnv::standard)?;
    let trace_pairs: Vec<(Vec<usize>, Vec<usize>)> = buffer
        .pairs
        .iter()
        .map(|pair| {
            let find = |action: &str| {
                templates
                    .iter()
                    .position(|t| t == action)
                    .ok_or_else(|| AgentError::InvalidArgument("untracked action".into()))
            };
            Ok((
                vec![find(&pair.chosen.steps[0].action)?],
                vec![find(&pair.rejected.steps[0].action)?],
            ))
        })
        .collect::<AgentResult<_>>()?;
    if !trace_pairs.is_empty() {
        dpo_refine(
            &mut policy,
            &reference,
            &trace_pairs,
            opts.distill_beta,
            opts.distill_lr,
            opts.distill_epochs,
        )?;
    }
    let post_distill_rate =
        sampled_hallucination_rate(&policy, &flags, opts.rate_samples, opts.seed ^ 0x5A5A);
    let exact_distill = exact_hallucination_prob(&policy, &flags);

    // stage two: reinforcement against the episode reward
    rl_refine(&mut policy, |z: &[usize]| rewards[z[0]], &opts.rl)?;
    let post_rl_rate =
        sampled_hallucination_rate(&policy, &flags, opts.rate_samples, opts.seed ^ 0x3C3C);
    let exact_rl = exact_hallucination_prob(&policy, &flags);

    Ok(PipelineReport {
        base_rate,
        post_distill_rate,
        post_rl_rate,
        exact_base,
        exact_distill,
        exact_rl,
    })
}
