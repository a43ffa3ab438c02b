//! Step-correctness detection: a logistic probe over response features,
//! trained on environment ground truth, driving a retry policy.
//!
//! The ablation pits that learned detector against a heuristic that
//! recognizes timeouts only, measured by injection recovery rate.

use sage_tools::{
    irr, run_episode, standard_tasks, to_wire, EpisodeResult, FaultKind, FixedPolicy, InjectKind,
    OraclePolicy, Policy, TaskSpec, ToolEnv, ToolResponse, Turn,
};

use crate::error::{AgentError, AgentResult};

pub const N_FEATURES: usize = 6;

/// [bias, nonempty payload, timeout, parameter mismatch, validation,
/// refused]; every field observable by the agent at the turn boundary.
pub fn turn_features(turn: &Turn) -> [f64; N_FEATURES] {
    let mut f = [0.0; N_FEATURES];
    f[0] = 1.0;
    match &turn.response {
        None => {}
        Some(ToolResponse::Ok { payload }) => {
            f[1] = if payload.is_empty() { 0.0 } else { 1.0 };
        }
        Some(ToolResponse::Fault { kind, .. }) => {
            let slot = match kind {
                FaultKind::Timeout => 2,
                FaultKind::ParameterMismatch => 3,
                FaultKind::Validation => 4,
                FaultKind::Refused => 5,
            };
            f[slot] = 1.0;
        }
    }
    f
}

/// Ground-truth labels: a turn counts as correct exactly when the
/// environment answered Ok.
pub fn collect_labeled_turns(episodes: &[EpisodeResult]) -> Vec<([f64; N_FEATURES], bool)> {
    episodes
        .iter()
        .flat_map(|ep| ep.turns.iter())
        .map(|turn| {
            let label = turn.response.as_ref().is_some_and(ToolResponse::is_ok);
            (turn_features(turn), label)
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MchClassifier {
    pub weights: [f64; N_FEATURES],
}

impl MchClassifier {
    /// Full-batch logistic regression; the feature set is separable so
    /// modest epochs reach clean decisions.
    pub fn train(
        data: &[([f64; N_FEATURES], bool)],
        lr: f64,
        epochs: usize,
    ) -> AgentResult<Self> {
        if data.is_empty() {
            return Err(AgentError::EmptyInput("classifier needs examples".into()));
        }
        let mut weights = [0.0; N_FEATURES];
        let inv_n = 1.0 / data.len() as f64;
        for _ in 0..epochs {
            let mut grad = [0.0; N_FEATURES];
            for (x, y) in data {
                let err = (if *y { 1.0 } else { 0.0 }) - sigmoid(dot(&weights, x));
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g += err * xi;
                }
            }
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w += lr * g * inv_n;
            }
        }
        Ok(Self { weights })
    }

    pub fn prob_correct(&self, features: &[f64; N_FEATURES]) -> f64 {
        sigmoid(dot(&self.weights, features))
    }

    pub fn accuracy(&self, data: &[([f64; N_FEATURES], bool)]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .iter()
            .filter(|(x, y)| (self.prob_correct(x) >= 0.5) == *y)
            .count();
        hits as f64 / data.len() as f64
    }
}

fn dot(a: &[f64; N_FEATURES], b: &[f64; N_FEATURES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Retries the reference call whenever the detector flags the previous
/// step as incorrect; otherwise declares the work done. Recovery
/// therefore happens exactly when the detector catches the fault.
pub struct MchRecoveringPolicy {
    pub classifier: MchClassifier,
}

impl Policy for MchRecoveringPolicy {
    fn act(&mut self, task: &TaskSpec, transcript: &[Turn]) -> String {
        match transcript.last() {
            None => to_wire(&task.oracle),
            Some(last) => {
                if self.classifier.prob_correct(&turn_features(last)) < 0.5 {
                    to_wire(&task.oracle)
                } else {
                    "done".into()
                }
            }
        }
    }
}

/// The heuristic baseline: retries after a timeout, treats every other
/// response as final.
pub struct TimeoutOnlyPolicy;

impl Policy for TimeoutOnlyPolicy {
    fn act(&mut self, task: &TaskSpec, transcript: &[Turn]) -> String {
        match transcript.last() {
            None => to_wire(&task.oracle),
            Some(last) => match &last.response {
                Some(ToolResponse::Fault {
                    kind: FaultKind::Timeout,
                    ..
                }) => to_wire(&task.oracle),
                _ => "done".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MchAblationReport {
    pub irr_with_mch: f64,
    pub irr_without: f64,
    pub detector_accuracy: f64,
}

/// Episodes used to fit the detector: clean and injected runs of every
/// standard task under the reference policy, plus one validation fault
/// and one refusal so every feature column carries signal.
fn training_episodes() -> Vec<EpisodeResult> {
    let mut episodes = Vec::new();
    for task in standard_tasks() {
        let mut env = ToolEnv::standard();
        episodes.push(run_episode(&mut env, &task, &mut OraclePolicy, 4));
        for kind in [InjectKind::Timeout, InjectKind::ParameterMismatch] {
            let mut env = ToolEnv::standard();
            env.inject_error(kind, 1).unwrap();
            episodes.push(run_episode(&mut env, &task, &mut OraclePolicy, 4));
        }
    }
    let task = &standard_tasks()[0];
    let invalid = to_wire(&sage_tools::ToolCall::new(
        "book_flight",
        vec![
            ("date", sage_tools::ArgValue::Int(5)),
            ("dest", sage_tools::ArgValue::Str("lima".into())),
        ],
    ));
    let mut env = ToolEnv::standard();
    episodes.push(run_episode(&mut env, task, &mut FixedPolicy(invalid), 1));
    let timid = to_wire(&sage_tools::ToolCall::new(
        "delete_path",
        vec![
            ("path", sage_tools::ArgValue::Str("/tmp/scratch.txt".into())),
            ("confirm", sage_tools::ArgValue::Bool(false)),
        ],
    ));
    let mut env = ToolEnv::standard();
    episodes.push(run_episode(&mut env, task, &mut FixedPolicy(timid), 1));
    episodes
}

/// Recovery-rate comparison over `n_episodes` injected episodes per arm,
/// alternating fault kinds across the standard tasks deterministically.
pub fn mch_recovery_ablation(n_episodes: usize) -> AgentResult<MchAblationReport> {
    if n_episodes == 0 {
        return Err(AgentError::EmptyInput("ablation needs episodes".into()));
    }
    let data = collect_labeled_turns(&training_episodes());
    let classifier = MchClassifier::train(&data, 2.0, 400)?;
    let detector_accuracy = classifier.accuracy(&data);

    let tasks = standard_tasks();
    let mut with_mch = Vec::with_capacity(n_episodes);
    let mut without = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        let task = &tasks[i % tasks.len()];
        let kind = if i % 2 == 0 {
            InjectKind::Timeout
        } else {
            InjectKind::ParameterMismatch
        };

        let mut env = ToolEnv::standard();
        env.inject_error(kind, 1).unwrap();
        let mut policy = MchRecoveringPolicy {
            classifier: classifier.clone(),
        };
        with_mch.push(run_episode(&mut env, task, &mut policy, 4));

        let mut env = ToolEnv::standard();
        env.inject_error(kind, 1).unwrap();
        without.push(run_episode(&mut env, task, &mut TimeoutOnlyPolicy, 4));
    }
    Ok(MchAblationReport {
        irr_with_mch: irr(&with_mch)?,
        irr_without: irr(&without)?,
        detector_accuracy,
    })
}
