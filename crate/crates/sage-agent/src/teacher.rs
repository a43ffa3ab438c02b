//! The scripted teacher: reads a failed trajectory, names the first
//! defect, and produces a corrected demonstration by re-executing the
//! task's reference call to success.

use sage_tools::{
    parse_wire, run_episode, validate_call, EpisodeResult, FaultKind, OraclePolicy, TaskSpec,
    ToolEnv, ToolRegistry, ToolResponse, ViolationClass,
};

use crate::error::{AgentError, AgentResult};
use crate::trajectory::{concat_critique, trajectory_from_episode, Trajectory, REJECTED_OBS};

#[derive(Debug, Clone, PartialEq)]
pub struct Critique {
    /// 1-based index of the step being blamed; one past the end when no
    /// single step failed.
    pub step: usize,
    pub diagnosis: String,
    pub advice: String,
}

impl Critique {
    pub fn render(&self) -> String {
        format!("step {}: {}; {}", self.step, self.diagnosis, self.advice)
    }
}

fn template(class: ViolationClass) -> (&'static str, &'static str) {
    match class {
        ViolationClass::Malformed => (
            "the action was not a tool call",
            "emit exactly one well-formed tool call",
        ),
        ViolationClass::UnknownTool => (
            "the named tool does not exist",
            "call only registered tools",
        ),
        ViolationClass::Type => (
            "an argument had the wrong type",
            "match every parameter's declared type",
        ),
        ViolationClass::HallucinatedKey => (
            "an argument key was invented",
            "pass only declared parameters",
        ),
        ViolationClass::MissingRequired => (
            "a required argument was missing",
            "fill in every required parameter",
        ),
        ViolationClass::Logic => (
            "an argument value was impossible",
            "keep values inside the documented domain",
        ),
    }
}

fn fault_template(kind: FaultKind) -> (&'static str, &'static str) {
    match kind {
        FaultKind::Timeout => ("the call timed out", "retry with backoff"),
        FaultKind::ParameterMismatch => (
            "the environment rejected the call at runtime",
            "check that the referenced resource exists, then retry",
        ),
        FaultKind::Refused => (
            "the call was refused",
            "set the confirmation flag deliberately and avoid protected targets",
        ),
        // resolved to a concrete violation class by the caller
        FaultKind::Validation => (
            "the call failed validation",
            "reread the tool schema before calling",
        ),
    }
}

/// Name the first defect in a failed trajectory. Succeeding trajectories
/// have nothing to critique and are an error by contract.
pub fn teacher_critique(traj: &Trajectory, registry: &ToolRegistry) -> AgentResult<Critique> {
    if traj.success {
        return Err(AgentError::CritiqueOfSuccess);
    }
    for (i, step) in traj.steps.iter().enumerate() {
        let blame = |(diagnosis, advice): (&str, &str)| Critique {
            step: i + 1,
            diagnosis: diagnosis.to_string(),
            advice: advice.to_string(),
        };
        if step.observation == REJECTED_OBS {
            return Ok(blame(template(ViolationClass::Malformed)));
        }
        let Ok(response) = serde_json::from_str::<ToolResponse>(&step.observation) else {
            continue;
        };
        match response {
            ToolResponse::Ok { .. } => continue,
            ToolResponse::Fault { kind, .. } => {
                if kind == FaultKind::Validation {
                    // the action text still holds the defect; re-derive
                    // the precise class instead of parsing prose
                    if let Ok(call) = parse_wire(&step.action) {
                        if let Some(v) = validate_call(&call, &registry.schemas).first() {
                            return Ok(blame(template(v.class())));
                        }
                    }
                }
                return Ok(blame(fault_template(kind)));
            }
        }
    }
    Ok(Critique {
        step: traj.steps.len() + 1,
        diagnosis: "no step failed, but the goal was never reached".to_string(),
        advice: "replan toward the stated goal".to_string(),
    })
}

/// Produce a corrected demonstration by executing the task's reference
/// call in the given environment. Errors when even that fails.
pub fn teacher_correct(task: &TaskSpec, env: &mut ToolEnv) -> AgentResult<Trajectory> {
    let episode = run_episode(env, task, &mut OraclePolicy, 4);
    if !episode.success {
        return Err(AgentError::CorrectionUnavailable(format!(
            "reference call for \"{}\" did not reach the goal",
            task.name
        )));
    }
    Ok(trajectory_from_episode(task, &episode))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub chosen: Trajectory,
    pub rejected: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistillBuffer {
    /// Label-1 trajectories: every success, plus one correction per failure.
    pub positives: Vec<Trajectory>,
    /// Label-0 trajectories: each failure with its critique appended.
    pub negatives: Vec<Trajectory>,
    pub pairs: Vec<PreferencePair>,
}

/// Turn a batch of episodes into training material. Successes pass
/// through as positives; each failure contributes a corrected positive,
/// a critiqued negative, and one preference pair.
pub fn build_buffer(
    batch: &[(TaskSpec, EpisodeResult)],
    registry: &ToolRegistry,
    make_env: &dyn Fn() -> ToolEnv,
) -> AgentResult<DistillBuffer> {
    let mut buffer = DistillBuffer::default();
    for (task, episode) in batch {
        let traj = trajectory_from_episode(task, episode);
        if traj.success {
            buffer.positives.push(traj);
            continue;
        }
        let critique = teacher_critique(&traj, registry)?;
        let corrected = teacher_correct(task, &mut make_env())?;
        let rejected = concat_critique(&traj, &critique);
        buffer.positives.push(corrected.clone());
        buffer.negatives.push(rejected.clone());
        buffer.pairs.push(PreferencePair {
            chosen: corrected,
            rejected,
        });
    }
    Ok(buffer)
}
