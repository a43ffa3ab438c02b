//! Trajectories: the text-level record a teacher reads and a student
//! learns from. Observations are the environment responses rendered as
//! JSON so a trajectory stands alone without the episode that made it.

use serde::{Deserialize, Serialize};

use sage_tools::{EpisodeResult, TaskSpec, ToolResponse};

use crate::teacher::Critique;

/// Observation recorded when the action text never parsed.
pub const REJECTED_OBS: &str = "action rejected: not a tool call";

/// Separator between a trajectory's own text and an appended critique.
pub const CRITIQUE_SEP: &str = "\n<critique>\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajStep {
    pub observation: String,
    pub action: String,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub context: String,
    pub steps: Vec<TrajStep>,
    pub conclusion: String,
    pub reasoning: String,
    pub success: bool,
}

/// Flatten an episode into its text record. Step rewards are +1 for a
/// successful response and -1 otherwise; the conclusion repeats the
/// final payload when the task was solved.
pub fn trajectory_from_episode(task: &TaskSpec, episode: &EpisodeResult) -> Trajectory {
    let steps: Vec<TrajStep> = episode
        .turns
        .iter()
        .map(|turn| {
            let (observation, reward) = match &turn.response {
                Some(r) => (
                    serde_json::to_string(r).expect("responses always serialize"),
                    if r.is_ok() { 1.0 } else { -1.0 },
                ),
                None => (REJECTED_OBS.to_string(), -1.0),
            };
            TrajStep {
                observation,
                action: turn.action_text.clone(),
                reward,
            }
        })
        .collect();
    let conclusion = if episode.success {
        episode
            .turns
            .iter()
            .rev()
            .find_map(|t| match &t.response {
                Some(ToolResponse::Ok { payload }) => Some(payload.clone()),
                _ => None,
            })
            .unwrap_or_default()
    } else {
        "unresolved".to_string()
    };
    Trajectory {
        context: task.prompt.clone(),
        steps,
        conclusion,
        reasoning: "pick the one registered tool whose effect is the stated goal".to_string(),
        success: episode.success,
    }
}

/// The trajectory with a critique appended after the separator token.
/// Used as the label-0 side of a preference pair.
pub fn concat_critique(traj: &Trajectory, critique: &Critique) -> Trajectory {
    let mut out = traj.clone();
    out.conclusion = format!("{}{}{}", out.conclusion, CRITIQUE_SEP, critique.render());
    out
}
