//! Agent-side training machinery: trajectories and a scripted teacher
//! that critiques and corrects them, preference distillation, score-
//! function reinforcement, and a learned step-correctness detector.

pub mod dpo;
pub mod error;
pub mod mch;
pub mod pipeline;
pub mod rl;
pub mod teacher;
pub mod trajectory;

pub use dpo::{dpo_loss, dpo_refine, PairLogps};
pub use error::{AgentError, AgentResult};
pub use mch::{
    collect_labeled_turns, mch_recovery_ablation, turn_features, MchAblationReport, MchClassifier,
    MchRecoveringPolicy, TimeoutOnlyPolicy, N_FEATURES,
};
pub use pipeline::{
    call_templates, distill_then_rl_pipeline, episode_reward, run_template_episode,
    sampled_hallucination_rate, PipelineOptions, PipelineReport,
};
pub use rl::{rl_refine, RlOptions, RlReport};
pub use teacher::{
    build_buffer, teacher_correct, teacher_critique, Critique, DistillBuffer, PreferencePair,
};
pub use trajectory::{
    concat_critique, trajectory_from_episode, TrajStep, Trajectory, CRITIQUE_SEP, REJECTED_OBS,
};
