//! Simulated tool-calling environment: typed schemas, strict call
//! validation, hard-negative generation, plan DAG checking, and a
//! deterministic episode runner with fault injection.

pub mod env;
pub mod error;
pub mod negatives;
pub mod plan;
pub mod schema;
pub mod validate;

pub use env::{
    irr, run_episode, standard_tasks, EpisodeResult, FaultKind, FixedPolicy, GarbagePolicy, Goal,
    InjectKind, OraclePolicy, Policy, RecoveryRecord, RepairPolicy, TaskSpec, ToolEnv,
    ToolRegistry, ToolResponse, Turn,
};
pub use error::{ToolError, ToolResult};
pub use negatives::{negative_constraint_samples, NegativeSample, DECOY_KEYS};
pub use plan::{validate_plan_dag, PlanDag, PlanError, PlanStep};
pub use schema::{
    parse_wire, to_wire, ArgValue, ParamSpec, ParamType, ToolCall, ToolSchema, ValueDomain,
};
pub use validate::{validate_call, validate_wire, Violation, ViolationClass};
