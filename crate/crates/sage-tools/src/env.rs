//! Simulated tool environment and episode runner.
//!
//! State is all in memory and every operation is deterministic, so an
//! episode replayed with the same policy and injections produces the
//! same transcript byte for byte.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{ToolError, ToolResult};
use crate::schema::{to_wire, ArgValue, ParamSpec, ParamType, ToolCall, ToolSchema, ValueDomain};
use crate::validate::{validate_call, Violation, ViolationClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    Timeout,
    /// The environment rejected a schema-valid call at runtime: missing
    /// file, unknown lookup key, and injected flakes of the same shape.
    ParameterMismatch,
    Validation,
    Refused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ToolResponse {
    Ok { payload: String },
    Fault { kind: FaultKind, message: String },
}

impl ToolResponse {
    pub fn is_ok(&self) -> bool {
        matches!(self, ToolResponse::Ok { .. })
    }

    fn fault(kind: FaultKind, message: impl Into<String>) -> Self {
        ToolResponse::Fault {
            kind,
            message: message.into(),
        }
    }
}

/// Fault kinds that can be injected mid-episode. Validation and Refused
/// faults only arise from the call itself, so they are not injectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InjectKind {
    Timeout,
    ParameterMismatch,
}

impl InjectKind {
    fn fault_kind(self) -> FaultKind {
        match self {
            InjectKind::Timeout => FaultKind::Timeout,
            InjectKind::ParameterMismatch => FaultKind::ParameterMismatch,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToolRegistry {
    pub schemas: BTreeMap<String, ToolSchema>,
}

impl ToolRegistry {
    pub fn new(schemas: Vec<ToolSchema>) -> ToolResult<Self> {
        let mut map = BTreeMap::new();
        for schema in schemas {
            schema.check_shape()?;
            if map.insert(schema.name.clone(), schema).is_some() {
                return Err(ToolError::InvalidArgument("duplicate tool name".into()));
            }
        }
        Ok(Self { schemas: map })
    }

    /// The fixed mock toolbox: file manipulation, integer arithmetic, a
    /// lookup table, flight booking with a future-date constraint, and
    /// an answer sink.
    pub fn standard() -> Self {
        let str_req = || ParamSpec::new(ParamType::Str, true);
        let int_req = || ParamSpec::new(ParamType::Int, true);
        Self::new(vec![
            ToolSchema::new("read_file", vec![("path", str_req())]),
            ToolSchema::new(
                "write_file",
                vec![("path", str_req()), ("content", str_req())],
            ),
            ToolSchema::new(
                "delete_path",
                vec![
                    ("path", str_req()),
                    ("confirm", ParamSpec::new(ParamType::Bool, true)),
                ],
            ),
            ToolSchema::new("add", vec![("a", int_req()), ("b", int_req())]),
            ToolSchema::new("mul", vec![("a", int_req()), ("b", int_req())]),
            ToolSchema::new("lookup", vec![("key", str_req())]),
            ToolSchema::new(
                "book_flight",
                vec![
                    (
                        // domain floor sits just above the simulated clock,
                        // so past dates are logic errors, not runtime faults
                        "date",
                        ParamSpec::with_domain(
                            ParamType::Int,
                            true,
                            ValueDomain::IntRange { min: 101, max: 10000 },
                        ),
                    ),
                    (
                        "dest",
                        ParamSpec::with_domain(
                            ParamType::Enum,
                            true,
                            ValueDomain::OneOf(vec![
                                "paris".into(),
                                "tokyo".into(),
                                "lima".into(),
                            ]),
                        ),
                    ),
                ],
            ),
            ToolSchema::new("submit_answer", vec![("value", int_req())]),
        ])
        .expect("standard toolbox is well formed")
    }

    pub fn get(&self, name: &str) -> Option<&ToolSchema> {
        self.schemas.get(name)
    }
}

#[derive(Debug, Clone)]
pub struct ToolEnv {
    pub registry: ToolRegistry,
    pub files: BTreeMap<String, String>,
    pub table: BTreeMap<String, String>,
    pub protected: BTreeSet<String>,
    pub today: i64,
    pub booked: Vec<(i64, String)>,
    pub submitted: Option<i64>,
    /// Calls that executed successfully, in order.
    pub executed: Vec<ToolCall>,
    injection: Option<(InjectKind, usize)>,
    injection_fired: Option<usize>,
}

impl ToolEnv {
    pub fn new(registry: ToolRegistry) -> Self {
        Self {
            registry,
            files: BTreeMap::new(),
            table: BTreeMap::new(),
            protected: BTreeSet::new(),
            today: 100,
            booked: Vec::new(),
            submitted: None,
            executed: Vec::new(),
            injection: None,
            injection_fired: None,
        }
    }

    pub fn standard() -> Self {
        let mut env = Self::new(ToolRegistry::standard());
        env.files
            .insert("/tmp/scratch.txt".into(), "scratch".into());
        env.files
            .insert("/data/readme.txt".into(), "hello".into());
        env.table
            .insert("capital_of_peru".into(), "lima".into());
        env.table.insert("meaning".into(), "42".into());
        env.protected.insert("/system/boot".into());
        env
    }

    /// Arrange for the response at `at_turn` (turns count from 1) to be
    /// replaced by a fault; the call made that turn is not executed.
    pub fn inject_error(&mut self, kind: InjectKind, at_turn: usize) -> ToolResult<()> {
        if at_turn == 0 {
            return Err(ToolError::InvalidArgument(
                "injection turns are numbered from 1".into(),
            ));
        }
        self.injection = Some((kind, at_turn));
        Ok(())
    }

    /// Full response pipeline for one turn: injection, then validation,
    /// then execution. Violations are returned alongside the response.
    pub fn respond(&mut self, call: &ToolCall, turn: usize) -> (Vec<Violation>, ToolResponse) {
        if let Some((kind, at)) = self.injection {
            if at == turn {
                self.injection_fired = Some(turn);
                return (
                    Vec::new(),
                    ToolResponse::fault(kind.fault_kind(), "injected fault"),
                );
            }
        }
        let violations = validate_call(call, &self.registry.schemas);
        if !violations.is_empty() {
            let message = violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            return (violations, ToolResponse::fault(FaultKind::Validation, message));
        }
        (Vec::new(), self.dispatch(call))
    }

    /// Execute a call already known to be schema-valid.
    fn dispatch(&mut self, call: &ToolCall) -> ToolResponse {
        let args = &call.arguments;
        let str_arg = |k: &str| match &args[k] {
            ArgValue::Str(s) => s.clone(),
            _ => unreachable!("validated"),
        };
        let int_arg = |k: &str| match &args[k] {
            ArgValue::Int(v) => *v,
            _ => unreachable!("validated"),
        };
        let bool_arg = |k: &str| match &args[k] {
            ArgValue::Bool(b) => *b,
            _ => unreachable!("validated"),
        };

        let response = match call.name.as_str() {
            "read_file" => match self.files.get(&str_arg("path")) {
                Some(content) => ToolResponse::Ok {
                    payload: content.clone(),
                },
                None => ToolResponse::fault(FaultKind::ParameterMismatch, "no such file"),
            },
            "write_file" => {
                let path = str_arg("path");
                self.files.insert(path.clone(), str_arg("content"));
                ToolResponse::Ok {
                    payload: format!("wrote {path}"),
                }
            }
            "delete_path" => {
                let path = str_arg("path");
                if !bool_arg("confirm") {
                    ToolResponse::fault(FaultKind::Refused, "destructive call without confirm")
                } else if self.protected.contains(&path) {
                    ToolResponse::fault(FaultKind::Refused, "protected path")
                } else if self.files.remove(&path).is_some() {
                    ToolResponse::Ok {
                        payload: format!("deleted {path}"),
                    }
                } else {
                    ToolResponse::fault(FaultKind::ParameterMismatch, "no such file")
                }
            }
            "add" => ToolResponse::Ok {
                payload: (int_arg("a") + int_arg("b")).to_string(),
            },
            "mul" => ToolResponse::Ok {
                payload: (int_arg("a") * int_arg("b")).to_string(),
            },
            "lookup" => match self.table.get(&str_arg("key")) {
                Some(value) => ToolResponse::Ok {
                    payload: value.clone(),
                },
                None => ToolResponse::fault(FaultKind::ParameterMismatch, "no such key"),
            },
            "book_flight" => {
                let date = int_arg("date");
                let dest = str_arg("dest");
                self.booked.push((date, dest.clone()));
                ToolResponse::Ok {
                    payload: format!("booked {dest} on day {date}"),
                }
            }
            "submit_answer" => {
                self.submitted = Some(int_arg("value"));
                ToolResponse::Ok {
                    payload: "submitted".into(),
                }
            }
            other => ToolResponse::fault(
                FaultKind::ParameterMismatch,
                format!("tool \"{other}\" registered but not implemented"),
            ),
        };
        if response.is_ok() {
            self.executed.push(call.clone());
        }
        response
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Goal {
    FileContains { path: String, needle: String },
    /// Met once the task's reference call has executed successfully.
    OracleCall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub prompt: String,
    /// One call known to achieve the goal from the standard start state.
    pub oracle: ToolCall,
    pub goal: Goal,
}

impl TaskSpec {
    pub fn goal_met(&self, env: &ToolEnv) -> bool {
        match &self.goal {
            Goal::FileContains { path, needle } => env
                .files
                .get(path)
                .is_some_and(|content| content.contains(needle)),
            Goal::OracleCall => env.executed.contains(&self.oracle),
        }
    }
}

/// Tasks covering every standard tool, solvable in one clean call.
pub fn standard_tasks() -> Vec<TaskSpec> {
    vec![
        TaskSpec {
            name: "write_report".into(),
            prompt: "Save a note saying the totals are ready to /notes/report.txt".into(),
            oracle: ToolCall::new(
                "write_file",
                vec![
                    ("path", ArgValue::Str("/notes/report.txt".into())),
                    ("content", ArgValue::Str("totals ready".into())),
                ],
            ),
            goal: Goal::FileContains {
                path: "/notes/report.txt".into(),
                needle: "totals".into(),
            },
        },
        TaskSpec {
            name: "sum_small".into(),
            prompt: "Compute 2 + 3 with the arithmetic tool".into(),
            oracle: ToolCall::new("add", vec![("a", ArgValue::Int(2)), ("b", ArgValue::Int(3))]),
            goal: Goal::OracleCall,
        },
        TaskSpec {
            name: "capital_lookup".into(),
            prompt: "Look up the capital of Peru".into(),
            oracle: ToolCall::new(
                "lookup",
                vec![("key", ArgValue::Str("capital_of_peru".into()))],
            ),
            goal: Goal::OracleCall,
        },
        TaskSpec {
            name: "book_tokyo".into(),
            prompt: "Book a flight to Tokyo on day 200".into(),
            oracle: ToolCall::new(
                "book_flight",
                vec![
                    ("date", ArgValue::Int(200)),
                    ("dest", ArgValue::Str("tokyo".into())),
                ],
            ),
            goal: Goal::OracleCall,
        },
        TaskSpec {
            name: "clear_scratch".into(),
            prompt: "Delete the scratch file at /tmp/scratch.txt".into(),
            oracle: ToolCall::new(
                "delete_path",
                vec![
                    ("path", ArgValue::Str("/tmp/scratch.txt".into())),
                    ("confirm", ArgValue::Bool(true)),
                ],
            ),
            goal: Goal::OracleCall,
        },
        TaskSpec {
            name: "submit_seven".into(),
            prompt: "Submit the answer 7".into(),
            oracle: ToolCall::new("submit_answer", vec![("value", ArgValue::Int(7))]),
            goal: Goal::OracleCall,
        },
    ]
}

pub trait Policy {
    /// Produce the raw action text for the next turn. Anything that is
    /// not well-formed wire text ends the episode as a failure.
    fn act(&mut self, task: &TaskSpec, transcript: &[Turn]) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub turn: usize,
    pub action_text: String,
    pub call: Option<ToolCall>,
    pub violations: Vec<Violation>,
    /// None only when the action text did not parse.
    pub response: Option<ToolResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub injected_at: usize,
    /// First later turn whose response was Ok, if any.
    pub recovered_at: Option<usize>,
}

impl RecoveryRecord {
    /// Turn count from the fault to the first success, inclusive of the
    /// faulted turn. The minimum achievable value is 2.
    pub fn recovered_within(&self) -> Option<usize> {
        self.recovered_at.map(|ts| ts - self.injected_at + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task: String,
    pub turns: Vec<Turn>,
    pub success: bool,
    pub recovery: Option<RecoveryRecord>,
}

impl EpisodeResult {
    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.turns.iter().flat_map(|t| t.violations.iter())
    }

    pub fn has_violation(&self, class: ViolationClass) -> bool {
        self.violations().any(|v| v.class() == class)
    }
}

/// Drive one episode. Malformed action text fails the episode on the
/// spot; schema violations come back as validation faults the policy
/// can react to; the episode ends as soon as the goal is met.
pub fn run_episode(
    env: &mut ToolEnv,
    task: &TaskSpec,
    policy: &mut dyn Policy,
    max_turns: usize,
) -> EpisodeResult {
    let mut turns: Vec<Turn> = Vec::new();
    let mut success = false;
    for turn in 1..=max_turns {
        let action_text = policy.act(task, &turns);
        match crate::schema::parse_wire(&action_text) {
            Err(message) => {
                turns.push(Turn {
                    turn,
                    action_text,
                    call: None,
                    violations: vec![Violation::Malformed { message }],
                    response: None,
                });
                break;
            }
            Ok(call) => {
                let (violations, response) = env.respond(&call, turn);
                turns.push(Turn {
                    turn,
                    action_text,
                    call: Some(call),
                    violations,
                    response: Some(response),
                });
                if task.goal_met(env) {
                    success = true;
                    break;
                }
            }
        }
    }
    let recovery = env.injection_fired.map(|injected_at| RecoveryRecord {
        injected_at,
        recovered_at: turns
            .iter()
            .filter(|t| {
                t.turn > injected_at && t.response.as_ref().is_some_and(ToolResponse::is_ok)
            })
            .map(|t| t.turn)
            .min(),
    });
    EpisodeResult {
        task: task.name.clone(),
        turns,
        success,
        recovery,
    }
}

/// Injection recovery rate: of the episodes where a fault actually
/// fired, the fraction that got a successful call through on the very
/// next turn (recovered within 2).
pub fn irr(results: &[EpisodeResult]) -> ToolResult<f64> {
    if results.is_empty() {
        return Err(ToolError::EmptyInput("irr needs at least one episode".into()));
    }
    let injected: Vec<&RecoveryRecord> =
        results.iter().filter_map(|r| r.recovery.as_ref()).collect();
    if injected.is_empty() {
        return Err(ToolError::EmptyInput(
            "irr needs episodes with fired injections".into(),
        ));
    }
    let recovered = injected
        .iter()
        .filter(|r| r.recovered_within().is_some_and(|w| w <= 2))
        .count();
    Ok(recovered as f64 / injected.len() as f64)
}

/// Emits the task's reference call every turn.
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn act(&mut self, task: &TaskSpec, _transcript: &[Turn]) -> String {
        to_wire(&task.oracle)
    }
}

/// Emits one fixed action text every turn, sensible or not.
pub struct FixedPolicy(pub String);

impl Policy for FixedPolicy {
    fn act(&mut self, _task: &TaskSpec, _transcript: &[Turn]) -> String {
        self.0.clone()
    }
}

/// Emits prose instead of a tool call.
pub struct GarbagePolicy;

impl Policy for GarbagePolicy {
    fn act(&mut self, _task: &TaskSpec, _transcript: &[Turn]) -> String {
        "I'll take care of that right away.".into()
    }
}

/// Opens with a fixed probe call, then switches to the reference call
/// permanently after the first fault it observes.
pub struct RepairPolicy {
    pub probe: ToolCall,
    switched: bool,
}

impl RepairPolicy {
    pub fn new(probe: ToolCall) -> Self {
        Self {
            probe,
            switched: false,
        }
    }
}

impl Policy for RepairPolicy {
    fn act(&mut self, task: &TaskSpec, transcript: &[Turn]) -> String {
        if let Some(last) = transcript.last() {
            if matches!(last.response, Some(ToolResponse::Fault { .. })) {
                self.switched = true;
            }
        }
        if self.switched {
            to_wire(&task.oracle)
        } else {
            to_wire(&self.probe)
        }
    }
}
