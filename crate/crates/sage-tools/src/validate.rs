//! Call validation against a schema registry.
//!
//! Every violation in a call is reported, not just the first, but a
//! parameter that fails its type check is not also checked against its
//! domain: one defect, one violation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::{ToolCall, ToolSchema, parse_wire};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationClass {
    Malformed,
    UnknownTool,
    Type,
    HallucinatedKey,
    MissingRequired,
    Logic,
}

impl fmt::Display for ViolationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ViolationClass::Malformed => "malformed",
            ViolationClass::UnknownTool => "unknown_tool",
            ViolationClass::Type => "type_error",
            ViolationClass::HallucinatedKey => "hallucinated_key",
            ViolationClass::MissingRequired => "missing_required",
            ViolationClass::Logic => "logic_error",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// Action text that does not parse as a tool call at all.
    Malformed { message: String },
    UnknownTool { name: String },
    TypeError {
        param: String,
        expected: String,
        got: String,
    },
    /// Argument key the schema never declared.
    HallucinatedKey { param: String },
    MissingRequired { param: String },
    /// Right type, impossible value (out of range, unknown choice).
    LogicError { param: String, reason: String },
}

impl Violation {
    pub fn class(&self) -> ViolationClass {
        match self {
            Violation::Malformed { .. } => ViolationClass::Malformed,
            Violation::UnknownTool { .. } => ViolationClass::UnknownTool,
            Violation::TypeError { .. } => ViolationClass::Type,
            Violation::HallucinatedKey { .. } => ViolationClass::HallucinatedKey,
            Violation::MissingRequired { .. } => ViolationClass::MissingRequired,
            Violation::LogicError { .. } => ViolationClass::Logic,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Malformed { message } => write!(f, "malformed call: {message}"),
            Violation::UnknownTool { name } => write!(f, "unknown tool \"{name}\""),
            Violation::TypeError {
                param,
                expected,
                got,
            } => write!(f, "{param}: expected {expected}, got {got}"),
            Violation::HallucinatedKey { param } => {
                write!(f, "{param}: not a parameter of this tool")
            }
            Violation::MissingRequired { param } => write!(f, "{param}: required but absent"),
            Violation::LogicError { param, reason } => write!(f, "{param}: {reason}"),
        }
    }
}

/// All violations in `call`, in deterministic order: hallucinated or
/// ill-typed arguments first (sorted by key), then missing requireds.
pub fn validate_call(
    call: &ToolCall,
    schemas: &BTreeMap<String, ToolSchema>,
) -> Vec<Violation> {
    let Some(schema) = schemas.get(&call.name) else {
        return vec![Violation::UnknownTool {
            name: call.name.clone(),
        }];
    };
    let mut out = Vec::new();
    for (key, value) in &call.arguments {
        let Some(spec) = schema.params.get(key) else {
            out.push(Violation::HallucinatedKey { param: key.clone() });
            continue;
        };
        if !spec.ptype.admits(value) {
            out.push(Violation::TypeError {
                param: key.clone(),
                expected: spec.ptype.name().to_string(),
                got: value.type_name().to_string(),
            });
            continue;
        }
        if let Some(domain) = &spec.domain {
            if let Some(reason) = domain.check(value) {
                out.push(Violation::LogicError {
                    param: key.clone(),
                    reason,
                });
            }
        }
    }
    for (pname, spec) in &schema.params {
        if spec.required && !call.arguments.contains_key(pname) {
            out.push(Violation::MissingRequired {
                param: pname.clone(),
            });
        }
    }
    out
}

/// Parse then validate. A parse failure is itself the single violation.
pub fn validate_wire(
    text: &str,
    schemas: &BTreeMap<String, ToolSchema>,
) -> (Option<ToolCall>, Vec<Violation>) {
    match parse_wire(text) {
        Ok(call) => {
            let violations = validate_call(&call, schemas);
            (Some(call), violations)
        }
        Err(message) => (None, vec![Violation::Malformed { message }]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ArgValue, ParamSpec, ParamType, ValueDomain};

    fn registry() -> BTreeMap<String, ToolSchema> {
        let schema = ToolSchema::new(
            "book_flight",
            vec![
                (
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
                        ValueDomain::OneOf(vec!["paris".into(), "tokyo".into(), "lima".into()]),
                    ),
                ),
                ("note", ParamSpec::new(ParamType::Str, false)),
            ],
        );
        schema.check_shape().unwrap();
        [(schema.name.clone(), schema)].into_iter().collect()
    }

    #[test]
    fn clean_call_has_no_violations() {
        let call = ToolCall::new(
            "book_flight",
            vec![
                ("date", ArgValue::Int(200)),
                ("dest", ArgValue::Str("lima".into())),
            ],
        );
        assert!(validate_call(&call, &registry()).is_empty());
    }

    #[test]
    fn each_defect_maps_to_its_class() {
        let reg = registry();
        let unknown = ToolCall::new("cancel_flight", vec![]);
        assert_eq!(
            validate_call(&unknown, &reg)[0].class(),
            ViolationClass::UnknownTool
        );

        let bad_type = ToolCall::new(
            "book_flight",
            vec![
                ("date", ArgValue::Str("200".into())),
                ("dest", ArgValue::Str("lima".into())),
            ],
        );
        let v = validate_call(&bad_type, &reg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].class(), ViolationClass::Type);

        let hallucinated = ToolCall::new(
            "book_flight",
            vec![
                ("date", ArgValue::Int(200)),
                ("dest", ArgValue::Str("lima".into())),
                ("seat", ArgValue::Str("12A".into())),
            ],
        );
        let v = validate_call(&hallucinated, &reg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].class(), ViolationClass::HallucinatedKey);

        let missing = ToolCall::new("book_flight", vec![("date", ArgValue::Int(200))]);
        let v = validate_call(&missing, &reg);
        assert_eq!(
            v,
            vec![Violation::MissingRequired {
                param: "dest".into()
            }]
        );

        let past_date = ToolCall::new(
            "book_flight",
            vec![
                ("date", ArgValue::Int(50)),
                ("dest", ArgValue::Str("lima".into())),
            ],
        );
        let v = validate_call(&past_date, &reg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].class(), ViolationClass::Logic);

        let bad_choice = ToolCall::new(
            "book_flight",
            vec![
                ("date", ArgValue::Int(200)),
                ("dest", ArgValue::Str("atlantis".into())),
            ],
        );
        let v = validate_call(&bad_choice, &reg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].class(), ViolationClass::Logic);
    }

    #[test]
    fn type_failure_suppresses_domain_check() {
        let call = ToolCall::new(
            "book_flight",
            vec![
                ("date", ArgValue::Bool(true)),
                ("dest", ArgValue::Str("tokyo".into())),
            ],
        );
        let v = validate_call(&call, &registry());
        assert_eq!(v.len(), 1, "one defect, one violation: {v:?}");
        assert_eq!(v[0].class(), ViolationClass::Type);
    }

    #[test]
    fn multiple_defects_are_all_reported() {
        let call = ToolCall::new(
            "book_flight",
            vec![("seat", ArgValue::Str("12A".into()))],
        );
        let classes: Vec<_> = validate_call(&call, &registry())
            .iter()
            .map(Violation::class)
            .collect();
        assert_eq!(
            classes,
            vec![
                ViolationClass::HallucinatedKey,
                ViolationClass::MissingRequired,
                ViolationClass::MissingRequired,
            ]
        );
    }

    #[test]
    fn wire_parse_failure_is_one_malformed_violation() {
        let (call, v) = validate_wire("{]", &registry());
        assert!(call.is_none());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].class(), ViolationClass::Malformed);
    }
}
