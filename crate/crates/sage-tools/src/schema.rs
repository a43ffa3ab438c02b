//! Tool schemas, argument values, and the JSON wire format.
//!
//! The interchange format is a JSON object keyed `tool_call` holding
//! `name` and `arguments`. Arguments use a `BTreeMap` so serialization is
//! deterministic and serialize→parse is the identity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ToolError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgValue {
    // Bool before Int: untagged deserialization tries variants in order
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ArgValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            ArgValue::Bool(_) => "bool",
            ArgValue::Int(_) => "int",
            ArgValue::Float(_) => "float",
            ArgValue::Str(_) => "string",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Int,
    Float,
    Str,
    Bool,
    /// String drawn from a closed choice set carried by the domain.
    Enum,
}

impl ParamType {
    pub fn name(self) -> &'static str {
        match self {
            ParamType::Int => "int",
            ParamType::Float => "float",
            ParamType::Str => "string",
            ParamType::Bool => "bool",
            ParamType::Enum => "enum",
        }
    }

    /// Type admission, checked before any domain constraint.
    pub fn admits(self, value: &ArgValue) -> bool {
        matches!(
            (self, value),
            (ParamType::Int, ArgValue::Int(_))
                | (ParamType::Float, ArgValue::Float(_))
                | (ParamType::Float, ArgValue::Int(_))
                | (ParamType::Str, ArgValue::Str(_))
                | (ParamType::Bool, ArgValue::Bool(_))
                | (ParamType::Enum, ArgValue::Str(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueDomain {
    IntRange { min: i64, max: i64 },
    FloatRange { min: f64, max: f64 },
    OneOf(Vec<String>),
}

impl ValueDomain {
    /// None when the value satisfies the domain; otherwise the reason.
    /// Assumes the type check already passed.
    pub fn check(&self, value: &ArgValue) -> Option<String> {
        match (self, value) {
            (ValueDomain::IntRange { min, max }, ArgValue::Int(v)) => (v < min || v > max)
                .then(|| format!("{v} outside [{min}, {max}]")),
            (ValueDomain::FloatRange { min, max }, ArgValue::Float(v)) => (v < min || v > max)
                .then(|| format!("{v} outside [{min}, {max}]")),
            (ValueDomain::FloatRange { min, max }, ArgValue::Int(v)) => {
                let f = *v as f64;
                (f < *min || f > *max).then(|| format!("{v} outside [{min}, {max}]"))
            }
            (ValueDomain::OneOf(choices), ArgValue::Str(s)) => (!choices.contains(s))
                .then(|| format!("\"{s}\" not one of {choices:?}")),
            _ => Some("domain does not apply to this value type".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    #[serde(rename = "type")]
    pub ptype: ParamType,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<ValueDomain>,
}

impl ParamSpec {
    pub fn new(ptype: ParamType, required: bool) -> Self {
        Self {
            ptype,
            required,
            domain: None,
        }
    }

    pub fn with_domain(ptype: ParamType, required: bool, domain: ValueDomain) -> Self {
        Self {
            ptype,
            required,
            domain: Some(domain),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub params: BTreeMap<String, ParamSpec>,
}

impl ToolSchema {
    pub fn new(name: impl Into<String>, params: Vec<(&str, ParamSpec)>) -> Self {
        Self {
            name: name.into(),
            params: params
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    /// Structural well-formedness: enum params carry a non-empty choice
    /// set, ranges are ordered, domains match their parameter's type.
    pub fn check_shape(&self) -> Result<(), ToolError> {
        if self.name.is_empty() {
            return Err(ToolError::InvalidArgument("schema name empty".into()));
        }
        for (pname, spec) in &self.params {
            match (&spec.ptype, &spec.domain) {
                (ParamType::Enum, Some(ValueDomain::OneOf(choices))) if !choices.is_empty() => {}
                (ParamType::Enum, _) => {
                    return Err(ToolError::InvalidArgument(format!(
                        "{}.{pname}: enum needs a non-empty choice set",
                        self.name
                    )));
                }
                (ParamType::Int, Some(ValueDomain::IntRange { min, max })) if min <= max => {}
                (ParamType::Float, Some(ValueDomain::FloatRange { min, max })) if min <= max => {}
                (ParamType::Str, Some(ValueDomain::OneOf(choices))) if !choices.is_empty() => {}
                (_, None) => {}
                (t, Some(d)) => {
                    return Err(ToolError::InvalidArgument(format!(
                        "{}.{pname}: domain {d:?} incompatible with type {}",
                        self.name,
                        t.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolCall {
    pub name: String,
    pub arguments: BTreeMap<String, ArgValue>,
}

impl ToolCall {
    pub fn new(name: impl Into<String>, arguments: Vec<(&str, ArgValue)>) -> Self {
        Self {
            name: name.into(),
            arguments: arguments
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    tool_call: ToolCall,
}

/// Canonical wire text for a call.
pub fn to_wire(call: &ToolCall) -> String {
    serde_json::to_string(&Wire {
        tool_call: call.clone(),
    })
    .expect("tool calls always serialize")
}

/// Strict parse of the wire format; any deviation is the error message.
pub fn parse_wire(text: &str) -> Result<ToolCall, String> {
    serde_json::from_str::<Wire>(text)
        .map(|w| w.tool_call)
        .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_round_trip_is_identity() {
        let call = ToolCall::new(
            "book_flight",
            vec![
                ("date", ArgValue::Int(120)),
                ("dest", ArgValue::Str("tokyo".into())),
                ("window_seat", ArgValue::Bool(true)),
                ("budget", ArgValue::Float(1250.5)),
            ],
        );
        let text = to_wire(&call);
        assert!(text.starts_with("{\"tool_call\":{\"name\":\"book_flight\""));
        assert_eq!(parse_wire(&text).unwrap(), call);
        // stable bytes on a second pass
        assert_eq!(to_wire(&parse_wire(&text).unwrap()), text);
    }

    #[test]
    fn malformed_wire_is_rejected() {
        assert!(parse_wire("not json {").is_err());
        assert!(parse_wire("{\"wrong_key\":{}}").is_err());
        assert!(parse_wire("{\"tool_call\":{\"name\":\"x\"}}").is_err());
        assert!(
            parse_wire("{\"tool_call\":{\"name\":\"x\",\"arguments\":{},\"extra\":1}}").is_err(),
            "unknown fields are zero-tolerance"
        );
    }

    #[test]
    fn untagged_values_keep_their_types() {
        let text = r#"{"tool_call":{"name":"t","arguments":{"a":7,"b":7.5,"c":"7","d":true}}}"#;
        let call = parse_wire(text).unwrap();
        assert_eq!(call.arguments["a"], ArgValue::Int(7));
        assert_eq!(call.arguments["b"], ArgValue::Float(7.5));
        assert_eq!(call.arguments["c"], ArgValue::Str("7".into()));
        assert_eq!(call.arguments["d"], ArgValue::Bool(true));
    }

    #[test]
    fn enum_without_choices_is_malformed_schema() {
        let bad = ToolSchema::new("t", vec![("mode", ParamSpec::new(ParamType::Enum, true))]);
        assert!(bad.check_shape().is_err());
        let good = ToolSchema::new(
            "t",
            vec![(
                "mode",
                ParamSpec::with_domain(
                    ParamType::Enum,
                    true,
                    ValueDomain::OneOf(vec!["fast".into(), "slow".into()]),
                ),
            )],
        );
        good.check_shape().unwrap();
    }
}
