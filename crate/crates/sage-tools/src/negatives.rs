//! Hard negatives: minimal corruptions of a valid call, one per
//! violation class, for probing whether a checker or policy can tell
//! near-misses from clean calls.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ToolError, ToolResult};
use crate::schema::{ArgValue, ToolCall, ToolSchema, ValueDomain};
use crate::validate::{validate_call, ViolationClass};

/// Plausible option names a model might invent. `confirm` is here on
/// purpose: it is a real parameter of some tools, so generation must
/// skip decoys the schema actually declares.
pub const DECOY_KEYS: [&str; 6] = ["verbose", "force", "dry_run", "recursive", "debug", "confirm"];

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSample {
    pub call: ToolCall,
    /// The single violation class this mutant is built to trip.
    pub intended: ViolationClass,
    /// True when the requested class had no mutable slot in this call,
    /// so a missing-required mutant stands in for it.
    pub substituted: bool,
}

fn type_mutation(value: &ArgValue, is_str_param: bool) -> ArgValue {
    if is_str_param {
        ArgValue::Int(0)
    } else {
        match value {
            ArgValue::Int(v) => ArgValue::Str(v.to_string()),
            ArgValue::Float(v) => ArgValue::Str(v.to_string()),
            ArgValue::Bool(v) => ArgValue::Str(v.to_string()),
            ArgValue::Str(_) => ArgValue::Int(0),
        }
    }
}

fn domain_mutation(domain: &ValueDomain) -> ArgValue {
    match domain {
        ValueDomain::IntRange { min, .. } => ArgValue::Int(min - 1),
        ValueDomain::FloatRange { max, .. } => ArgValue::Float(max + 1.5),
        ValueDomain::OneOf(choices) => {
            let mut s = format!("{}_invalid", choices[0]);
            while choices.contains(&s) {
                s.push_str("_x");
            }
            ArgValue::Str(s)
        }
    }
}

fn missing_required_mutant(
    call: &ToolCall,
    schema: &ToolSchema,
    rng: &mut ChaCha8Rng,
) -> ToolResult<ToolCall> {
    let required: Vec<&String> = schema
        .params
        .iter()
        .filter(|(_, s)| s.required)
        .map(|(k, _)| k)
        .collect();
    if required.is_empty() {
        return Err(ToolError::InvalidArgument(format!(
            "{}: no required parameter to drop",
            schema.name
        )));
    }
    let victim = required[rng.random_range(0..required.len())].clone();
    let mut mutant = call.clone();
    mutant.arguments.remove(&victim);
    Ok(mutant)
}

/// Three near-miss mutants of a valid call, in fixed order: one meant
/// to fail the type check, one carrying an undeclared key, one with a
/// type-correct but impossible value. A class with nothing to mutate is
/// replaced by a missing-required mutant with `substituted` set.
pub fn negative_constraint_samples(
    call: &ToolCall,
    schema: &ToolSchema,
    seed: u64,
) -> ToolResult<Vec<NegativeSample>> {
    schema.check_shape()?;
    let registry = [(schema.name.clone(), schema.clone())].into_iter().collect();
    let base = validate_call(call, &registry);
    if !base.is_empty() {
        return Err(ToolError::InvalidArgument(format!(
            "base call must be valid, found {base:?}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3);

    // type mutant: flip one present argument to a mismatched kind
    let keys: Vec<&String> = call.arguments.keys().collect();
    if keys.is_empty() {
        out.push(NegativeSample {
            call: missing_required_mutant(call, schema, &mut rng)?,
            intended: ViolationClass::MissingRequired,
            substituted: true,
        });
    } else {
        let key = keys[rng.random_range(0..keys.len())].clone();
        let is_str = schema.params[&key].ptype == crate::schema::ParamType::Str;
        let mut mutant = call.clone();
        let flipped = type_mutation(&mutant.arguments[&key], is_str);
        mutant.arguments.insert(key, flipped);
        out.push(NegativeSample {
            call: mutant,
            intended: ViolationClass::Type,
            substituted: false,
        });
    }

    // hallucinated key: first decoy the schema does not declare
    let decoy = DECOY_KEYS
        .iter()
        .find(|d| !schema.params.contains_key(**d))
        .map(|d| d.to_string())
        .unwrap_or_else(|| {
            let mut k = "opt".to_string();
            while schema.params.contains_key(&k) {
                k.push_str("_x");
            }
            k
        });
    let mut mutant = call.clone();
    mutant.arguments.insert(decoy, ArgValue::Bool(true));
    out.push(NegativeSample {
        call: mutant,
        intended: ViolationClass::HallucinatedKey,
        substituted: false,
    });

    // logic mutant: push one domain-constrained argument out of bounds
    let constrained: Vec<&String> = call
        .arguments
        .keys()
        .filter(|k| schema.params[*k].domain.is_some())
        .collect();
    if constrained.is_empty() {
        out.push(NegativeSample {
            call: missing_required_mutant(call, schema, &mut rng)?,
            intended: ViolationClass::MissingRequired,
            substituted: true,
        });
    } else {
        let key = constrained[rng.random_range(0..constrained.len())].clone();
        let domain = schema.params[&key].domain.as_ref().unwrap();
        let mut mutant = call.clone();
        mutant.arguments.insert(key, domain_mutation(domain));
        out.push(NegativeSample {
            call: mutant,
            intended: ViolationClass::Logic,
            substituted: false,
        });
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ParamSpec, ParamType};
    use std::collections::BTreeMap;

    fn flight_schema() -> ToolSchema {
        ToolSchema::new(
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
            ],
        )
    }

    fn flight_call() -> ToolCall {
        ToolCall::new(
            "book_flight",
            vec![
                ("date", ArgValue::Int(500)),
                ("dest", ArgValue::Str("paris".into())),
            ],
        )
    }

    fn check_exactly_one(sample: &NegativeSample, schema: &ToolSchema) {
        let registry: BTreeMap<_, _> =
            [(schema.name.clone(), schema.clone())].into_iter().collect();
        let violations = validate_call(&sample.call, &registry);
        assert_eq!(violations.len(), 1, "mutant {sample:?} -> {violations:?}");
        assert_eq!(violations[0].class(), sample.intended);
    }

    #[test]
    fn each_mutant_trips_exactly_its_class() {
        let schema = flight_schema();
        let samples = negative_constraint_samples(&flight_call(), &schema, 42).unwrap();
        assert_eq!(samples.len(), 3);
        let classes: Vec<_> = samples.iter().map(|s| s.intended).collect();
        assert_eq!(
            classes,
            vec![
                ViolationClass::Type,
                ViolationClass::HallucinatedKey,
                ViolationClass::Logic,
            ]
        );
        assert!(samples.iter().all(|s| !s.substituted));
        for s in &samples {
            check_exactly_one(s, &schema);
        }
    }

    #[test]
    fn unconstrained_tool_substitutes_the_logic_slot() {
        let schema = ToolSchema::new(
            "add",
            vec![
                ("a", ParamSpec::new(ParamType::Int, true)),
                ("b", ParamSpec::new(ParamType::Int, true)),
            ],
        );
        let call = ToolCall::new("add", vec![("a", ArgValue::Int(2)), ("b", ArgValue::Int(3))]);
        let samples = negative_constraint_samples(&call, &schema, 7).unwrap();
        assert_eq!(samples[2].intended, ViolationClass::MissingRequired);
        assert!(samples[2].substituted);
        assert!(!samples[0].substituted);
        assert!(!samples[1].substituted);
        for s in &samples {
            check_exactly_one(s, &schema);
        }
    }

    #[test]
    fn confirm_decoy_is_skipped_when_declared() {
        let schema = ToolSchema::new(
            "delete_path",
            vec![
                ("path", ParamSpec::new(ParamType::Str, true)),
                ("confirm", ParamSpec::new(ParamType::Bool, true)),
            ],
        );
        let call = ToolCall::new(
            "delete_path",
            vec![
                ("path", ArgValue::Str("/tmp/x".into())),
                ("confirm", ArgValue::Bool(true)),
            ],
        );
        let samples = negative_constraint_samples(&call, &schema, 0).unwrap();
        let hk = &samples[1];
        assert_eq!(hk.intended, ViolationClass::HallucinatedKey);
        let added: Vec<_> = hk
            .call
            .arguments
            .keys()
            .filter(|k| !call.arguments.contains_key(*k))
            .collect();
        assert_eq!(added.len(), 1);
        assert_ne!(added[0], "confirm");
        check_exactly_one(hk, &schema);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let schema = flight_schema();
        let a = negative_constraint_samples(&flight_call(), &schema, 9).unwrap();
        let b = negative_constraint_samples(&flight_call(), &schema, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_base_call_is_rejected() {
        let schema = flight_schema();
        let call = ToolCall::new("book_flight", vec![("date", ArgValue::Int(500))]);
        assert!(negative_constraint_samples(&call, &schema, 0).is_err());
    }
}
