//! Randomized checks for the mutation and validation pipeline: every
//! generated near-miss must trip exactly its intended violation class,
//! wire text must round-trip, and plan ordering must respect deps.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sage_tools::{
    negative_constraint_samples, parse_wire, to_wire, validate_call, validate_plan_dag, ArgValue,
    ParamSpec, ParamType, PlanDag, PlanError, PlanStep, ToolCall, ToolSchema, ValueDomain,
};

const WORDS: [&str; 8] = [
    "alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "theta",
];

fn random_param(rng: &mut ChaCha8Rng, required: bool) -> ParamSpec {
    match rng.random_range(0..5) {
        0 => {
            if rng.random_bool(0.5) {
                let min = rng.random_range(-500..500);
                let max = min + rng.random_range(0..500);
                ParamSpec::with_domain(ParamType::Int, required, ValueDomain::IntRange { min, max })
            } else {
                ParamSpec::new(ParamType::Int, required)
            }
        }
        1 => {
            if rng.random_bool(0.5) {
                let min = rng.random_range(-100.0..100.0);
                let max = min + rng.random_range(0.5..100.5);
                ParamSpec::with_domain(
                    ParamType::Float,
                    required,
                    ValueDomain::FloatRange { min, max },
                )
            } else {
                ParamSpec::new(ParamType::Float, required)
            }
        }
        2 => {
            if rng.random_bool(0.3) {
                let n = rng.random_range(2..=4);
                let choices = WORDS[..n].iter().map(|w| w.to_string()).collect();
                ParamSpec::with_domain(ParamType::Str, required, ValueDomain::OneOf(choices))
            } else {
                ParamSpec::new(ParamType::Str, required)
            }
        }
        3 => ParamSpec::new(ParamType::Bool, required),
        _ => {
            let n = rng.random_range(2..=4);
            let choices = WORDS[8 - n..].iter().map(|w| w.to_string()).collect();
            ParamSpec::with_domain(ParamType::Enum, required, ValueDomain::OneOf(choices))
        }
    }
}

fn random_schema(i: usize, rng: &mut ChaCha8Rng) -> ToolSchema {
    let n_params = rng.random_range(1..=5);
    let mut params = BTreeMap::new();
    for p in 0..n_params {
        // parameter zero is always required so a missing-required
        // substitute mutant is always constructible
        let required = p == 0 || rng.random_bool(0.5);
        params.insert(format!("p{p}"), random_param(rng, required));
    }
    let schema = ToolSchema {
        name: format!("tool_{i}"),
        params,
    };
    schema.check_shape().unwrap();
    schema
}

fn in_domain_value(spec: &ParamSpec, rng: &mut ChaCha8Rng) -> ArgValue {
    match (&spec.ptype, &spec.domain) {
        (_, Some(ValueDomain::IntRange { min, max })) => {
            ArgValue::Int(rng.random_range(*min..=*max))
        }
        (_, Some(ValueDomain::FloatRange { min, max })) => {
            ArgValue::Float(min + rng.random::<f64>() * (max - min))
        }
        (_, Some(ValueDomain::OneOf(choices))) => {
            ArgValue::Str(choices[rng.random_range(0..choices.len())].clone())
        }
        (ParamType::Int, None) => ArgValue::Int(rng.random_range(-1000..1000)),
        (ParamType::Float, None) => ArgValue::Float(rng.random_range(-1000.0..1000.0)),
        (ParamType::Str, None) => ArgValue::Str(WORDS[rng.random_range(0..WORDS.len())].into()),
        (ParamType::Bool, None) => ArgValue::Bool(rng.random_bool(0.5)),
        (ParamType::Enum, None) => unreachable!("shape check demands choices"),
    }
}

fn valid_call_for(schema: &ToolSchema, rng: &mut ChaCha8Rng) -> ToolCall {
    let mut arguments = BTreeMap::new();
    for (name, spec) in &schema.params {
        if spec.required || rng.random_bool(0.5) {
            arguments.insert(name.clone(), in_domain_value(spec, rng));
        }
    }
    ToolCall {
        name: schema.name.clone(),
        arguments,
    }
}

#[test]
fn thousand_random_pairs_trip_exactly_their_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(90210);
    let mut substitutions = 0usize;
    for i in 0..1000 {
        let schema = random_schema(i, &mut rng);
        let call = valid_call_for(&schema, &mut rng);
        let registry: BTreeMap<_, _> =
            [(schema.name.clone(), schema.clone())].into_iter().collect();
        assert!(validate_call(&call, &registry).is_empty());

        let samples = negative_constraint_samples(&call, &schema, i as u64).unwrap();
        assert_eq!(samples.len(), 3);
        for sample in &samples {
            let violations = validate_call(&sample.call, &registry);
            assert_eq!(
                violations.len(),
                1,
                "pair {i}: mutant must carry one defect, got {violations:?} for {sample:?}"
            );
            assert_eq!(
                violations[0].class(),
                sample.intended,
                "pair {i}: wrong class for {sample:?}"
            );
            if sample.substituted {
                substitutions += 1;
            }
        }
    }
    // unconstrained calls exist in the pool, so the substitute path is
    // genuinely exercised, but it must stay the minority
    assert!(substitutions > 0);
    assert!(substitutions < 1500);
}

fn arg_value_strategy() -> impl Strategy<Value = ArgValue> {
    prop_oneof![
        any::<i64>().prop_map(ArgValue::Int),
        (-1.0e9f64..1.0e9).prop_map(ArgValue::Float),
        "[a-z0-9_ ]{0,16}".prop_map(ArgValue::Str),
        any::<bool>().prop_map(ArgValue::Bool),
    ]
}

proptest! {
    #[test]
    fn wire_text_round_trips(
        name in "[a-z][a-z_]{0,11}",
        args in prop::collection::btree_map("[a-z][a-z0-9_]{0,7}", arg_value_strategy(), 0..6),
    ) {
        let call = ToolCall { name, arguments: args };
        let text = to_wire(&call);
        let back = parse_wire(&text).unwrap();
        prop_assert_eq!(&back, &call);
        prop_assert_eq!(to_wire(&back), text);
    }

    #[test]
    fn topo_order_puts_every_dep_first(raw in prop::collection::vec(any::<u64>(), 1..8)) {
        let mut rng = ChaCha8Rng::seed_from_u64(raw.iter().fold(0u64, |a, b| a.wrapping_add(*b)));
        let n = raw.len();
        let steps: Vec<PlanStep> = (0..n)
            .map(|i| {
                let deps: Vec<String> = (0..i)
                    .filter(|_| rng.random_bool(0.4))
                    .map(|d| format!("s{d:02}"))
                    .collect();
                PlanStep {
                    id: format!("s{i:02}"),
                    tool: "lookup".into(),
                    deps,
                }
            })
            .collect();
        let plan = PlanDag { steps: steps.clone() };
        let order = validate_plan_dag(&plan).unwrap();
        prop_assert_eq!(order.len(), n);
        let pos: BTreeMap<&str, usize> =
            order.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for step in &steps {
            for dep in &step.deps {
                prop_assert!(pos[dep.as_str()] < pos[step.id.as_str()]);
            }
        }
    }
}

#[test]
fn ring_with_chaff_reports_exactly_the_ring() {
    for n in 2..7usize {
        let mut steps: Vec<PlanStep> = (0..n)
            .map(|i| PlanStep {
                id: format!("r{i}"),
                tool: "add".into(),
                deps: vec![format!("r{}", (i + 1) % n)],
            })
            .collect();
        // chaff hangs off the ring without adding loops
        steps.push(PlanStep::new("c0", "lookup", &["r0"]));
        steps.push(PlanStep::new("c1", "lookup", &["c0", "r1"]));
        match validate_plan_dag(&PlanDag { steps }) {
            Err(PlanError::Cycle(ids)) => {
                let mut sorted = ids.clone();
                sorted.sort();
                let expected: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
                assert_eq!(sorted, expected, "ring of {n}");
                assert_eq!(ids[0], "r0", "cycle is rotated to its smallest id");
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }
}
