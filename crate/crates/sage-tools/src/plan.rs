//! Multi-step plan validation: steps with declared dependencies either
//! admit a deterministic execution order or fail with a named defect.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub id: String,
    pub tool: String,
    #[serde(default)]
    pub deps: Vec<String>,
}

impl PlanStep {
    pub fn new(id: &str, tool: &str, deps: &[&str]) -> Self {
        Self {
            id: id.to_string(),
            tool: tool.to_string(),
            deps: deps.iter().map(|d| d.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDag {
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanError {
    /// One dependency loop, listed in walk order; the first id repeats
    /// implicitly at the end.
    Cycle(Vec<String>),
    UnknownDep { from: String, to: String },
    DuplicateStep(String),
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::Cycle(ids) => {
                write!(f, "dependency cycle: {}", ids.join(" -> "))?;
                write!(f, " -> {}", ids[0])
            }
            PlanError::UnknownDep { from, to } => {
                write!(f, "step \"{from}\" depends on unknown step \"{to}\"")
            }
            PlanError::DuplicateStep(id) => write!(f, "duplicate step id \"{id}\""),
        }
    }
}

impl std::error::Error for PlanError {}

/// One cycle among `remaining`, found by walking still-blocked deps.
/// Every remaining step has one, so the walk must close a loop.
fn extract_cycle(
    remaining: &BTreeSet<&str>,
    deps_of: &BTreeMap<&str, Vec<&str>>,
) -> Vec<String> {
    let start = *remaining.iter().next().expect("cycle extraction needs nodes");
    let mut path: Vec<&str> = vec![start];
    let mut on_path: BTreeSet<&str> = [start].into();
    loop {
        let here = *path.last().unwrap();
        let next = deps_of[here]
            .iter()
            .find(|d| remaining.contains(**d))
            .expect("blocked step keeps a blocked dependency");
        if on_path.contains(*next) {
            let loop_start = path.iter().position(|p| p == next).unwrap();
            let mut cycle: Vec<String> = path[loop_start..].iter().map(|s| s.to_string()).collect();
            // rotate the smallest id to the front so the name is canonical
            let min_at = (0..cycle.len())
                .min_by_key(|&i| cycle[i].clone())
                .unwrap();
            cycle.rotate_left(min_at);
            return cycle;
        }
        on_path.insert(next);
        path.push(next);
    }
}

/// Kahn's algorithm with an ordered ready set, so the returned order is
/// the lexicographically smallest valid one and reruns are identical.
pub fn validate_plan_dag(plan: &PlanDag) -> Result<Vec<String>, PlanError> {
    let mut deps_of: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for step in &plan.steps {
        let entry = deps_of.insert(step.id.as_str(), step.deps.iter().map(|d| d.as_str()).collect());
        if entry.is_some() {
            return Err(PlanError::DuplicateStep(step.id.clone()));
        }
    }
    for step in &plan.steps {
        for dep in &step.deps {
            if !deps_of.contains_key(dep.as_str()) {
                return Err(PlanError::UnknownDep {
                    from: step.id.clone(),
                    to: dep.clone(),
                });
            }
        }
    }

    let mut dependents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
    for (&id, deps) in &deps_of {
        indegree.entry(id).or_insert(0);
        for &dep in deps {
            *indegree.entry(id).or_insert(0) += 1;
            dependents.entry(dep).or_default().push(id);
        }
    }

    let mut ready: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut order = Vec::with_capacity(plan.steps.len());
    while let Some(&id) = ready.iter().next() {
        ready.remove(id);
        order.push(id.to_string());
        for &dep in dependents.get(id).into_iter().flatten() {
            let d = indegree.get_mut(dep).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(dep);
            }
        }
    }

    if order.len() < plan.steps.len() {
        let remaining: BTreeSet<&str> = deps_of
            .keys()
            .copied()
            .filter(|id| !order.iter().any(|o| o == id))
            .collect();
        return Err(PlanError::Cycle(extract_cycle(&remaining, &deps_of)));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(steps: Vec<PlanStep>) -> PlanDag {
        PlanDag { steps }
    }

    #[test]
    fn diamond_gets_smallest_valid_order() {
        let plan = dag(vec![
            PlanStep::new("d", "submit_answer", &["b", "c"]),
            PlanStep::new("b", "add", &["a"]),
            PlanStep::new("c", "mul", &["a"]),
            PlanStep::new("a", "lookup", &[]),
        ]);
        assert_eq!(validate_plan_dag(&plan).unwrap(), vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn independent_steps_come_out_sorted() {
        let plan = dag(vec![
            PlanStep::new("z", "lookup", &[]),
            PlanStep::new("m", "lookup", &[]),
            PlanStep::new("a", "lookup", &[]),
        ]);
        assert_eq!(validate_plan_dag(&plan).unwrap(), vec!["a", "m", "z"]);
    }

    #[test]
    fn duplicate_step_id_is_named() {
        let plan = dag(vec![
            PlanStep::new("a", "add", &[]),
            PlanStep::new("a", "mul", &[]),
        ]);
        assert_eq!(
            validate_plan_dag(&plan),
            Err(PlanError::DuplicateStep("a".into()))
        );
    }

    #[test]
    fn unknown_dependency_names_both_ends() {
        let plan = dag(vec![PlanStep::new("a", "add", &["ghost"])]);
        assert_eq!(
            validate_plan_dag(&plan),
            Err(PlanError::UnknownDep {
                from: "a".into(),
                to: "ghost".into()
            })
        );
    }

    #[test]
    fn cycle_is_extracted_and_canonical() {
        let plan = dag(vec![
            PlanStep::new("a", "lookup", &[]),
            PlanStep::new("b", "add", &["d", "a"]),
            PlanStep::new("c", "mul", &["b"]),
            PlanStep::new("d", "add", &["c"]),
        ]);
        match validate_plan_dag(&plan) {
            Err(PlanError::Cycle(ids)) => {
                assert_eq!(ids, vec!["b", "d", "c"], "b needs d needs c needs b");
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn self_loop_is_a_cycle_of_one() {
        let plan = dag(vec![PlanStep::new("a", "add", &["a"])]);
        assert_eq!(validate_plan_dag(&plan), Err(PlanError::Cycle(vec!["a".into()])));
    }

    #[test]
    fn cycle_display_closes_the_loop() {
        let err = PlanError::Cycle(vec!["b".into(), "d".into(), "c".into()]);
        assert_eq!(err.to_string(), "dependency cycle: b -> d -> c -> b");
    }
}
