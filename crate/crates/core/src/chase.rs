//! Fair restricted chase with a level structure, per-constant provenance
//! for frontier-one rule sets, per-fact provenance for linear rule sets,
//! and the derived subinstances below a constant / connected to the
//! database.
//!
//! The chase proceeds in rounds. At the start of a round all triggers
//! (rule, frontier tuple) with a body match are collected from the current
//! instance; they fire in lexicographic order, each re-checked for
//! applicability against the instance as it grows. A round that fires
//! nothing saturates the chase. Restricted semantics: a trigger is
//! applicable only while no homomorphism maps the head into the instance
//! fixing the frontier.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::hom::{match_atoms, FactIndex, Pattern, Solver};
use crate::model::{all_frontier_one, all_linear, ConstantId, Database, Fact, Instance, Schema, Tgd, Var};
use crate::verdict::Budget;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChaseError {
    #[error("provenance requires a frontier-one rule set")]
    NotFrontierOne,
    #[error("per-fact provenance requires a linear rule set")]
    NotLinear,
    #[error("constant `{0}` not in the chased database")]
    ConstantNotFound(String),
}

/// Result of a budgeted chase run.
#[derive(Debug, Clone)]
pub struct ChaseResult {
    pub instance: Instance,
    /// Fact levels: 0 for input facts, the producing round otherwise.
    pub levels: BTreeMap<Fact, u32>,
    /// Frontier-one provenance: every constant maps to the input constant
    /// it was derived below. `None` unless all rules are frontier-one.
    pub src_const: Option<BTreeMap<ConstantId, ConstantId>>,
    /// Linear provenance: every fact maps to the input fact it descends
    /// from. `None` unless all rules are linear. Facts produced by
    /// empty-body rules are their own source.
    pub src_fact: Option<BTreeMap<Fact, Fact>>,
    /// Immediate derivation parents (linear rule sets only): the body
    /// fact each derived fact was created from.
    pub parents: Option<BTreeMap<Fact, Fact>>,
    pub saturated: bool,
    /// Number of fact-producing rounds (the maximum level).
    pub rounds: u32,
    /// Total number of fired triggers.
    pub steps_used: usize,
}

impl ChaseResult {
    /// Facts at level at most `depth`.
    pub fn truncate(&self, depth: u32) -> Instance {
        Instance {
            facts: self
                .levels
                .iter()
                .filter(|(_, &lvl)| lvl <= depth)
                .map(|(f, _)| f.clone())
                .collect(),
        }
    }
}

/// Is `rule` applicable at frontier tuple `tuple` in `instance`? True iff
/// the body matches with the frontier at `tuple` and no homomorphism maps
/// the head into `instance` fixing the frontier.
pub fn applicable(rule: &Tgd, instance: &Instance, tuple: &[ConstantId]) -> bool {
    assert_eq!(rule.frontier.len(), tuple.len(), "frontier arity mismatch");
    let index = FactIndex::new(instance);
    let pinned: BTreeMap<Var, ConstantId> = rule
        .frontier
        .iter()
        .cloned()
        .zip(tuple.iter().cloned())
        .collect();
    let body_matches = match_atoms(&rule.body, &index, &pinned, 0)
        .expect("uncapped search")
        .is_some();
    body_matches && !head_satisfied(rule, &index, &pinned)
}

fn head_satisfied(
    rule: &Tgd,
    index: &FactIndex,
    frontier_pin: &BTreeMap<Var, ConstantId>,
) -> bool {
    match_atoms(&rule.head, index, frontier_pin, 0)
        .expect("uncapped search")
        .is_some()
}

/// All frontier tuples with a body match, per rule.
fn collect_triggers(rules: &[Tgd], index: &FactIndex) -> Vec<(usize, Vec<ConstantId>)> {
    let mut triggers: BTreeSet<(usize, Vec<ConstantId>)> = BTreeSet::new();
    for (rule_idx, rule) in rules.iter().enumerate() {
        if rule.body.is_empty() {
            triggers.insert((rule_idx, Vec::new()));
            continue;
        }
        let patterns: Vec<Pattern> =
            rule.body.iter().map(Pattern::from_atom).collect();
        let solver = Solver::new(patterns, index, 0);
        solver.solve(&BTreeMap::new(), &mut |solution| {
            let tuple: Vec<ConstantId> =
                rule.frontier.iter().map(|v| solution[v].clone()).collect();
            triggers.insert((rule_idx, tuple));
            true
        });
    }
    triggers.into_iter().collect()
}

/// Chases `start` with `rules` under `budget`. Deterministic: triggers
/// fire in (rule index, frontier tuple) order, fresh nulls are numbered
/// from one past the largest null already present.
pub fn chase(start: &Instance, rules: &[Tgd], budget: &Budget) -> ChaseResult {
    let track_const = all_frontier_one(rules);
    let track_fact = all_linear(rules);

    let mut instance = start.clone();
    let mut levels: BTreeMap<Fact, u32> =
        start.facts.iter().map(|f| (f.clone(), 0)).collect();
    let mut src_const: BTreeMap<ConstantId, ConstantId> = BTreeMap::new();
    let mut src_fact: BTreeMap<Fact, Fact> = BTreeMap::new();
    if track_const {
        for c in instance.adom() {
            src_const.insert(c.clone(), c);
        }
    }
    if track_fact {
        for f in &instance.facts {
            src_fact.insert(f.clone(), f.clone());
        }
    }

    let mut next_null: u64 = instance
        .adom()
        .iter()
        .filter_map(|c| match c {
            ConstantId::Null(k) => Some(*k + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);

    let mut rounds: u32 = 0;
    let mut steps: usize = 0;
    let saturated;
    let mut rounds_run: u32 = 0;

    let mut parents: BTreeMap<Fact, Fact> = BTreeMap::new();
    loop {
        // one index per round, updated incrementally as triggers fire
        let mut index = FactIndex::new(&instance);
        let triggers = collect_triggers(rules, &index);
        if rounds_run == budget.max_depth {
            // out of rounds: saturation holds iff nothing is applicable
            saturated = !triggers.iter().any(|(rule_idx, tuple)| {
                let rule = &rules[*rule_idx];
                let pinned: BTreeMap<Var, ConstantId> = rule
                    .frontier
                    .iter()
                    .cloned()
                    .zip(tuple.iter().cloned())
                    .collect();
                !head_satisfied(rule, &index, &pinned)
            });
            break;
        }
        rounds_run += 1;
        let mut fired = 0usize;
        let mut overflow = false;
        for (rule_idx, tuple) in triggers {
            let rule = &rules[rule_idx];
            let pinned: BTreeMap<Var, ConstantId> = rule
                .frontier
                .iter()
                .cloned()
                .zip(tuple.iter().cloned())
                .collect();
            if head_satisfied(rule, &index, &pinned) {
                continue;
            }
            // fire: instantiate the head with shared fresh nulls
            let mut assignment = pinned.clone();
            for v in rule.existential_vars() {
                assignment.insert(v, ConstantId::Null(next_null));
                next_null += 1;
            }
            let parent_const = tuple.first().cloned();
            let parent_fact = if track_fact && !rule.body.is_empty() {
                // single body atom: locate the matched fact
                match_atoms(&rule.body, &index, &pinned, 0)
                    .expect("uncapped")
                    .map(|solution| {
                        let atom = rule.body.iter().next().expect("single body atom");
                        Fact {
                            relation: atom.relation.clone(),
                            args: atom.args.iter().map(|v| solution[v].clone()).collect(),
                        }
                    })
            } else {
                None
            };
            for atom in &rule.head {
                let fact = Fact {
                    relation: atom.relation.clone(),
                    args: atom.args.iter().map(|v| assignment[v].clone()).collect(),
                };
                if instance.facts.insert(fact.clone()) {
                    index.add_fact(fact.clone());
                    levels.insert(fact.clone(), rounds_run);
                    if track_fact {
                        let source = parent_fact
                            .as_ref()
                            .and_then(|p| src_fact.get(p).cloned())
                            .unwrap_or_else(|| fact.clone());
                        src_fact.insert(fact.clone(), source);
                        if let Some(p) = &parent_fact {
                            parents.insert(fact.clone(), p.clone());
                        }
                    }
                }
            }
            if track_const {
                for v in rule.existential_vars() {
                    let null = assignment[&v].clone();
                    let source = parent_const
                        .as_ref()
                        .and_then(|p| src_const.get(p).cloned())
                        .unwrap_or_else(|| null.clone());
                    src_const.insert(null, source);
                }
            }
            fired += 1;
            steps += 1;
            if instance.len() >= budget.max_facts {
                overflow = true;
                break;
            }
        }
        if overflow {
            saturated = false;
            rounds = rounds_run;
            break;
        }
        if fired == 0 {
            saturated = true;
            break;
        }
        rounds = rounds_run;
    }

    ChaseResult {
        instance,
        levels,
        src_const: track_const.then_some(src_const),
        src_fact: track_fact.then_some(src_fact),
        parents: track_fact.then_some(parents),
        saturated,
        rounds,
        steps_used: steps,
    }
}

pub fn chase_database(db: &Database, rules: &[Tgd], budget: &Budget) -> ChaseResult {
    chase(db.instance(), rules, budget)
}

/// True iff `instance` satisfies every rule (no trigger is applicable).
pub fn satisfies(instance: &Instance, rules: &[Tgd]) -> bool {
    let index = FactIndex::new(instance);
    for (rule_idx, tuple) in collect_triggers(rules, &index) {
        let rule = &rules[rule_idx];
        let pinned: BTreeMap<Var, ConstantId> = rule
            .frontier
            .iter()
            .cloned()
            .zip(tuple.iter().cloned())
            .collect();
        if !head_satisfied(rule, &index, &pinned) {
            return false;
        }
    }
    true
}

/// The subinstance generated below input constant `c`: all facts whose
/// constants derive from `c` (frontier-one provenance).
pub fn chase_below(result: &ChaseResult, c: &ConstantId) -> Result<Instance, ChaseError> {
    let src = result.src_const.as_ref().ok_or(ChaseError::NotFrontierOne)?;
    if !src.contains_key(c) {
        return Err(ChaseError::ConstantNotFound(c.to_string()));
    }
    let below: BTreeSet<ConstantId> = src
        .iter()
        .filter(|(_, s)| *s == c)
        .map(|(d, _)| d.clone())
        .collect();
    Ok(result.instance.restrict_to_constants(&below))
}

/// The subinstance generated below input fact `alpha` (linear provenance).
pub fn chase_below_fact(result: &ChaseResult, alpha: &Fact) -> Result<Instance, ChaseError> {
    let src = result.src_fact.as_ref().ok_or(ChaseError::NotLinear)?;
    Ok(Instance {
        facts: src
            .iter()
            .filter(|(_, s)| *s == alpha)
            .map(|(f, _)| f.clone())
            .collect(),
    })
}

/// The union of all maximally Σ-connected components of the chase that
/// contain at least one constant of `db`. The flag is true when the chase
/// was truncated, i.e. the result is an approximation.
pub fn chase_con(result: &ChaseResult, sigma: &Schema, db: &Database) -> (Instance, bool) {
    let dom = db.adom();
    let mut union = Instance::new();
    for component in result.instance.connected_components(sigma) {
        if component.adom().iter().any(|c| dom.contains(c)) {
            union = union.union(&component);
        }
    }
    (union, !result.saturated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{schema, Atom};

    fn named(s: &str) -> ConstantId {
        ConstantId::named(s)
    }

    fn nf(rel: &str, args: &[&str]) -> Fact {
        Fact::new(rel, args.iter().map(|a| named(a)).collect())
    }

    fn example2_t1() -> Vec<Tgd> {
        vec![
            Tgd::new(
                [Atom::new("A", &["x"])],
                [Atom::new("S", &["x", "y"]), Atom::new("B", &["y"])],
            )
            .unwrap(),
            Tgd::new(
                [Atom::new("B", &["x"])],
                [Atom::new("R", &["x", "y"]), Atom::new("B", &["y"])],
            )
            .unwrap(),
        ]
    }

    fn example2_t2() -> Vec<Tgd> {
        vec![
            Tgd::new(
                [Atom::new("A", &["x"])],
                [Atom::new("S", &["x", "y"]), Atom::new("B", &["y"])],
            )
            .unwrap(),
            Tgd::new(
                [Atom::new("B", &["x"])],
                [Atom::new("R", &["y", "x"]), Atom::new("B", &["y"])],
            )
            .unwrap(),
        ]
    }

    #[test]
    fn applicable_respects_restriction() {
        let rule = Tgd::new(
            [Atom::new("A", &["x"])],
            [Atom::new("S", &["x", "y"])],
        )
        .unwrap();
        let satisfied = Instance::from_facts([nf("A", &["c"]), nf("S", &["c", "d"])]);
        assert!(!applicable(&rule, &satisfied, &[named("c")]));
        let unsatisfied = Instance::from_facts([nf("A", &["c"])]);
        assert!(applicable(&rule, &unsatisfied, &[named("c")]));
    }

    #[test]
    fn applicable_encounter_rule() {
        let rule = Tgd::new(
            [Atom::new("Encounter", &["p", "t"])],
            [Atom::new("M", &["p", "p2", "c", "t2", "t"])],
        )
        .unwrap();
        let i = Instance::from_facts([nf("Encounter", &["b1", "b0"])]);
        assert!(applicable(&rule, &i, &[named("b1"), named("b0")]));
    }

    #[test]
    fn chase_example2_depth3() {
        let db = Database::from_facts([nf("A", &["c"])]).unwrap();
        let result = chase_database(&db, &example2_t1(), &Budget::with_depth(3));
        let expected = Instance::from_facts([
            nf("A", &["c"]),
            Fact::new("S", vec![named("c"), ConstantId::Null(0)]),
            Fact::new("B", vec![ConstantId::Null(0)]),
            Fact::new("R", vec![ConstantId::Null(0), ConstantId::Null(1)]),
            Fact::new("B", vec![ConstantId::Null(1)]),
            Fact::new("R", vec![ConstantId::Null(1), ConstantId::Null(2)]),
            Fact::new("B", vec![ConstantId::Null(2)]),
        ]);
        assert_eq!(result.instance, expected);
        assert!(!result.saturated);
        assert_eq!(result.rounds, 3);
        // level monotonicity: every fact's level is at most its round
        assert_eq!(result.levels[&nf("A", &["c"])], 0);
        assert_eq!(
            result.levels[&Fact::new("B", vec![ConstantId::Null(2)])],
            3
        );
    }

    #[test]
    fn chase_satisfied_database_is_noop() {
        let rule = Tgd::new(
            [Atom::new("R", &["x", "y"])],
            [Atom::new("R", &["x", "z"])],
        )
        .unwrap();
        let db = Database::from_facts([nf("R", &["c", "cp"])]).unwrap();
        let result = chase_database(&db, &[rule], &Budget::with_depth(5));
        assert!(result.saturated);
        assert_eq!(result.instance, db.instance().clone());
        assert_eq!(result.rounds, 0);
        assert_eq!(result.steps_used, 0);
    }

    #[test]
    fn chase_forward_rule_saturates_immediately() {
        // R(x,y) -> exists z. R(x,z): head hom z -> c' exists
        let rule = Tgd::new(
            [Atom::new("R", &["x", "y"])],
            [Atom::new("R", &["x", "z"])],
        )
        .unwrap();
        let db = Database::from_facts([nf("R", &["c", "cp"])]).unwrap();
        let result = chase_database(&db, &[rule], &Budget::with_depth(5));
        assert!(result.saturated);
        assert!(result.instance.len() == 1);
    }

    #[test]
    fn chase_below_separates_roots() {
        let db = Database::from_facts([nf("A", &["c"]), nf("A", &["d"])]).unwrap();
        let result = chase_database(&db, &example2_t2(), &Budget::with_depth(3));
        let below_c = chase_below(&result, &named("c")).unwrap();
        let below_d = chase_below(&result, &named("d")).unwrap();
        let nulls_c: BTreeSet<ConstantId> =
            below_c.adom().into_iter().filter(|k| k.is_null()).collect();
        let nulls_d: BTreeSet<ConstantId> =
            below_d.adom().into_iter().filter(|k| k.is_null()).collect();
        assert!(nulls_c.is_disjoint(&nulls_d));
        assert!(!nulls_c.is_empty());
    }

    #[test]
    fn chase_below_requires_frontier_one() {
        let rule = Tgd::new(
            [Atom::new("R", &["x", "y"])],
            [Atom::new("T", &["x", "y"])],
        )
        .unwrap();
        let db = Database::from_facts([nf("R", &["a", "b"])]).unwrap();
        let result = chase_database(&db, &[rule], &Budget::default());
        assert!(matches!(
            chase_below(&result, &named("a")),
            Err(ChaseError::NotFrontierOne)
        ));
    }

    #[test]
    fn chase_con_excludes_null_components() {
        // Example 2's T2 on {A(c)}: the backward R-chain never touches c
        let db = Database::from_facts([nf("A", &["c"])]).unwrap();
        let result = chase_database(&db, &example2_t2(), &Budget::with_depth(4));
        let (con, approximate) = chase_con(&result, &schema(&["R"]), &db);
        assert!(con.is_empty());
        assert!(approximate);

        // with the full schema the whole truncated chase is connected to c
        let full = result.instance.relations();
        let (con_full, _) = chase_con(&result, &full, &db);
        assert_eq!(con_full, result.instance);
    }

    #[test]
    fn chase_monotone_in_depth() {
        let db = Database::from_facts([nf("A", &["c"])]).unwrap();
        let shallow = chase_database(&db, &example2_t1(), &Budget::with_depth(3));
        let deep = chase_database(&db, &example2_t1(), &Budget::with_depth(5));
        assert!(shallow.instance.facts.is_subset(&deep.instance.facts));
        // levels agree on the shared prefix
        for (fact, lvl) in &shallow.levels {
            assert_eq!(deep.levels[fact], *lvl);
        }
    }

    #[test]
    fn finite_degree_per_round() {
        // degree growth per round is bounded by rules x triggers
        let db = Database::from_facts([nf("A", &["c"])]).unwrap();
        let rules = example2_t1();
        let result = chase_database(&db, &rules, &Budget::with_depth(6));
        let mut degree: BTreeMap<ConstantId, usize> = BTreeMap::new();
        for fact in &result.instance.facts {
            for c in &fact.args {
                *degree.entry(c.clone()).or_default() += 1;
            }
        }
        let max_degree = degree.values().copied().max().unwrap_or(0);
        let head_atoms: usize = rules.iter().map(|r| r.head.len()).max().unwrap_or(0);
        assert!(max_degree <= (1 + rules.len() * head_atoms) * (result.rounds as usize + 1));
    }
}
