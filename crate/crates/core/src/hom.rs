//! Backtracking homomorphism search between finite instances, CQ
//! evaluation, bounded homomorphisms, CQ entailment over the chase, and
//! exact homomorphism checks from eventually-periodic infinite chains.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::chase::{chase, ChaseResult};
use crate::model::{
    Atom, ConstantId, Cq, Database, Fact, Instance, Schema, Tgd, Var, TRUE_RELATION,
};
use crate::verdict::{budget_echo, Basis, Budget, Certificate, Verdict};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HomError {
    #[error("search budget exceeded ({0} nodes)")]
    BudgetExceeded(usize),
    #[error("chain spec has no loop segment")]
    SpecNotPeriodic,
    #[error("inconsistent pin: {0}")]
    InconsistentPin(String),
}

/// A schema-restricted homomorphism witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hom {
    pub mapping: BTreeMap<ConstantId, ConstantId>,
    pub sigma: Schema,
    pub database_preserving: bool,
}

impl Hom {
    pub fn certificate(&self) -> Certificate {
        Certificate::Homomorphism {
            mapping: self
                .mapping
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }
}

/// Checks a claimed homomorphism against its defining conditions.
pub fn verify_hom(source: &Instance, target: &Instance, hom: &Hom) -> bool {
    let target_dom = target.adom();
    for c in source.adom() {
        match hom.mapping.get(&c) {
            None => return false,
            Some(img) => {
                if !target_dom.contains(img) && !target_dom.is_empty() {
                    return false;
                }
                if hom.database_preserving && c.is_named() && img != &c {
                    return false;
                }
            }
        }
    }
    for fact in &source.facts {
        if !hom.sigma.contains(&fact.relation) {
            continue;
        }
        let image = Fact {
            relation: fact.relation.clone(),
            args: fact.args.iter().map(|a| hom.mapping[a].clone()).collect(),
        };
        if !target.contains(&image) {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Shared backtracking core: match a set of variable atoms into an instance.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Term {
    Var(Var),
    Const(ConstantId),
}

#[derive(Debug, Clone)]
pub(crate) struct Pattern {
    pub relation: String,
    pub args: Vec<Term>,
}

impl Pattern {
    pub fn from_atom(atom: &Atom) -> Pattern {
        Pattern {
            relation: atom.relation.clone(),
            args: atom.args.iter().map(|v| Term::Var(v.clone())).collect(),
        }
    }
}

pub(crate) struct FactIndex {
    by_rel: BTreeMap<String, Vec<Fact>>,
    adom_set: BTreeSet<ConstantId>,
    pub adom: Vec<ConstantId>,
}

impl FactIndex {
    pub fn new(instance: &Instance) -> Self {
        let mut index = FactIndex {
            by_rel: BTreeMap::new(),
            adom_set: BTreeSet::new(),
            adom: Vec::new(),
        };
        for fact in &instance.facts {
            index.add_fact(fact.clone());
        }
        index
    }

    /// Incremental insert; keeps `adom` sorted.
    pub fn add_fact(&mut self, fact: Fact) {
        for arg in &fact.args {
            if self.adom_set.insert(arg.clone()) {
                let pos = self.adom.binary_search(arg).unwrap_or_else(|p| p);
                self.adom.insert(pos, arg.clone());
            }
        }
        self.by_rel.entry(fact.relation.clone()).or_default().push(fact);
    }

    fn facts(&self, relation: &str) -> &[Fact] {
        self.by_rel.get(relation).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Backtracking matcher for a conjunction of patterns against a fact
/// index. Selects the most constrained unmatched pattern at every step.
pub(crate) struct Solver<'a> {
    patterns: Vec<Pattern>,
    index: &'a FactIndex,
    node_cap: usize,
}

pub(crate) struct SolveOutcome {
    pub exhausted: bool,
    pub nodes: usize,
}

impl<'a> Solver<'a> {
    pub fn new(patterns: Vec<Pattern>, index: &'a FactIndex, node_cap: usize) -> Self {
        Solver { patterns, index, node_cap }
    }

    /// Enumerates assignments extending `pinned` that satisfy every
    /// pattern, invoking `on_solution` for each; stops early when it
    /// returns `false`. `exhausted` is false iff the node cap was hit.
    pub fn solve(
        &self,
        pinned: &BTreeMap<Var, ConstantId>,
        on_solution: &mut dyn FnMut(&BTreeMap<Var, ConstantId>) -> bool,
    ) -> SolveOutcome {
        let mut assignment = pinned.clone();
        let mut used = vec![false; self.patterns.len()];
        let mut nodes = 0usize;
        let exhausted =
            self.recurse(&mut assignment, &mut used, &mut nodes, on_solution);
        SolveOutcome { exhausted, nodes }
    }

    fn recurse(
        &self,
        assignment: &mut BTreeMap<Var, ConstantId>,
        used: &mut [bool],
        nodes: &mut usize,
        on_solution: &mut dyn FnMut(&BTreeMap<Var, ConstantId>) -> bool,
    ) -> bool {
        *nodes += 1;
        if self.node_cap != 0 && *nodes > self.node_cap {
            return false;
        }
        // pick the unmatched pattern with the fewest candidate facts
        let mut best: Option<(usize, Vec<&Fact>)> = None;
        for (i, pattern) in self.patterns.iter().enumerate() {
            if used[i] {
                continue;
            }
            let candidates = self.candidates(pattern, assignment);
            if best.as_ref().map_or(true, |(_, c)| candidates.len() < c.len()) {
                let empty = candidates.is_empty();
                best = Some((i, candidates));
                if empty {
                    break;
                }
            }
        }
        let (idx, candidates) = match best {
            None => return on_solution(assignment),
            Some(b) => b,
        };
        used[idx] = true;
        let pattern = &self.patterns[idx];
        for fact in candidates {
            let mut added: Vec<Var> = Vec::new();
            let mut ok = true;
            for (term, constant) in pattern.args.iter().zip(&fact.args) {
                match term {
                    Term::Const(c) => {
                        if c != constant {
                            ok = false;
                            break;
                        }
                    }
                    Term::Var(v) => match assignment.get(v) {
                        Some(c) if c == constant => {}
                        Some(_) => {
                            ok = false;
                            break;
                        }
                        None => {
                            assignment.insert(v.clone(), constant.clone());
                            added.push(v.clone());
                        }
                    },
                }
            }
            if ok && !self.recurse(assignment, used, nodes, on_solution) {
                for v in added {
                    assignment.remove(&v);
                }
                used[idx] = false;
                return false;
            }
            for v in added {
                assignment.remove(&v);
            }
        }
        used[idx] = false;
        true
    }

    fn candidates(
        &self,
        pattern: &Pattern,
        assignment: &BTreeMap<Var, ConstantId>,
    ) -> Vec<&'a Fact> {
        self.index
            .facts(&pattern.relation)
            .iter()
            .filter(|fact| {
                pattern.args.iter().zip(&fact.args).all(|(term, constant)| match term {
                    Term::Const(c) => c == constant,
                    Term::Var(v) => assignment.get(v).map_or(true, |c| c == constant),
                })
            })
            .collect()
    }
}

/// First satisfying assignment for `atoms` (as variable patterns) into
/// `target`, extending `pinned`. `true` atoms constrain their variables
/// to the active domain only.
pub(crate) fn match_atoms(
    atoms: &BTreeSet<Atom>,
    index: &FactIndex,
    pinned: &BTreeMap<Var, ConstantId>,
    node_cap: usize,
) -> Result<Option<BTreeMap<Var, ConstantId>>, HomError> {
    let (real, true_vars): (Vec<&Atom>, BTreeSet<&Var>) = split_true_atoms(atoms);
    if !true_vars.is_empty() && index.adom.is_empty() {
        return Ok(None);
    }
    let patterns: Vec<Pattern> = real.iter().map(|a| Pattern::from_atom(a)).collect();
    let solver = Solver::new(patterns, index, node_cap);
    let mut found: Option<BTreeMap<Var, ConstantId>> = None;
    let outcome = solver.solve(pinned, &mut |solution| {
        found = Some(solution.clone());
        false
    });
    if found.is_none() && !outcome.exhausted {
        return Err(HomError::BudgetExceeded(outcome.nodes));
    }
    Ok(found)
}

fn split_true_atoms(atoms: &BTreeSet<Atom>) -> (Vec<&Atom>, BTreeSet<&Var>) {
    let mut real = Vec::new();
    let mut true_vars = BTreeSet::new();
    for atom in atoms {
        if atom.relation == TRUE_RELATION {
            true_vars.extend(atom.args.iter());
        } else {
            real.push(atom);
        }
    }
    (real, true_vars)
}

// ---------------------------------------------------------------------------
// find_hom
// ---------------------------------------------------------------------------

/// Searches for a Σ-homomorphism from `source` to `target`. Complete on
/// finite instances: `Ok(None)` means none exists. `pins` fixes selected
/// source constants; `db_preserving` additionally pins every named
/// constant to itself.
pub fn find_hom(
    source: &Instance,
    target: &Instance,
    sigma: &Schema,
    pins: &BTreeMap<ConstantId, ConstantId>,
    db_preserving: bool,
    max_candidates: usize,
) -> Result<Option<Hom>, HomError> {
    let target_dom: BTreeSet<ConstantId> = target.adom();
    let source_dom = source.adom();

    // every source constant becomes a variable of the pattern match
    let var_of = |c: &ConstantId| format!("@{c}");
    let mut pinned: BTreeMap<Var, ConstantId> = BTreeMap::new();
    for (c, img) in pins {
        if !source_dom.contains(c) {
            return Err(HomError::InconsistentPin(format!(
                "pinned constant {c} not in source"
            )));
        }
        if !target_dom.contains(img) {
            return Ok(None);
        }
        pinned.insert(var_of(c), img.clone());
    }
    if db_preserving {
        for c in &source_dom {
            if c.is_named() {
                if let Some(img) = pinned.get(&var_of(c)) {
                    if img != c {
                        return Err(HomError::InconsistentPin(format!(
                            "database-preserving search pins {c} to {img}"
                        )));
                    }
                }
                if !target_dom.contains(c) {
                    return Ok(None);
                }
                pinned.insert(var_of(c), c.clone());
            }
        }
    }
    if !source_dom.is_empty() && target_dom.is_empty() {
        return Ok(None);
    }

    let patterns: Vec<Pattern> = source
        .facts
        .iter()
        .filter(|f| sigma.contains(&f.relation))
        .map(|f| Pattern {
            relation: f.relation.clone(),
            args: f.args.iter().map(|c| Term::Var(var_of(c))).collect(),
        })
        .collect();

    let index = FactIndex::new(target);
    let solver = Solver::new(patterns, &index, max_candidates);
    let mut found: Option<BTreeMap<Var, ConstantId>> = None;
    let outcome = solver.solve(&pinned, &mut |solution| {
        found = Some(solution.clone());
        false
    });
    if found.is_none() && !outcome.exhausted {
        return Err(HomError::BudgetExceeded(outcome.nodes));
    }
    Ok(found.map(|solution| {
        let mut mapping = BTreeMap::new();
        let fallback = target_dom.iter().next().cloned();
        for c in &source_dom {
            let img = solution
                .get(&var_of(c))
                .cloned()
                .or_else(|| if c.is_named() && db_preserving { Some(c.clone()) } else { None })
                .or_else(|| fallback.clone())
                .expect("nonempty target domain");
            mapping.insert(c.clone(), img);
        }
        Hom { mapping, sigma: sigma.clone(), database_preserving: db_preserving }
    }))
}

// ---------------------------------------------------------------------------
// CQ evaluation and entailment
// ---------------------------------------------------------------------------

/// Evaluates a CQ on a finite instance, returning the set of answers.
/// Boolean queries yield the empty tuple as their single answer.
pub fn evaluate_cq(q: &Cq, instance: &Instance) -> BTreeSet<Vec<ConstantId>> {
    let index = FactIndex::new(instance);
    let (real, true_vars) = split_true_atoms(&q.atoms);
    let mut answers = BTreeSet::new();
    if !true_vars.is_empty() && index.adom.is_empty() {
        return answers;
    }

    // answer variables not bound by a real atom range over the active domain
    let bound: BTreeSet<&Var> = real.iter().flat_map(|a| a.args.iter()).collect();
    let free_answers: Vec<&Var> =
        q.answer_vars.iter().filter(|v| !bound.contains(v)).collect();
    if !free_answers.is_empty() && index.adom.is_empty() {
        return answers;
    }

    let patterns: Vec<Pattern> = real.iter().map(|a| Pattern::from_atom(a)).collect();
    let solver = Solver::new(patterns, &index, 0);
    let domain = index.adom.clone();
    solver.solve(&BTreeMap::new(), &mut |solution| {
        // expand unbound answer variables over the domain
        let mut partials: Vec<BTreeMap<&Var, ConstantId>> = vec![BTreeMap::new()];
        for v in &free_answers {
            let mut next = Vec::new();
            for p in &partials {
                if let Some(c) = p.get(*v) {
                    let _ = c;
                    next.push(p.clone());
                    continue;
                }
                for c in &domain {
                    let mut p2 = p.clone();
                    p2.insert(v, c.clone());
                    next.push(p2);
                }
            }
            partials = next;
        }
        for p in partials {
            let tuple: Vec<ConstantId> = q
                .answer_vars
                .iter()
                .map(|v| {
                    solution
                        .get(v)
                        .cloned()
                        .unwrap_or_else(|| p[v].clone())
                })
                .collect();
            answers.insert(tuple);
        }
        true
    });
    answers
}

/// Decides `D, T |= q(tuple)` against a budgeted chase. HOLDS is exact
/// (the truncation is a subinstance of the chase); FAILS is exact only
/// when the chase saturated; otherwise UNKNOWN.
pub fn cq_entailed(
    db: &Database,
    rules: &[Tgd],
    q: &Cq,
    tuple: &[ConstantId],
    budget: &Budget,
) -> Verdict {
    let result = chase(db.instance(), rules, budget);
    cq_entailed_in(&result, q, tuple, budget)
}

/// Same as [`cq_entailed`] but against an already-computed chase.
pub fn cq_entailed_in(
    result: &ChaseResult,
    q: &Cq,
    tuple: &[ConstantId],
    budget: &Budget,
) -> Verdict {
    assert_eq!(q.arity(), tuple.len(), "answer tuple arity mismatch");
    let index = FactIndex::new(&result.instance);
    let mut pinned = BTreeMap::new();
    for (v, c) in q.answer_vars.iter().zip(tuple) {
        if let Some(prev) = pinned.insert(v.clone(), c.clone()) {
            if &prev != c {
                return Verdict::fails(
                    Certificate::SearchSummary {
                        summary: budget_echo(&[("inconsistent_tuple", 1)]),
                    },
                    Basis::FiniteProblem,
                );
            }
        }
    }
    match match_atoms(&q.atoms, &index, &pinned, budget.max_candidates) {
        Ok(Some(solution)) => {
            let mapping = solution
                .iter()
                .map(|(v, c)| (v.clone(), c.to_string()))
                .collect::<BTreeMap<_, _>>();
            Verdict::holds(
                Certificate::Homomorphism {
                    mapping: mapping.into_iter().map(|(v, c)| (v, c)).collect(),
                },
                if result.saturated { Basis::SaturatedChase } else { Basis::TruncatedWitness },
            )
        }
        Ok(None) => {
            if result.saturated {
                Verdict::fails(
                    Certificate::SearchSummary {
                        summary: budget_echo(&[
                            ("chase_rounds", result.rounds as u64),
                            ("chase_facts", result.instance.len() as u64),
                        ]),
                    },
                    Basis::SaturatedChase,
                )
            } else {
                Verdict::unknown(budget.echo())
            }
        }
        Err(_) => Verdict::unknown(budget.echo()),
    }
}

// ---------------------------------------------------------------------------
// Bounded homomorphisms
// ---------------------------------------------------------------------------

/// Decides `source ->^n_sigma target`: every induced subinstance of
/// `source` with at most `n` constants admits a database-preserving
/// Σ-homomorphism into `target`.
///
/// Only Σ-connected subinstances (plus singletons) are enumerated: a
/// disconnected subinstance maps iff each of its components does, so
/// minimal failing subinstances are connected.
pub fn hom_exists_n(
    source: &Instance,
    target: &Instance,
    sigma: &Schema,
    n: usize,
    budget: &Budget,
) -> Verdict {
    let mut checked = 0u64;
    let restricted = source.restrict(sigma);
    let mut candidates: BTreeSet<BTreeSet<ConstantId>> = BTreeSet::new();
    if n >= 1 {
        for c in source.adom() {
            candidates.insert(BTreeSet::from([c]));
        }
    }

    // adjacency in the Σ-Gaifman graph of the source
    let mut adjacency: BTreeMap<ConstantId, BTreeSet<ConstantId>> = BTreeMap::new();
    for fact in &restricted.facts {
        for a in &fact.args {
            for b in &fact.args {
                if a != b {
                    adjacency.entry(a.clone()).or_default().insert(b.clone());
                }
            }
        }
    }
    let mut frontier: Vec<BTreeSet<ConstantId>> = candidates.iter().cloned().collect();
    while let Some(set) = frontier.pop() {
        if set.len() >= n {
            continue;
        }
        let neighbors: BTreeSet<ConstantId> = set
            .iter()
            .flat_map(|c| adjacency.get(c).cloned().unwrap_or_default())
            .filter(|c| !set.contains(c))
            .collect();
        for nb in neighbors {
            let mut bigger = set.clone();
            bigger.insert(nb);
            if candidates.insert(bigger.clone()) {
                if budget.max_candidates != 0 && candidates.len() > budget.max_candidates {
                    return Verdict::unknown(budget.echo());
                }
                frontier.push(bigger);
            }
        }
    }

    for domain in &candidates {
        let sub = source.restrict_to_constants(domain);
        checked += 1;
        match find_hom(&sub, target, sigma, &BTreeMap::new(), true, budget.max_candidates) {
            Ok(Some(_)) => {}
            Ok(None) => {
                return Verdict::fails(
                    Certificate::Subinstance {
                        domain: domain.iter().map(|c| c.to_string()).collect(),
                        facts: sub.facts.iter().map(|f| f.to_string()).collect(),
                    },
                    Basis::FiniteProblem,
                );
            }
            Err(_) => return Verdict::unknown(budget.echo()),
        }
    }
    Verdict::holds(
        Certificate::SearchSummary {
            summary: budget_echo(&[("subinstances_checked", checked), ("n", n as u64)]),
        },
        Basis::FiniteProblem,
    )
}

// ---------------------------------------------------------------------------
// Eventually-periodic chains
// ---------------------------------------------------------------------------

/// One link of an eventually-periodic chain: atoms over the left boundary
/// (`Left(i)`), the right boundary (`Right(i)`), internal existentials and
/// fixed constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChainTerm {
    Left(usize),
    Right(usize),
    Internal(String),
    Const(ConstantId),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChainAtom {
    pub relation: String,
    pub args: Vec<ChainTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChainSegment {
    pub atoms: Vec<ChainAtom>,
}

/// A finite prefix followed by an infinitely repeated loop of segments.
/// Boundary slot `i` of one segment's right side is slot `i` of the next
/// segment's left side. The initial boundary holds concrete constants;
/// named ones are pinned by database-preserving semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSpec {
    pub boundary: usize,
    pub initial: Vec<ConstantId>,
    pub prefix: Vec<ChainSegment>,
    pub loop_segments: Vec<ChainSegment>,
}

type BoundaryState = Vec<ConstantId>;

/// Decides existence of a database-preserving Σ-homomorphism from the
/// infinite chain described by `spec` into the finite instance `target`,
/// by reachability in the product graph: a homomorphism exists iff some
/// post-prefix state can continue stepping forever, i.e. reaches a cycle.
pub fn infinite_chain_hom(
    spec: &ChainSpec,
    target: &Instance,
    sigma: &Schema,
    pins: &BTreeMap<ConstantId, ConstantId>,
) -> Result<Verdict, HomError> {
    if spec.loop_segments.is_empty() {
        return Err(HomError::SpecNotPeriodic);
    }
    assert_eq!(spec.initial.len(), spec.boundary);
    let index = FactIndex::new(target);
    let target_dom: BTreeSet<ConstantId> = target.adom();

    // image of a fixed chain constant: pinned, or itself when named
    let const_image = |c: &ConstantId| -> Option<ConstantId> {
        if let Some(img) = pins.get(c) {
            return Some(img.clone());
        }
        if c.is_named() {
            return target_dom.contains(c).then(|| c.clone());
        }
        None
    };

    // initial states: resolve the initial boundary tuple
    let mut initial_states: Vec<BoundaryState> = vec![Vec::new()];
    for c in &spec.initial {
        let mut next = Vec::new();
        match const_image(c) {
            Some(img) => {
                for st in &initial_states {
                    let mut s = st.clone();
                    s.push(img.clone());
                    next.push(s);
                }
            }
            None => {
                // unpinned null boundary: free choice
                for st in &initial_states {
                    for t in &target_dom {
                        let mut s = st.clone();
                        s.push(t.clone());
                        next.push(s);
                    }
                }
            }
        }
        initial_states = next;
        if initial_states.is_empty() {
            break;
        }
    }

    let step = |state: &BoundaryState, segment: &ChainSegment| -> Result<Vec<BoundaryState>, HomError> {
        let mut patterns = Vec::new();
        let mut inconsistent = false;
        for atom in &segment.atoms {
            if !sigma.contains(&atom.relation) {
                continue;
            }
            let args: Vec<Term> = atom
                .args
                .iter()
                .map(|t| match t {
                    ChainTerm::Left(i) => Term::Const(state[*i].clone()),
                    ChainTerm::Right(i) => Term::Var(format!("R{i}")),
                    ChainTerm::Internal(name) => Term::Var(format!("E{name}")),
                    ChainTerm::Const(c) => match const_image(c) {
                        Some(img) => Term::Const(img),
                        None => {
                            inconsistent = true;
                            Term::Const(c.clone())
                        }
                    },
                })
                .collect();
            patterns.push(Pattern { relation: atom.relation.clone(), args });
        }
        if inconsistent {
            return Ok(Vec::new());
        }
        let solver = Solver::new(patterns, &index, 0);
        let mut states: BTreeSet<BoundaryState> = BTreeSet::new();
        solver.solve(&BTreeMap::new(), &mut |solution| {
            let mut out = Vec::with_capacity(spec.boundary);
            let mut total = true;
            for i in 0..spec.boundary {
                match solution.get(&format!("R{i}")) {
                    Some(c) => out.push(c.clone()),
                    None => {
                        total = false;
                        break;
                    }
                }
            }
            if total {
                states.insert(out);
            } else {
                // boundary slot unconstrained by the segment: any target
                for t in &target_dom {
                    let mut s = Vec::with_capacity(spec.boundary);
                    for i in 0..spec.boundary {
                        s.push(
                            solution
                                .get(&format!("R{i}"))
                                .cloned()
                                .unwrap_or_else(|| t.clone()),
                        );
                    }
                    states.insert(s);
                }
            }
            true
        });
        Ok(states.into_iter().collect())
    };

    // run the prefix
    let mut states: BTreeSet<BoundaryState> = initial_states.into_iter().collect();
    for segment in &spec.prefix {
        let mut next = BTreeSet::new();
        for st in &states {
            next.extend(step(st, segment)?);
        }
        states = next;
    }

    // explore the loop product graph: nodes are (state, phase)
    type Node = (BoundaryState, usize);
    let mut reachable: BTreeSet<Node> = BTreeSet::new();
    let mut succ: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    let mut queue: Vec<Node> = states.iter().map(|s| (s.clone(), 0usize)).collect();
    let entry_nodes: BTreeSet<Node> = queue.iter().cloned().collect();
    while let Some(node) = queue.pop() {
        if !reachable.insert(node.clone()) {
            continue;
        }
        let (state, phase) = &node;
        let segment = &spec.loop_segments[*phase];
        let next_phase = (*phase + 1) % spec.loop_segments.len();
        let nexts: Vec<Node> = step(state, segment)?
            .into_iter()
            .map(|s| (s, next_phase))
            .collect();
        for nx in &nexts {
            queue.push(nx.clone());
        }
        succ.insert(node, nexts);
    }

    // trim nodes without successors; survivors can step forever
    let mut alive: BTreeSet<Node> = reachable.clone();
    loop {
        let dead: Vec<Node> = alive
            .iter()
            .filter(|node| {
                succ.get(*node)
                    .map_or(true, |ns| !ns.iter().any(|n| alive.contains(n)))
            })
            .cloned()
            .collect();
        if dead.is_empty() {
            break;
        }
        for d in dead {
            alive.remove(&d);
        }
    }

    let start = entry_nodes.iter().find(|n| alive.contains(*n));
    match start {
        Some(node) => {
            // walk successors inside the surviving set until a node repeats
            let mut path: Vec<Node> = vec![node.clone()];
            let mut seen: BTreeMap<Node, usize> = BTreeMap::new();
            seen.insert(node.clone(), 0);
            let cycle_start = loop {
                let current = path.last().unwrap();
                let next = succ[current]
                    .iter()
                    .find(|n| alive.contains(*n))
                    .expect("surviving node has surviving successor")
                    .clone();
                if let Some(&i) = seen.get(&next) {
                    break i;
                }
                seen.insert(next.clone(), path.len());
                path.push(next);
            };
            Ok(Verdict::holds(
                Certificate::Lasso {
                    states: path
                        .iter()
                        .map(|(s, _)| s.iter().map(|c| c.to_string()).collect())
                        .collect(),
                    cycle_start,
                },
                Basis::FiniteProblem,
            ))
        }
        None => Ok(Verdict::fails(
            Certificate::SearchSummary {
                summary: budget_echo(&[
                    ("product_states", reachable.len() as u64),
                    ("post_prefix_states", states.len() as u64),
                ]),
            },
            Basis::FiniteProblem,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::schema;

    fn named(s: &str) -> ConstantId {
        ConstantId::named(s)
    }

    fn nf(rel: &str, args: &[&str]) -> Fact {
        Fact::new(rel, args.iter().map(|a| named(a)).collect())
    }

    fn null_fact(rel: &str, args: &[u64]) -> Fact {
        Fact::new(rel, args.iter().map(|&k| ConstantId::Null(k)).collect())
    }

    #[test]
    fn two_chain_into_single_edge_fails() {
        // no homomorphism from R(x,y),R(y,z) into {R(c,c')}
        let source =
            Instance::from_facts([null_fact("R", &[0, 1]), null_fact("R", &[1, 2])]);
        let target = Instance::from_facts([nf("R", &["c", "cp"])]);
        let hom = find_hom(&source, &target, &schema(&["R"]), &BTreeMap::new(), true, 0)
            .unwrap();
        assert!(hom.is_none());
    }

    #[test]
    fn identity_hom_exists() {
        let i = Instance::from_facts([nf("R", &["a", "b"]), nf("S", &["b", "c"])]);
        let hom =
            find_hom(&i, &i, &i.relations(), &BTreeMap::new(), true, 0).unwrap().unwrap();
        assert!(verify_hom(&i, &i, &hom));
        for (k, v) in &hom.mapping {
            assert_eq!(k, v);
        }
    }

    #[test]
    fn chain_into_reflexive_loop() {
        let source = Instance::from_facts([null_fact("R", &[0, 1]), null_fact("R", &[1, 2])]);
        let target = Instance::from_facts([nf("R", &["a", "a"])]);
        let hom = find_hom(&source, &target, &schema(&["R"]), &BTreeMap::new(), true, 0)
            .unwrap()
            .unwrap();
        assert!(hom.mapping.values().all(|c| c == &named("a")));
    }

    #[test]
    fn find_hom_agrees_with_exhaustive_enumeration() {
        // oracle: enumerate all mappings on small instances
        let cases = vec![
            (
                Instance::from_facts([null_fact("R", &[0, 1]), null_fact("R", &[1, 0])]),
                Instance::from_facts([nf("R", &["a", "b"]), nf("R", &["b", "a"])]),
            ),
            (
                Instance::from_facts([null_fact("R", &[0, 1]), null_fact("S", &[1, 2])]),
                Instance::from_facts([nf("R", &["a", "b"]), nf("S", &["a", "b"])]),
            ),
            (
                Instance::from_facts([null_fact("R", &[0, 0])]),
                Instance::from_facts([nf("R", &["a", "b"]), nf("R", &["b", "b"])]),
            ),
            (
                Instance::from_facts([
                    null_fact("R", &[0, 1]),
                    null_fact("R", &[1, 2]),
                    null_fact("R", &[2, 0]),
                ]),
                Instance::from_facts([nf("R", &["a", "b"]), nf("R", &["b", "a"])]),
            ),
        ];
        for (source, target) in cases {
            let sigma = source.relations();
            let got =
                find_hom(&source, &target, &sigma, &BTreeMap::new(), true, 0).unwrap();
            let expected = exhaustive_hom_exists(&source, &target, &sigma);
            assert_eq!(got.is_some(), expected, "on {source} -> {target}");
            if let Some(h) = got {
                assert!(verify_hom(&source, &target, &h));
            }
        }
    }

    fn exhaustive_hom_exists(source: &Instance, target: &Instance, sigma: &Schema) -> bool {
        let src: Vec<ConstantId> = source.adom().into_iter().collect();
        let dst: Vec<ConstantId> = target.adom().into_iter().collect();
        if src.is_empty() {
            return true;
        }
        if dst.is_empty() {
            return false;
        }
        let mut counters = vec![0usize; src.len()];
        loop {
            let mapping: BTreeMap<ConstantId, ConstantId> = src
                .iter()
                .enumerate()
                .map(|(i, c)| (c.clone(), dst[counters[i]].clone()))
                .collect();
            let ok = src
                .iter()
                .all(|c| !c.is_named() || mapping[c] == *c)
                && source.facts.iter().all(|f| {
                    !sigma.contains(&f.relation) || {
                        let img = Fact {
                            relation: f.relation.clone(),
                            args: f.args.iter().map(|a| mapping[a].clone()).collect(),
                        };
                        target.contains(&img)
                    }
                });
            if ok {
                return true;
            }
            let mut i = 0;
            loop {
                if i == src.len() {
                    return false;
                }
                counters[i] += 1;
                if counters[i] < dst.len() {
                    break;
                }
                counters[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn evaluate_cq_basics() {
        let i = Instance::from_facts([nf("R", &["a", "b"]), nf("R", &["b", "b"])]);
        let q = Cq::new(&["x"], [Atom::new("R", &["x", "y"])]);
        let answers = evaluate_cq(&q, &i);
        assert_eq!(
            answers,
            BTreeSet::from([vec![named("a")], vec![named("b")]])
        );

        let q2 = Cq::new(&[], [Atom::new("R", &["x", "y"]), Atom::new("R", &["y", "z"])]);
        assert!(evaluate_cq(&q2, &Instance::from_facts([nf("R", &["a", "b"])])).is_empty());

        let q3 = Cq::new(&["x"], [Atom::new("A", &["x"])]);
        assert_eq!(
            evaluate_cq(&q3, &Instance::from_facts([nf("A", &["c"])])),
            BTreeSet::from([vec![named("c")]])
        );
    }

    #[test]
    fn evaluate_true_cq() {
        let i = Instance::from_facts([nf("A", &["c"])]);
        let q = Cq::truth();
        assert_eq!(evaluate_cq(&q, &i), BTreeSet::from([vec![named("c")]]));
        assert!(evaluate_cq(&q, &Instance::new()).is_empty());
        // Boolean empty CQ holds everywhere
        let q0 = Cq::new(&[], []);
        assert_eq!(evaluate_cq(&q0, &Instance::new()), BTreeSet::from([vec![]]));
    }

    #[test]
    fn hom_exists_n_trivial_and_db_preserving() {
        let i1 = Instance::from_facts([nf("R", &["c", "d"])]);
        let i2 = Instance::from_facts([nf("R", &["c", "c"])]);
        let sigma = schema(&["R"]);
        // n = 0 holds for anything
        assert!(hom_exists_n(&i1, &i2, &sigma, 0, &Budget::default()).is_holds());
        // d must stay d, so it fails at n = 2 (already at n = 1: d not in target)
        let v = hom_exists_n(&i1, &i2, &sigma, 2, &Budget::default());
        assert!(v.is_fails());
    }

    #[test]
    fn monotonicity_of_bounded_homs() {
        let i1 = Instance::from_facts([
            null_fact("R", &[0, 1]),
            null_fact("R", &[1, 2]),
            null_fact("R", &[2, 3]),
        ]);
        let i2 = Instance::from_facts([nf("R", &["a", "b"]), nf("R", &["b", "a"])]);
        let sigma = schema(&["R"]);
        let mut last = true;
        for n in (0..=4).rev() {
            let v = hom_exists_n(&i1, &i2, &sigma, n, &Budget::default());
            if !last {
                assert!(!v.is_holds(), "monotonicity violated at n={n}");
            }
            last = v.is_holds();
        }
    }

    #[test]
    fn self_loop_chain_holds() {
        // loop of an R-self-edge into {R(a,a)}
        let spec = ChainSpec {
            boundary: 1,
            initial: vec![ConstantId::Null(0)],
            prefix: vec![],
            loop_segments: vec![ChainSegment {
                atoms: vec![ChainAtom {
                    relation: "R".into(),
                    args: vec![ChainTerm::Left(0), ChainTerm::Right(0)],
                }],
            }],
        };
        let target = Instance::from_facts([nf("R", &["a", "a"])]);
        let v = infinite_chain_hom(&spec, &target, &schema(&["R"]), &BTreeMap::new())
            .unwrap();
        assert!(v.is_holds());

        // but an infinite R-chain cannot map into a single non-loop edge
        let target2 = Instance::from_facts([nf("R", &["a", "b"])]);
        let v2 = infinite_chain_hom(&spec, &target2, &schema(&["R"]), &BTreeMap::new())
            .unwrap();
        assert!(v2.is_fails());
    }
}
