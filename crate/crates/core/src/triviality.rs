//! Exact triviality decision for linear rule sets.
//!
//! Non-triviality is always witnessed by a singleton database together
//! with a connected cluster of at most two chase facts that admits no
//! database-preserving hom back into the database. The checker runs a
//! literal bounded chase per singleton database (exact FAILS and exact
//! HOLDS on saturation) and falls back to a shape/cluster fixpoint for
//! HOLDS on non-terminating chases.
//!
//! The fixpoint abstracts creation events as bundles (the facts one rule
//! application adds, sharing fresh null classes) over a finite alphabet
//! of database-constant positions and null classes. A rule fires from a
//! bundle unless its head is satisfied within the bundle itself plus the
//! database fact; such a local witness provably exists in the literal
//! chase before the trigger is checked, so the abstraction skips only
//! what the chase skips and its pattern set over-approximates the chase.
//! Absence of a bad pattern in the fixpoint is therefore exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::chase::{chase, ChaseResult};
use crate::hom::{find_hom, match_atoms, FactIndex};
use crate::model::{
    all_linear, instance_as_cq, Atom, ConstantId, Database, Fact, Instance, Schema,
    Tgd, Var,
};
use crate::verdict::{budget_echo, Basis, Budget, Certificate, Verdict};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrivialityError {
    #[error("canonical state space exceeded budget ({0})")]
    StateSpaceExceeded(usize),
    #[error("symbol `{0}` already occurs in the inputs")]
    SymbolClash(String),
    #[error("rules must be linear")]
    NotLinear,
}

/// One position of an abstracted fact: a database constant (by index
/// into the singleton fact's distinct constants) or a null class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ShapeTerm {
    DbConst(usize),
    NullClass(usize),
}

/// A chase fact up to null renaming.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FactShape {
    pub relation: String,
    pub pattern: Vec<ShapeTerm>,
}

impl fmt::Display for FactShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, t) in self.pattern.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match t {
                ShapeTerm::DbConst(k) => write!(f, "${k}")?,
                ShapeTerm::NullClass(j) => write!(f, "n{j}")?,
            }
        }
        write!(f, ")")
    }
}

/// One or two fact shapes with the equalities between their null classes
/// (classes are distinct nulls within a fact and across facts unless
/// correlated).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClusterState {
    pub facts: Vec<FactShape>,
    /// Pairs (class of facts[0], class of facts[1]).
    pub correlation: Vec<(usize, usize)>,
}

impl ClusterState {
    pub fn single(shape: FactShape) -> Self {
        ClusterState { facts: vec![shape], correlation: Vec::new() }
    }

    /// The cluster as a concrete instance: database-constant positions
    /// become the given constants, classes become nulls (the second
    /// fact's uncorrelated classes are offset to stay distinct).
    pub fn instantiate(&self, db_consts: &[ConstantId]) -> Instance {
        let offset = 1000u64;
        let mut facts = Vec::new();
        for (fi, shape) in self.facts.iter().enumerate() {
            let args = shape
                .pattern
                .iter()
                .map(|t| match t {
                    ShapeTerm::DbConst(k) => db_consts[*k].clone(),
                    ShapeTerm::NullClass(j) => {
                        if fi == 0 {
                            ConstantId::Null(*j as u64)
                        } else if let Some((a, _)) =
                            self.correlation.iter().find(|(_, b)| b == j)
                        {
                            ConstantId::Null(*a as u64)
                        } else {
                            ConstantId::Null(offset + *j as u64)
                        }
                    }
                })
                .collect();
            facts.push(Fact { relation: shape.relation.clone(), args });
        }
        Instance::from_facts(facts)
    }

    /// Connected iff the two facts share a constant (single facts are
    /// connected).
    pub fn is_connected(&self) -> bool {
        if self.facts.len() < 2 {
            return true;
        }
        if !self.correlation.is_empty() {
            return true;
        }
        let dbs = |s: &FactShape| -> BTreeSet<usize> {
            s.pattern
                .iter()
                .filter_map(|t| match t {
                    ShapeTerm::DbConst(k) => Some(*k),
                    _ => None,
                })
                .collect()
        };
        !dbs(&self.facts[0]).is_disjoint(&dbs(&self.facts[1]))
    }
}

impl fmt::Display for ClusterState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.facts.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join(" & "))?;
        if !self.correlation.is_empty() {
            write!(f, " [{:?}]", self.correlation)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Singleton databases
// ---------------------------------------------------------------------------

/// All singleton databases over the data schema, up to isomorphism: the
/// empty database, then one database per relation and equality pattern
/// of its positions.
pub fn singleton_databases(sigma_d: &BTreeMap<String, usize>) -> Vec<Database> {
    let mut out = vec![Database::default()];
    for (relation, &arity) in sigma_d {
        for rgs in restricted_growth_strings(arity) {
            let args: Vec<ConstantId> = rgs
                .iter()
                .map(|&b| ConstantId::named(format!("c{}", b + 1)))
                .collect();
            out.push(
                Database::from_facts([Fact { relation: relation.clone(), args }])
                    .expect("named constants"),
            );
        }
    }
    out
}

/// Set partitions of `0..n` as restricted growth strings.
fn restricted_growth_strings(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    fn rec(current: &mut Vec<usize>, pos: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for b in 0..=max_used + 1 {
            current[pos] = b;
            rec(current, pos + 1, max_used.max(b), out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    current[0] = 0;
    rec(&mut current, 1, 0, &mut out);
    if out.is_empty() {
        out.push(current);
    }
    out
}

// ---------------------------------------------------------------------------
// Pattern extraction from literal chase facts
// ---------------------------------------------------------------------------

fn db_constants(db: &Database) -> Vec<ConstantId> {
    db.adom().into_iter().collect()
}

fn fact_shape(fact: &Fact, db_consts: &[ConstantId]) -> FactShape {
    let mut classes: BTreeMap<ConstantId, usize> = BTreeMap::new();
    let pattern = fact
        .args
        .iter()
        .map(|c| {
            if let Some(pos) = db_consts.iter().position(|d| d == c) {
                ShapeTerm::DbConst(pos)
            } else {
                let next = classes.len();
                ShapeTerm::NullClass(*classes.entry(c.clone()).or_insert(next))
            }
        })
        .collect();
    FactShape { relation: fact.relation.clone(), pattern }
}

/// Canonical pattern of a concrete fact pair (unordered, all equalities
/// recorded in the correlation).
fn pair_pattern(f: &Fact, g: &Fact, db_consts: &[ConstantId]) -> ClusterState {
    let build = |a: &Fact, b: &Fact| -> ClusterState {
        let sa = fact_shape(a, db_consts);
        let sb = fact_shape(b, db_consts);
        // recover per-fact class -> constant maps
        let classes_of = |fact: &Fact| -> BTreeMap<usize, ConstantId> {
            let mut classes: BTreeMap<ConstantId, usize> = BTreeMap::new();
            let mut rev = BTreeMap::new();
            for c in &fact.args {
                if db_consts.contains(c) {
                    continue;
                }
                let next = classes.len();
                let id = *classes.entry(c.clone()).or_insert(next);
                rev.insert(id, c.clone());
            }
            rev
        };
        let ca = classes_of(a);
        let cb = classes_of(b);
        let mut correlation = Vec::new();
        for (ia, csta) in &ca {
            for (ib, cstb) in &cb {
                if csta == cstb {
                    correlation.push((*ia, *ib));
                }
            }
        }
        ClusterState { facts: vec![sa, sb], correlation }
    };
    let fg = build(f, g);
    let gf = build(g, f);
    std::cmp::min(fg, gf)
}

fn is_bad_cluster(
    cluster: &ClusterState,
    db: &Database,
    sigma_q: &Schema,
    max_candidates: usize,
) -> bool {
    if !cluster.facts.iter().all(|s| sigma_q.contains(&s.relation)) {
        return false;
    }
    if !cluster.is_connected() {
        return false;
    }
    let inst = cluster.instantiate(&db_constants(db));
    !matches!(
        find_hom(&inst, db.instance(), sigma_q, &BTreeMap::new(), true, max_candidates),
        Ok(Some(_))
    )
}

/// Scans a chase truncation for a connected bad cluster over the query
/// schema; returns the first witness in fact order.
fn scan_for_bad_cluster(
    result: &ChaseResult,
    db: &Database,
    sigma_q: &Schema,
    max_candidates: usize,
) -> Option<Instance> {
    let db_consts = db_constants(db);
    let facts: Vec<&Fact> = result
        .instance
        .facts
        .iter()
        .filter(|f| sigma_q.contains(&f.relation))
        .collect();
    let mut seen: BTreeSet<ClusterState> = BTreeSet::new();
    // single facts first
    for f in &facts {
        let cluster = ClusterState::single(fact_shape(f, &db_consts));
        if seen.insert(cluster.clone())
            && is_bad_cluster(&cluster, db, sigma_q, max_candidates)
        {
            return Some(Instance::from_facts([(*f).clone()]));
        }
    }
    // connected pairs: group facts by constant
    let mut by_const: BTreeMap<ConstantId, Vec<usize>> = BTreeMap::new();
    for (i, f) in facts.iter().enumerate() {
        for c in &f.args {
            by_const.entry(c.clone()).or_default().push(i);
        }
    }
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for bucket in by_const.values() {
        for (xi, &i) in bucket.iter().enumerate() {
            for &j in &bucket[xi + 1..] {
                if i != j {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    for (i, j) in pairs {
        let cluster = pair_pattern(facts[i], facts[j], &db_consts);
        if seen.insert(cluster.clone())
            && is_bad_cluster(&cluster, db, sigma_q, max_candidates)
        {
            return Some(Instance::from_facts([facts[i].clone(), facts[j].clone()]));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Bundle abstraction
// ---------------------------------------------------------------------------

// Bundles are encoded as instances: database constants as `$k` named
// constants, null classes as nulls. Canonical form renumbers classes by
// the least rendering over class permutations.

fn encode_db_fact(db: &Database) -> Option<Fact> {
    let consts = db_constants(db);
    db.instance().facts.iter().next().map(|f| Fact {
        relation: f.relation.clone(),
        args: f
            .args
            .iter()
            .map(|c| {
                let pos = consts.iter().position(|d| d == c).expect("db constant");
                ConstantId::Named(format!("${pos}"))
            })
            .collect(),
    })
}

type Bundle = Vec<Fact>;

fn bundle_classes(bundle: &Bundle) -> Vec<u64> {
    let mut out = BTreeSet::new();
    for f in bundle {
        for c in &f.args {
            if let ConstantId::Null(k) = c {
                out.insert(*k);
            }
        }
    }
    out.into_iter().collect()
}

const MAX_BUNDLE_CLASSES: usize = 8;

/// Least renaming of the bundle's classes (permutation-minimal render).
fn canonical_bundle(bundle: &Bundle) -> Option<Bundle> {
    let classes = bundle_classes(bundle);
    if classes.len() > MAX_BUNDLE_CLASSES {
        return None;
    }
    let mut best: Option<Bundle> = None;
    let mut perm: Vec<usize> = (0..classes.len()).collect();
    loop {
        let renaming: BTreeMap<u64, u64> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, perm[i] as u64))
            .collect();
        let mut candidate: Bundle = bundle
            .iter()
            .map(|f| Fact {
                relation: f.relation.clone(),
                args: f
                    .args
                    .iter()
                    .map(|c| match c {
                        ConstantId::Null(k) => ConstantId::Null(renaming[k]),
                        other => other.clone(),
                    })
                    .collect(),
            })
            .collect();
        candidate.sort();
        candidate.dedup();
        if best.as_ref().map_or(true, |b| candidate < *b) {
            best = Some(candidate);
        }
        if !next_perm(&mut perm) {
            break;
        }
    }
    best
}

fn next_perm(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Fires `rule` on member `trigger` of `bundle`, unless the head already
/// matches inside the bundle plus the database fact (a witness that is
/// provably present in the literal chase before the trigger is checked).
/// Returns the raw child bundle in the parent's constant space, with
/// fresh classes numbered from `fresh_from`.
fn fire_on(
    rule: &Tgd,
    trigger: &Fact,
    bundle: &Bundle,
    db_fact: &Option<Fact>,
    fresh_from: u64,
) -> Option<Bundle> {
    let body_atom = rule.body.iter().next()?;
    if body_atom.relation != trigger.relation {
        return None;
    }
    let mut binding: BTreeMap<Var, ConstantId> = BTreeMap::new();
    for (v, c) in body_atom.args.iter().zip(&trigger.args) {
        if let Some(prev) = binding.insert(v.clone(), c.clone()) {
            if prev != *c {
                return None;
            }
        }
    }
    // local restricted-chase check
    let mut context = Instance::from_facts(bundle.iter().cloned());
    if let Some(dbf) = db_fact {
        context.facts.insert(dbf.clone());
    }
    let index = FactIndex::new(&context);
    let pinned: BTreeMap<Var, ConstantId> = rule
        .frontier
        .iter()
        .filter_map(|v| binding.get(v).map(|c| (v.clone(), c.clone())))
        .collect();
    if match_atoms(&rule.head, &index, &pinned, 0)
        .expect("uncapped")
        .is_some()
    {
        return None;
    }
    let mut assignment = pinned;
    let mut fresh = fresh_from;
    for v in rule.existential_vars() {
        assignment.insert(v, ConstantId::Null(fresh));
        fresh += 1;
    }
    let mut child: Bundle = rule
        .head
        .iter()
        .map(|a| Fact {
            relation: a.relation.clone(),
            args: a.args.iter().map(|v| assignment[v].clone()).collect(),
        })
        .collect();
    child.sort();
    child.dedup();
    Some(child)
}

/// Empty-body rules fire exactly once, at round one, against the
/// database itself; the check is exact.
fn root_bundles(rules: &[Tgd], db: &Database, db_fact: &Option<Fact>) -> Vec<Bundle> {
    let mut out = Vec::new();
    if let Some(dbf) = db_fact {
        out.push(vec![dbf.clone()]);
    }
    let index = FactIndex::new(db.instance());
    for rule in rules {
        if !rule.body.is_empty() {
            continue;
        }
        if match_atoms(&rule.head, &index, &BTreeMap::new(), 0)
            .expect("uncapped")
            .is_some()
        {
            continue;
        }
        let mut assignment: BTreeMap<Var, ConstantId> = BTreeMap::new();
        let mut fresh = 0u64;
        for v in rule.existential_vars() {
            assignment.insert(v, ConstantId::Null(fresh));
            fresh += 1;
        }
        let mut bundle: Bundle = rule
            .head
            .iter()
            .map(|a| Fact {
                relation: a.relation.clone(),
                args: a.args.iter().map(|v| assignment[v].clone()).collect(),
            })
            .collect();
        bundle.sort();
        out.push(bundle);
    }
    out
}

/// All bundle shapes reachable in the abstraction.
fn reachable_bundles(
    rules: &[Tgd],
    db: &Database,
    max_states: usize,
) -> Result<BTreeSet<Bundle>, TrivialityError> {
    let db_fact = encode_db_fact(db);
    let mut reached: BTreeSet<Bundle> = BTreeSet::new();
    let mut queue: Vec<Bundle> = Vec::new();
    for root in root_bundles(rules, db, &db_fact) {
        let canon =
            canonical_bundle(&root).ok_or(TrivialityError::StateSpaceExceeded(max_states))?;
        if reached.insert(canon.clone()) {
            queue.push(canon);
        }
    }
    while let Some(bundle) = queue.pop() {
        let fresh_from = bundle_classes(&bundle).iter().max().map_or(0, |m| m + 1);
        for trigger in &bundle {
            for rule in rules {
                if let Some(child) = fire_on(rule, trigger, &bundle, &db_fact, fresh_from) {
                    let canon = canonical_bundle(&child)
                        .ok_or(TrivialityError::StateSpaceExceeded(max_states))?;
                    if reached.insert(canon.clone()) {
                        if max_states != 0 && reached.len() > max_states {
                            return Err(TrivialityError::StateSpaceExceeded(max_states));
                        }
                        queue.push(canon);
                    }
                }
            }
        }
    }
    Ok(reached)
}

// Pair states: two bundles plus the equalities between their classes.
// `same` marks the seed where both sides are the one creation event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct PairState {
    left: Bundle,
    right: Bundle,
    correlation: Vec<(u64, u64)>,
    same: bool,
}

fn canonical_pair(
    left: &Bundle,
    right: &Bundle,
    correlation: &[(u64, u64)],
    same: bool,
) -> Option<PairState> {
    let canonize_side = |side: &Bundle| -> Option<(Bundle, BTreeMap<u64, u64>)> {
        // recover the renaming that canonical_bundle applied
        let classes = bundle_classes(side);
        if classes.len() > MAX_BUNDLE_CLASSES {
            return None;
        }
        let mut best: Option<(Bundle, BTreeMap<u64, u64>)> = None;
        let mut perm: Vec<usize> = (0..classes.len()).collect();
        loop {
            let renaming: BTreeMap<u64, u64> = classes
                .iter()
                .enumerate()
                .map(|(i, c)| (*c, perm[i] as u64))
                .collect();
            let mut candidate: Bundle = side
                .iter()
                .map(|f| Fact {
                    relation: f.relation.clone(),
                    args: f
                        .args
                        .iter()
                        .map(|c| match c {
                            ConstantId::Null(k) => ConstantId::Null(renaming[k]),
                            other => other.clone(),
                        })
                        .collect(),
                })
                .collect();
            candidate.sort();
            candidate.dedup();
            if best.as_ref().map_or(true, |(b, _)| candidate < *b) {
                best = Some((candidate, renaming.clone()));
            }
            if !next_perm(&mut perm) {
                break;
            }
        }
        best
    };
    let (cl, rl) = canonize_side(left)?;
    let (cr, rr) = canonize_side(right)?;
    let corr: Vec<(u64, u64)> = {
        let mut v: Vec<(u64, u64)> = correlation
            .iter()
            .filter_map(|(a, b)| Some((*rl.get(a)?, *rr.get(b)?)))
            .collect();
        v.sort();
        v.dedup();
        v
    };
    let forward = PairState { left: cl.clone(), right: cr.clone(), correlation: corr.clone(), same };
    let swapped = PairState {
        left: cr,
        right: cl,
        correlation: corr.iter().map(|(a, b)| (*b, *a)).collect::<Vec<_>>(),
        same,
    };
    Some(std::cmp::min(forward, swapped))
}

/// Candidate clusters extractable from a pair state.
fn pair_candidates(state: &PairState) -> Vec<ClusterState> {
    let mut out = Vec::new();
    let corr: BTreeSet<(u64, u64)> = state.correlation.iter().cloned().collect();
    for (li, lf) in state.left.iter().enumerate() {
        for (ri, rf) in state.right.iter().enumerate() {
            if state.same && li >= ri {
                continue;
            }
            // express the pair as a cluster: per-fact classes normalized
            let to_shape = |f: &Fact| -> (FactShape, BTreeMap<usize, u64>) {
                let mut classes: BTreeMap<u64, usize> = BTreeMap::new();
                let mut rev: BTreeMap<usize, u64> = BTreeMap::new();
                let pattern = f
                    .args
                    .iter()
                    .map(|c| match c {
                        ConstantId::Named(name) => {
                            let k: usize =
                                name.trim_start_matches('$').parse().expect("$k");
                            ShapeTerm::DbConst(k)
                        }
                        ConstantId::Null(k) => {
                            let next = classes.len();
                            let id = *classes.entry(*k).or_insert(next);
                            rev.insert(id, *k);
                            ShapeTerm::NullClass(id)
                        }
                    })
                    .collect();
                (FactShape { relation: f.relation.clone(), pattern }, rev)
            };
            let (ls, lrev) = to_shape(lf);
            let (rs, rrev) = to_shape(rf);
            let mut correlation = Vec::new();
            for (lc, lglobal) in &lrev {
                for (rc, rglobal) in &rrev {
                    let related = if state.same {
                        lglobal == rglobal
                    } else {
                        corr.contains(&(*lglobal, *rglobal))
                    };
                    if related {
                        correlation.push((*lc, *rc));
                    }
                }
            }
            out.push(ClusterState { facts: vec![ls, rs], correlation });
        }
    }
    out
}

/// The fixpoint of reachable pair states, seeded with every reachable
/// bundle paired with itself.
fn reachable_pairs(
    rules: &[Tgd],
    db: &Database,
    bundles: &BTreeSet<Bundle>,
    max_states: usize,
) -> Result<BTreeSet<PairState>, TrivialityError> {
    let db_fact = encode_db_fact(db);
    let mut reached: BTreeSet<PairState> = BTreeSet::new();
    let mut queue: Vec<PairState> = Vec::new();
    for bundle in bundles {
        let id_corr: Vec<(u64, u64)> =
            bundle_classes(bundle).into_iter().map(|c| (c, c)).collect();
        let state = canonical_pair(bundle, bundle, &id_corr, true)
            .ok_or(TrivialityError::StateSpaceExceeded(max_states))?;
        if reached.insert(state.clone()) {
            queue.push(state);
        }
    }
    while let Some(state) = queue.pop() {
        // advance either side
        for flip in [false, true] {
            let (active, passive, corr): (&Bundle, &Bundle, Vec<(u64, u64)>) = if flip {
                (
                    &state.right,
                    &state.left,
                    state.correlation.iter().map(|(a, b)| (*b, *a)).collect(),
                )
            } else {
                (
                    &state.left,
                    &state.right,
                    state.correlation.clone(),
                )
            };
            // corr here maps active-class -> passive-class
            let corr_map: BTreeMap<u64, u64> = if state.same {
                bundle_classes(active).into_iter().map(|c| (c, c)).collect()
            } else {
                corr.iter().map(|(a, b)| (*a, *b)).collect()
            };
            let fresh_from = bundle_classes(active).iter().max().map_or(0, |m| m + 1);
            for trigger in active {
                for rule in rules {
                    if let Some(child) =
                        fire_on(rule, trigger, active, &db_fact, fresh_from)
                    {
                        // child classes inherited from the active side keep
                        // their correlation to the passive side
                        let child_classes = bundle_classes(&child);
                        let new_corr: Vec<(u64, u64)> = child_classes
                            .iter()
                            .filter_map(|c| corr_map.get(c).map(|p| (*p, *c)))
                            .collect();
                        let next = canonical_pair(passive, &child, &new_corr, false)
                            .ok_or(TrivialityError::StateSpaceExceeded(max_states))?;
                        if reached.insert(next.clone()) {
                            if max_states != 0 && reached.len() > max_states {
                                return Err(TrivialityError::StateSpaceExceeded(max_states));
                            }
                            queue.push(next);
                        }
                    }
                }
            }
            if state.same {
                // both directions coincide for the seed
                break;
            }
        }
    }
    Ok(reached)
}

/// All cluster patterns in the abstraction fixpoint (over-approximates
/// the literal chase's patterns).
fn fixpoint_clusters(
    rules: &[Tgd],
    db: &Database,
    max_states: usize,
) -> Result<BTreeSet<ClusterState>, TrivialityError> {
    let bundles = reachable_bundles(rules, db, max_states)?;
    let pairs = reachable_pairs(rules, db, &bundles, max_states)?;
    let mut out: BTreeSet<ClusterState> = BTreeSet::new();
    for bundle in &bundles {
        for fact in bundle {
            // single-fact patterns, normalized per fact
            let shape = {
                let mut classes: BTreeMap<u64, usize> = BTreeMap::new();
                let pattern = fact
                    .args
                    .iter()
                    .map(|c| match c {
                        ConstantId::Named(name) => ShapeTerm::DbConst(
                            name.trim_start_matches('$').parse().expect("$k"),
                        ),
                        ConstantId::Null(k) => {
                            let next = classes.len();
                            ShapeTerm::NullClass(*classes.entry(*k).or_insert(next))
                        }
                    })
                    .collect();
                FactShape { relation: fact.relation.clone(), pattern }
            };
            out.insert(ClusterState::single(shape));
        }
    }
    for state in &pairs {
        for cluster in pair_candidates(state) {
            // store both orders collapsed
            let mut alt = cluster.clone();
            alt.facts.reverse();
            alt.correlation = cluster.correlation.iter().map(|(a, b)| (*b, *a)).collect();
            out.insert(std::cmp::min(cluster, alt));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Does a connected instantiation of `cluster` occur in the restricted
/// chase of the singleton database `db`? Exact: `Ok(true)` is witnessed
/// inside a literal truncation, `Ok(false)` by saturation or by absence
/// from the over-approximating fixpoint; otherwise the state space or
/// confirmation budget was exceeded.
pub fn linear_entails_cluster(
    db: &Database,
    rules: &[Tgd],
    cluster: &ClusterState,
    budget: &Budget,
) -> Result<bool, TrivialityError> {
    if !all_linear(rules) {
        return Err(TrivialityError::NotLinear);
    }
    let db_consts = db_constants(db);
    let normalize = |c: &ClusterState| -> ClusterState {
        if c.facts.len() < 2 {
            return c.clone();
        }
        let mut alt = c.clone();
        alt.facts.reverse();
        alt.correlation = c.correlation.iter().map(|(a, b)| (*b, *a)).collect();
        std::cmp::min(c.clone(), alt)
    };
    let target = normalize(cluster);

    // literal search at increasing depth
    let result = chase(db.instance(), rules, budget);
    let found = {
        let facts: Vec<&Fact> = result.instance.facts.iter().collect();
        let mut found = false;
        if target.facts.len() == 1 {
            for f in &facts {
                if ClusterState::single(fact_shape(f, &db_consts)) == target {
                    found = true;
                    break;
                }
            }
        } else {
            'outer: for (i, f) in facts.iter().enumerate() {
                for g in &facts[i + 1..] {
                    if pair_pattern(f, g, &db_consts) == normalize(&pair_pattern(
                        f,
                        g,
                        &db_consts,
                    )) && normalize(&pair_pattern(f, g, &db_consts)) == target
                    {
                        found = true;
                        break 'outer;
                    }
                    if normalize(&pair_pattern(g, f, &db_consts)) == target {
                        found = true;
                        break 'outer;
                    }
                }
            }
        }
        found
    };
    if found {
        return Ok(true);
    }
    if result.saturated {
        return Ok(false);
    }
    // fixpoint absence is exact (over-approximation)
    let clusters = fixpoint_clusters(rules, db, budget.max_candidates)?;
    if !clusters.contains(&target) {
        return Ok(false);
    }
    Err(TrivialityError::StateSpaceExceeded(budget.max_candidates))
}

/// Per-database outcome of the triviality scan.
enum DbOutcome {
    Fine,
    Bad(Instance),
    Undecided,
}

fn check_database(
    db: &Database,
    rules: &[Tgd],
    sigma_q: &Schema,
    budget: &Budget,
) -> DbOutcome {
    let lit_budget = Budget {
        max_depth: budget.max_depth.max(8),
        ..*budget
    };
    let result = chase(db.instance(), rules, &lit_budget);
    if let Some(witness) = scan_for_bad_cluster(&result, db, sigma_q, budget.max_candidates)
    {
        return DbOutcome::Bad(witness);
    }
    if result.saturated {
        return DbOutcome::Fine;
    }
    match fixpoint_clusters(rules, db, budget.max_candidates) {
        Ok(clusters) => {
            let bad = clusters
                .iter()
                .find(|c| is_bad_cluster(c, db, sigma_q, budget.max_candidates));
            match bad {
                None => DbOutcome::Fine,
                Some(_) => {
                    // the abstraction reaches a bad pattern the truncation
                    // did not confirm: retry deeper, then give up
                    let deeper = Budget {
                        max_depth: lit_budget.max_depth * 2,
                        ..lit_budget
                    };
                    let result = chase(db.instance(), rules, &deeper);
                    match scan_for_bad_cluster(&result, db, sigma_q, budget.max_candidates)
                    {
                        Some(witness) => DbOutcome::Bad(witness),
                        None if result.saturated => DbOutcome::Fine,
                        None => DbOutcome::Undecided,
                    }
                }
            }
        }
        Err(_) => DbOutcome::Undecided,
    }
}

/// Decides Σ_D,Σ_Q-triviality of a linear rule set: HOLDS iff the chase
/// of every singleton data database maps back into it over the query
/// schema. FAILS certificates carry the singleton database and a literal
/// bad cluster; both re-verify with the chase and hom engines alone.
pub fn check_triviality(
    rules: &[Tgd],
    sigma_d: &BTreeMap<String, usize>,
    sigma_q: &Schema,
    budget: &Budget,
) -> Verdict {
    if !all_linear(rules) {
        return Verdict::unknown(budget_echo(&[("not_linear", 1)]));
    }
    let mut undecided = 0u64;
    let mut scanned = 0u64;
    for db in singleton_databases(sigma_d) {
        scanned += 1;
        match check_database(&db, rules, sigma_q, budget) {
            DbOutcome::Fine => {}
            DbOutcome::Bad(witness) => {
                return Verdict::fails(
                    Certificate::TrivialityWitness {
                        database: db.instance().facts.iter().map(|f| f.to_string()).collect(),
                        cluster: witness.facts.iter().map(|f| f.to_string()).collect(),
                    },
                    Basis::TruncatedWitness,
                );
            }
            DbOutcome::Undecided => undecided += 1,
        }
    }
    if undecided > 0 {
        let mut echo = budget.echo();
        echo.insert("undecided_databases".into(), undecided);
        return Verdict::unknown(echo);
    }
    Verdict::holds(
        Certificate::SearchSummary {
            summary: budget_echo(&[("singleton_databases", scanned)]),
        },
        Basis::StateSpaceFixpoint,
    )
}

/// Extends `rules` into a rule set whose {R}/{R}-triviality is the
/// negation of `db, rules |= exists x. goal(x)`: one rule recreates the
/// database out of nothing and one maps the goal to a two-edge chain
/// that cannot fold into a single R-fact.
pub fn build_hardness_instance(
    db: &Database,
    rules: &[Tgd],
    goal: &str,
) -> Result<(Vec<Tgd>, BTreeMap<String, usize>, Schema), TrivialityError> {
    let fresh = "R";
    let used: BTreeSet<&str> = rules
        .iter()
        .flat_map(|t| t.body.iter().chain(t.head.iter()))
        .map(|a| a.relation.as_str())
        .chain(db.instance().facts.iter().map(|f| f.relation.as_str()))
        .collect();
    if used.contains(fresh) {
        return Err(TrivialityError::SymbolClash(fresh.to_string()));
    }
    let mut out = rules.to_vec();
    if !db.instance().is_empty() {
        let (q_db, _, _) = instance_as_cq(db.instance(), &[]);
        out.push(Tgd::new([], q_db.atoms.clone()).expect("nonempty head"));
    }
    out.push(
        Tgd::new(
            [Atom::new(goal, &["u"])],
            [Atom::new(fresh, &["x", "y"]), Atom::new(fresh, &["y", "z"])],
        )
        .expect("well-formed"),
    );
    let mut sigma_d = BTreeMap::new();
    sigma_d.insert(fresh.to_string(), 2);
    let mut sigma_q = Schema::new();
    sigma_q.insert(fresh.to_string());
    Ok((out, sigma_d, sigma_q))
}

/// Brute-force oracle: certifies non-triviality when a bounded chase of
/// some singleton database exhibits a bad cluster, certifies triviality
/// when every such chase saturates and maps back; otherwise undecided.
pub fn brute_force_triviality(
    rules: &[Tgd],
    sigma_d: &BTreeMap<String, usize>,
    sigma_q: &Schema,
    depth: u32,
) -> Option<bool> {
    let budget = Budget { max_depth: depth, ..Budget::default() };
    let mut all_saturated_and_mapped = true;
    for db in singleton_databases(sigma_d) {
        let result = chase(db.instance(), rules, &budget);
        if scan_for_bad_cluster(&result, &db, sigma_q, 0).is_some() {
            return Some(false);
        }
        if !result.saturated {
            all_saturated_and_mapped = false;
            continue;
        }
        let mapped = matches!(
            find_hom(
                &result.instance,
                db.instance(),
                sigma_q,
                &BTreeMap::new(),
                true,
                0
            ),
            Ok(Some(_))
        );
        if !mapped {
            return Some(false);
        }
    }
    all_saturated_and_mapped.then_some(true)
}

/// Re-verifies a FAILS certificate with the raw engines: the cluster has
/// at most two facts, is connected, admits no hom into the database, and
/// occurs in the bounded chase.
pub fn verify_triviality_witness(
    rules: &[Tgd],
    db: &Database,
    cluster: &Instance,
    sigma_q: &Schema,
    budget: &Budget,
) -> bool {
    if cluster.len() == 0 || cluster.len() > 2 {
        return false;
    }
    if cluster.connected_components(&cluster.relations()).len() != 1 {
        return false;
    }
    if !cluster.facts.iter().all(|f| sigma_q.contains(&f.relation)) {
        return false;
    }
    let no_hom = matches!(
        find_hom(cluster, db.instance(), sigma_q, &BTreeMap::new(), true, 0),
        Ok(None)
    );
    if !no_hom {
        return false;
    }
    // entailment: the cluster as a Boolean CQ with database constants
    // pinned must match the bounded chase
    let named: Vec<ConstantId> =
        cluster.adom().into_iter().filter(|c| c.is_named()).collect();
    let (q, tuple, _) = instance_as_cq(cluster, &named);
    let verdict = crate::hom::cq_entailed(db, rules, &q, &tuple, budget);
    verdict.is_holds()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::schema;

    fn named(s: &str) -> ConstantId {
        ConstantId::named(s)
    }

    fn backward_rule() -> Tgd {
        // R(x,y) -> exists z. R(y,z)
        Tgd::new(
            [Atom::new("R", &["x", "y"])],
            [Atom::new("R", &["y", "z"])],
        )
        .unwrap()
    }

    fn forward_rule() -> Tgd {
        Tgd::new(
            [Atom::new("R", &["x", "y"])],
            [Atom::new("R", &["x", "z"])],
        )
        .unwrap()
    }

    fn sigma_r() -> BTreeMap<String, usize> {
        BTreeMap::from([("R".to_string(), 2)])
    }

    #[test]
    fn singleton_enumeration() {
        let dbs = singleton_databases(&sigma_r());
        // empty, R(c1,c2), R(c1,c1)
        assert_eq!(dbs.len(), 3);
        assert!(dbs[0].instance().is_empty());
        let unary = singleton_databases(&BTreeMap::from([("A".to_string(), 1)]));
        assert_eq!(unary.len(), 2);
        let empty = singleton_databases(&BTreeMap::new());
        assert_eq!(empty.len(), 1);
        // Bell numbers: arity 3 gives 5 partitions
        let ternary = singleton_databases(&BTreeMap::from([("T".to_string(), 3)]));
        assert_eq!(ternary.len(), 6);
    }

    #[test]
    fn entails_cluster_examples() {
        let budget = Budget::with_depth(8);
        // D = {R(c1,c2)}: one step produces R(c2, null)
        let db = Database::from_facts([Fact::new("R", vec![named("c1"), named("c2")])])
            .unwrap();
        let cluster = ClusterState::single(FactShape {
            relation: "R".into(),
            pattern: vec![ShapeTerm::DbConst(1), ShapeTerm::NullClass(0)],
        });
        assert_eq!(
            linear_entails_cluster(&db, &[backward_rule()], &cluster, &budget).unwrap(),
            true
        );

        // D = {R(c1,c1)}: the restricted chase fires nothing
        let db_reflexive =
            Database::from_facts([Fact::new("R", vec![named("c1"), named("c1")])]).unwrap();
        let cluster = ClusterState::single(FactShape {
            relation: "R".into(),
            pattern: vec![ShapeTerm::DbConst(0), ShapeTerm::NullClass(0)],
        });
        assert_eq!(
            linear_entails_cluster(&db_reflexive, &[backward_rule()], &cluster, &budget)
                .unwrap(),
            false
        );

        // any cluster inside the database itself
        let db_cluster = ClusterState::single(FactShape {
            relation: "R".into(),
            pattern: vec![ShapeTerm::DbConst(0), ShapeTerm::DbConst(1)],
        });
        assert_eq!(
            linear_entails_cluster(&db, &[backward_rule()], &db_cluster, &budget).unwrap(),
            true
        );
    }

    #[test]
    fn entails_cluster_fixpoint_false_on_infinite_chase() {
        // backward rule never saturates on R(c1,c2), yet the pattern
        // R(c1, null) never occurs
        let budget = Budget::with_depth(6);
        let db = Database::from_facts([Fact::new("R", vec![named("c1"), named("c2")])])
            .unwrap();
        let cluster = ClusterState::single(FactShape {
            relation: "R".into(),
            pattern: vec![ShapeTerm::DbConst(0), ShapeTerm::NullClass(0)],
        });
        assert_eq!(
            linear_entails_cluster(&db, &[backward_rule()], &cluster, &budget).unwrap(),
            false
        );
    }

    #[test]
    fn triviality_examples() {
        let budget = Budget::with_depth(8);
        // backward rule: non-trivial, witness D = {R(c1,c2)}, C = {R(c2,n)}
        let v = check_triviality(&[backward_rule()], &sigma_r(), &schema(&["R"]), &budget);
        assert!(v.is_fails());
        if let Some(Certificate::TrivialityWitness { database, cluster }) = &v.certificate {
            assert_eq!(database, &vec!["R(c1,c2)".to_string()]);
            assert_eq!(cluster.len(), 1);
        } else {
            panic!("expected witness");
        }

        // forward rule: every singleton chase saturates immediately
        let v = check_triviality(&[forward_rule()], &sigma_r(), &schema(&["R"]), &budget);
        assert!(v.is_holds());

        // the empty rule set is trivial
        let v = check_triviality(&[], &sigma_r(), &schema(&["R"]), &budget);
        assert!(v.is_holds());
    }

    #[test]
    fn triviality_holds_on_nonterminating_chase() {
        // A(x) -> exists y. B(x,y); B(x,y) -> exists z. B(y,z)
        // with query schema {A}: the chase never saturates but never
        // produces a bad A-cluster
        let rules = vec![
            Tgd::new([Atom::new("A", &["x"])], [Atom::new("B", &["x", "y"])]).unwrap(),
            Tgd::new(
                [Atom::new("B", &["x", "y"])],
                [Atom::new("B", &["y", "z"])],
            )
            .unwrap(),
        ];
        let sigma_d = BTreeMap::from([("A".to_string(), 1)]);
        let v = check_triviality(&rules, &sigma_d, &schema(&["A"]), &Budget::with_depth(6));
        assert!(v.is_holds(), "{v:?}");
    }

    #[test]
    fn empty_body_rule_witnessed_by_empty_database() {
        // -> exists x,y. R(x,y) is non-trivial over any data schema via
        // the empty database
        let rule = Tgd::new([], [Atom::new("R", &["x", "y"])]).unwrap();
        let v = check_triviality(&[rule], &sigma_r(), &schema(&["R"]), &Budget::with_depth(8));
        assert!(v.is_fails());
        if let Some(Certificate::TrivialityWitness { database, .. }) = &v.certificate {
            assert!(database.is_empty());
        } else {
            panic!("expected witness");
        }
    }

    #[test]
    fn hardness_instance_examples() {
        let budget = Budget::with_depth(8);
        // D = {A(c)}, T = {}: goal entailed, so T' is non-trivial
        let db = Database::from_facts([Fact::new("A", vec![named("c")])]).unwrap();
        let (t_prime, sigma_d, sigma_q) = build_hardness_instance(&db, &[], "A").unwrap();
        let v = check_triviality(&t_prime, &sigma_d, &sigma_q, &budget);
        assert!(v.is_fails());

        // D = {B(c)}: goal never derived, T' trivial
        let db = Database::from_facts([Fact::new("B", vec![named("c")])]).unwrap();
        let (t_prime, sigma_d, sigma_q) = build_hardness_instance(&db, &[], "A").unwrap();
        let v = check_triviality(&t_prime, &sigma_d, &sigma_q, &budget);
        assert!(v.is_holds(), "{v:?}");

        // empty database: trivial
        let (t_prime, sigma_d, sigma_q) =
            build_hardness_instance(&Database::default(), &[], "A").unwrap();
        let v = check_triviality(&t_prime, &sigma_d, &sigma_q, &budget);
        assert!(v.is_holds());
    }

    #[test]
    fn hardness_symbol_clash() {
        let db = Database::from_facts([Fact::new("R", vec![named("a"), named("b")])])
            .unwrap();
        assert!(matches!(
            build_hardness_instance(&db, &[], "A"),
            Err(TrivialityError::SymbolClash(_))
        ));
    }

    #[test]
    fn fixpoint_is_stable() {
        let db = Database::from_facts([Fact::new("R", vec![named("c1"), named("c2")])])
            .unwrap();
        let rules = [backward_rule()];
        let b1 = reachable_bundles(&rules, &db, 10_000).unwrap();
        // rerunning from scratch adds nothing
        let b2 = reachable_bundles(&rules, &db, 10_000).unwrap();
        assert_eq!(b1, b2);
        let c1 = fixpoint_clusters(&rules, &db, 10_000).unwrap();
        let c2 = fixpoint_clusters(&rules, &db, 10_000).unwrap();
        assert_eq!(c1, c2);
        assert!(!c1.is_empty());
    }

    #[test]
    fn witness_reverification() {
        let budget = Budget::with_depth(8);
        let v = check_triviality(&[backward_rule()], &sigma_r(), &schema(&["R"]), &budget);
        let (db_facts, cluster_facts) = match &v.certificate {
            Some(Certificate::TrivialityWitness { database, cluster }) => {
                (database.clone(), cluster.clone())
            }
            _ => panic!("expected witness"),
        };
        let db = Database::from_facts(
            db_facts
                .iter()
                .map(|s| crate::textio::parse_certificate_fact(s).unwrap()),
        )
        .unwrap();
        let cluster = Instance::from_facts(
            cluster_facts
                .iter()
                .map(|s| crate::textio::parse_certificate_fact(s).unwrap()),
        );
        assert!(verify_triviality_witness(
            &[backward_rule()],
            &db,
            &cluster,
            &schema(&["R"]),
            &budget
        ));
    }
}
