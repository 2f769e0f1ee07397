//! Relational vocabulary: constants, facts, instances, conjunctive queries
//! and tuple-generating dependencies, plus their structural predicates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed rule: {0}")]
    MalformedRule(String),
    #[error("enumeration budget exceeded ({0} candidates)")]
    BudgetExceeded(usize),
    #[error("constant `{0}` not found in instance")]
    ConstantNotFound(String),
}

/// A constant. Named constants and nulls live in disjoint identifier
/// spaces; nulls are only ever minted by the chase engine.
///
/// The derived order (named before nulls, then by name / index) is the
/// total order used by every deterministic enumeration in this crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstantId {
    Named(String),
    Null(u64),
}

impl ConstantId {
    pub fn named(name: impl Into<String>) -> Self {
        ConstantId::Named(name.into())
    }

    pub fn is_named(&self) -> bool {
        matches!(self, ConstantId::Named(_))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, ConstantId::Null(_))
    }
}

impl fmt::Display for ConstantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstantId::Named(name) => write!(f, "{name}"),
            ConstantId::Null(k) => write!(f, "n{k}"),
        }
    }
}

/// A relation symbol with its arity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationSymbol {
    pub name: String,
    pub arity: usize,
}

impl RelationSymbol {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        RelationSymbol { name: name.into(), arity }
    }
}

/// A set of relation names. Arities are tracked separately (textio infers
/// and checks them globally); restriction and connectivity only need names.
pub type Schema = BTreeSet<String>;

pub fn schema(names: &[&str]) -> Schema {
    names.iter().map(|s| s.to_string()).collect()
}

/// A ground relational atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub relation: String,
    pub args: Vec<ConstantId>,
}

impl Fact {
    pub fn new(relation: impl Into<String>, args: Vec<ConstantId>) -> Self {
        Fact { relation: relation.into(), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// A set of facts. Immutable by convention: operations return new instances.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Instance {
    pub facts: BTreeSet<Fact>,
}

impl Instance {
    pub fn new() -> Self {
        Instance::default()
    }

    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Self {
        Instance { facts: facts.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    /// Active domain: the set of constants occurring in some fact.
    pub fn adom(&self) -> BTreeSet<ConstantId> {
        let mut dom = BTreeSet::new();
        for fact in &self.facts {
            dom.extend(fact.args.iter().cloned());
        }
        dom
    }

    /// Relation names used by this instance.
    pub fn relations(&self) -> Schema {
        self.facts.iter().map(|f| f.relation.clone()).collect()
    }

    pub fn union(&self, other: &Instance) -> Instance {
        let mut facts = self.facts.clone();
        facts.extend(other.facts.iter().cloned());
        Instance { facts }
    }

    /// The restriction of the instance to the relation symbols in `sigma`.
    pub fn restrict(&self, sigma: &Schema) -> Instance {
        Instance {
            facts: self
                .facts
                .iter()
                .filter(|f| sigma.contains(&f.relation))
                .cloned()
                .collect(),
        }
    }

    /// Restriction to the facts whose constants all lie in `domain`.
    pub fn restrict_to_constants(&self, domain: &BTreeSet<ConstantId>) -> Instance {
        Instance {
            facts: self
                .facts
                .iter()
                .filter(|f| f.args.iter().all(|a| domain.contains(a)))
                .cloned()
                .collect(),
        }
    }

    /// Maximal Σ-connected components of `self|_sigma`, keyed and ordered
    /// by their least constant. Constants that occur in no Σ-fact belong
    /// to no component.
    pub fn connected_components(&self, sigma: &Schema) -> Vec<Instance> {
        let restricted = self.restrict(sigma);
        let mut parent: BTreeMap<ConstantId, ConstantId> = BTreeMap::new();

        fn find(parent: &mut BTreeMap<ConstantId, ConstantId>, c: &ConstantId) -> ConstantId {
            let p = parent.get(c).cloned().unwrap_or_else(|| c.clone());
            if &p == c {
                return p;
            }
            let root = find(parent, &p);
            parent.insert(c.clone(), root.clone());
            root
        }

        for fact in &restricted.facts {
            if let Some(first) = fact.args.first() {
                let mut root = find(&mut parent, first);
                for arg in &fact.args[1..] {
                    let r2 = find(&mut parent, arg);
                    if r2 != root {
                        // union by constant order keeps roots deterministic
                        if r2 < root {
                            parent.insert(root.clone(), r2.clone());
                            root = r2;
                        } else {
                            parent.insert(r2, root.clone());
                        }
                    }
                }
            }
        }

        let mut groups: BTreeMap<ConstantId, BTreeSet<Fact>> = BTreeMap::new();
        for fact in restricted.facts {
            let root = find(&mut parent, fact.args.first().expect("arity >= 1"));
            groups.entry(root).or_default().insert(fact);
        }
        groups.into_values().map(|facts| Instance { facts }).collect()
    }

    /// True if the Σ-Gaifman graph of `self|_sigma` is connected
    /// (an empty restriction counts as connected).
    pub fn is_connected(&self, sigma: &Schema) -> bool {
        self.connected_components(sigma).len() <= 1
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in &self.facts {
            writeln!(f, "{fact}.")?;
        }
        Ok(())
    }
}

/// An induced subinstance together with the constant subset that induced
/// it (the instance alone loses isolated constants).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedSubinstance {
    pub domain: BTreeSet<ConstantId>,
    pub instance: Instance,
}

/// Enumerates every restriction of `instance` to a nonempty constant
/// subset of size at most `n`, deterministically in subset order.
/// Fails with `BudgetExceeded` once more than `cap` subsets were produced
/// (`cap = 0` means unbounded).
pub fn induced_subinstances(
    instance: &Instance,
    n: usize,
    cap: usize,
) -> Result<Vec<InducedSubinstance>, ModelError> {
    let adom: Vec<ConstantId> = instance.adom().into_iter().collect();
    let mut out = Vec::new();
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
    while let Some((start, chosen)) = stack.pop() {
        for i in (start..adom.len()).rev() {
            let mut next = chosen.clone();
            next.push(i);
            let domain: BTreeSet<ConstantId> =
                next.iter().map(|&j| adom[j].clone()).collect();
            out.push(InducedSubinstance {
                instance: instance.restrict_to_constants(&domain),
                domain,
            });
            if cap != 0 && out.len() > cap {
                return Err(ModelError::BudgetExceeded(cap));
            }
            if next.len() < n {
                stack.push((i + 1, next));
            }
        }
    }
    out.sort_by(|a, b| a.domain.cmp(&b.domain));
    Ok(out)
}

/// A database: a finite instance over named constants only.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Database(pub Instance);

impl Database {
    pub fn new(instance: Instance) -> Result<Self, ModelError> {
        for fact in &instance.facts {
            for arg in &fact.args {
                if arg.is_null() {
                    return Err(ModelError::MalformedRule(format!(
                        "database fact {fact} contains a null"
                    )));
                }
            }
        }
        Ok(Database(instance))
    }

    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Result<Self, ModelError> {
        Database::new(Instance::from_facts(facts))
    }

    pub fn instance(&self) -> &Instance {
        &self.0
    }

    pub fn adom(&self) -> BTreeSet<ConstantId> {
        self.0.adom()
    }
}

/// Variables are plain identifiers.
pub type Var = String;

/// A relational atom over variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Var>,
}

impl Atom {
    pub fn new(relation: impl Into<String>, args: &[&str]) -> Self {
        Atom {
            relation: relation.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.relation, self.args.join(","))
    }
}

/// The relation name of the distinguished `true(x)` pseudo-atom. It is
/// satisfied by every constant, may label instance-tree bags, and is
/// rejected by the rule/database parsers.
pub const TRUE_RELATION: &str = "true";

/// A conjunctive query. The empty-atom unary CQ is the distinguished
/// `true(x)`; the empty-atom Boolean CQ is logical truth.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cq {
    pub answer_vars: Vec<Var>,
    pub atoms: BTreeSet<Atom>,
}

impl Cq {
    pub fn new(answer_vars: &[&str], atoms: impl IntoIterator<Item = Atom>) -> Self {
        Cq {
            answer_vars: answer_vars.iter().map(|s| s.to_string()).collect(),
            atoms: atoms.into_iter().collect(),
        }
    }

    /// The distinguished `true(x)` query.
    pub fn truth() -> Self {
        Cq { answer_vars: vec!["x".to_string()], atoms: BTreeSet::new() }
    }

    pub fn arity(&self) -> usize {
        self.answer_vars.len()
    }

    pub fn is_boolean(&self) -> bool {
        self.answer_vars.is_empty()
    }

    /// All variables, answer variables first, then by first occurrence in
    /// atom order.
    pub fn vars(&self) -> Vec<Var> {
        let mut seen: BTreeSet<&Var> = BTreeSet::new();
        let mut out = Vec::new();
        for v in &self.answer_vars {
            if seen.insert(v) {
                out.push(v.clone());
            }
        }
        for atom in &self.atoms {
            for v in &atom.args {
                if seen.insert(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    /// Every answer variable must occur in some atom, except in the
    /// distinguished `true(x)` shape (no atoms at all).
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.atoms.is_empty() {
            return Ok(());
        }
        let bound: BTreeSet<&Var> =
            self.atoms.iter().flat_map(|a| a.args.iter()).collect();
        for v in &self.answer_vars {
            if !bound.contains(v) {
                return Err(ModelError::MalformedRule(format!(
                    "answer variable `{v}` occurs in no atom"
                )));
            }
        }
        Ok(())
    }

    /// The canonical database: one null per variable, atoms become facts.
    /// Returns the instance and the variable-to-constant assignment.
    pub fn canonical_database(&self) -> (Instance, BTreeMap<Var, ConstantId>) {
        let mut assignment = BTreeMap::new();
        for (i, v) in self.vars().iter().enumerate() {
            assignment.insert(v.clone(), ConstantId::Null(i as u64));
        }
        let facts = self
            .atoms
            .iter()
            .map(|a| Fact {
                relation: a.relation.clone(),
                args: a.args.iter().map(|v| assignment[v].clone()).collect(),
            })
            .collect();
        (Instance { facts }, assignment)
    }

    /// Canonical form up to variable renaming: the lexicographically least
    /// rendering over all bijective renamings onto v0,v1,...
    ///
    /// Exponential in the variable count; callers cap generation well below
    /// the point where this matters.
    pub fn canonicalize(&self) -> Cq {
        let vars = self.vars();
        let k = vars.len();
        if k == 0 {
            return self.clone();
        }
        let mut best: Option<Cq> = None;
        let mut perm: Vec<usize> = (0..k).collect();
        loop {
            let renaming: BTreeMap<&Var, Var> = vars
                .iter()
                .enumerate()
                .map(|(i, v)| (v, format!("v{}", perm[i])))
                .collect();
            let candidate = Cq {
                answer_vars: self.answer_vars.iter().map(|v| renaming[v].clone()).collect(),
                atoms: self
                    .atoms
                    .iter()
                    .map(|a| Atom {
                        relation: a.relation.clone(),
                        args: a.args.iter().map(|v| renaming[v].clone()).collect(),
                    })
                    .collect(),
            };
            if best.as_ref().map_or(true, |b| candidate < *b) {
                best = Some(candidate);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        best.expect("at least one renaming")
    }

    /// Σ-connectivity of the canonical database, with `true` atoms ignored.
    pub fn is_connected(&self, sigma: &Schema) -> bool {
        let (db, _) = self.canonical_database();
        db.is_connected(sigma)
    }
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q({})", self.answer_vars.join(","))?;
        write!(f, " :- ")?;
        if self.atoms.is_empty() {
            write!(f, "true")?;
        } else {
            let rendered: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
            write!(f, "{}", rendered.join(", "))?;
        }
        Ok(())
    }
}

fn next_permutation(perm: &mut [usize]) -> bool {
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

/// View an instance as a CQ: constants become variables, the constants in
/// `answered` (in order) become the answer tuple. Returns the query, the
/// answer tuple, and the constant-to-variable map.
pub fn instance_as_cq(
    instance: &Instance,
    answered: &[ConstantId],
) -> (Cq, Vec<ConstantId>, BTreeMap<ConstantId, Var>) {
    let mut names: BTreeMap<ConstantId, Var> = BTreeMap::new();
    let mut fresh = 0usize;
    for c in answered.iter().cloned().chain(instance.adom()) {
        names.entry(c).or_insert_with(|| {
            let v = format!("u{fresh}");
            fresh += 1;
            v
        });
    }
    let atoms: BTreeSet<Atom> = instance
        .facts
        .iter()
        .filter(|f| f.relation != TRUE_RELATION)
        .map(|f| Atom {
            relation: f.relation.clone(),
            args: f.args.iter().map(|c| names[c].clone()).collect(),
        })
        .collect();
    let q = Cq {
        answer_vars: answered.iter().map(|c| names[c].clone()).collect(),
        atoms,
    };
    (q, answered.to_vec(), names)
}

/// Classification flags of a TGD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct TgdFlags {
    pub linear: bool,
    pub guarded: bool,
    pub frontier_one: bool,
}

/// A tuple-generating dependency `body -> exists z. head`. The frontier is
/// the set of variables shared by body and head, kept in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Tgd {
    pub body: BTreeSet<Atom>,
    pub head: BTreeSet<Atom>,
    pub frontier: Vec<Var>,
}

impl Tgd {
    pub fn new(
        body: impl IntoIterator<Item = Atom>,
        head: impl IntoIterator<Item = Atom>,
    ) -> Result<Self, ModelError> {
        let body: BTreeSet<Atom> = body.into_iter().collect();
        let head: BTreeSet<Atom> = head.into_iter().collect();
        if head.is_empty() {
            return Err(ModelError::MalformedRule("rule head is empty".into()));
        }
        let body_vars: BTreeSet<&Var> = body.iter().flat_map(|a| a.args.iter()).collect();
        let head_vars: BTreeSet<&Var> = head.iter().flat_map(|a| a.args.iter()).collect();
        let frontier = body_vars
            .intersection(&head_vars)
            .map(|v| (*v).clone())
            .collect();
        Ok(Tgd { body, head, frontier })
    }

    pub fn body_vars(&self) -> BTreeSet<Var> {
        self.body.iter().flat_map(|a| a.args.iter().cloned()).collect()
    }

    pub fn head_vars(&self) -> BTreeSet<Var> {
        self.head.iter().flat_map(|a| a.args.iter().cloned()).collect()
    }

    pub fn existential_vars(&self) -> BTreeSet<Var> {
        let frontier: BTreeSet<&Var> = self.frontier.iter().collect();
        self.head_vars().into_iter().filter(|v| !frontier.contains(v)).collect()
    }

    /// Body width: number of distinct body variables.
    pub fn body_width(&self) -> usize {
        self.body_vars().len()
    }

    /// Head width: number of distinct head variables.
    pub fn head_width(&self) -> usize {
        self.head_vars().len()
    }

    pub fn body_as_cq(&self) -> Cq {
        Cq { answer_vars: self.frontier.clone(), atoms: self.body.clone() }
    }

    pub fn head_as_cq(&self) -> Cq {
        Cq { answer_vars: self.frontier.clone(), atoms: self.head.clone() }
    }

    /// Checks that every declared frontier variable occurs in both body
    /// and head (can only fail on hand-assembled rules).
    pub fn validate(&self) -> Result<(), ModelError> {
        let body_vars = self.body_vars();
        let head_vars = self.head_vars();
        for v in &self.frontier {
            if !body_vars.contains(v) || !head_vars.contains(v) {
                return Err(ModelError::MalformedRule(format!(
                    "frontier variable `{v}` is absent from body or head"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Tgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.body.iter().map(|a| a.to_string()).collect();
        let head: Vec<String> = self.head.iter().map(|a| a.to_string()).collect();
        if !body.is_empty() {
            write!(f, "{} ", body.join(", "))?;
        }
        write!(f, "-> ")?;
        let existentials: Vec<String> = self.existential_vars().into_iter().collect();
        if !existentials.is_empty() {
            write!(f, "exists {}. ", existentials.join(","))?;
        }
        write!(f, "{}", head.join(", "))
    }
}

/// Computes the classification flags of a rule.
pub fn classify(tgd: &Tgd) -> Result<TgdFlags, ModelError> {
    tgd.validate()?;
    let linear = tgd.body.len() <= 1;
    let body_vars = tgd.body_vars();
    let guarded = tgd.body.is_empty()
        || tgd.body.iter().any(|atom| {
            let atom_vars: BTreeSet<Var> = atom.args.iter().cloned().collect();
            body_vars.iter().all(|v| atom_vars.contains(v))
        });
    Ok(TgdFlags { linear, guarded, frontier_one: tgd.frontier.len() == 1 })
}

pub fn all_frontier_one(rules: &[Tgd]) -> bool {
    rules.iter().all(|t| t.frontier.len() == 1)
}

pub fn all_linear(rules: &[Tgd]) -> bool {
    rules.iter().all(|t| t.body.len() <= 1)
}

/// Maximum body width over a rule set (0 for the empty set).
pub fn body_width(rules: &[Tgd]) -> usize {
    rules.iter().map(|t| t.body_width()).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(name: &str) -> ConstantId {
        ConstantId::named(name)
    }

    fn fact(rel: &str, args: &[&str]) -> Fact {
        Fact::new(rel, args.iter().map(|a| c(a)).collect())
    }

    #[test]
    fn classify_example_rule() {
        // A(x) -> exists y. S(x,y), B(y)
        let t = Tgd::new(
            [Atom::new("A", &["x"])],
            [Atom::new("S", &["x", "y"]), Atom::new("B", &["y"])],
        )
        .unwrap();
        let flags = classify(&t).unwrap();
        assert!(flags.linear && flags.guarded && flags.frontier_one);
        assert_eq!(t.frontier, vec!["x".to_string()]);
    }

    #[test]
    fn classify_empty_body() {
        let t = Tgd::new([], [Atom::new("P", &["x"])]).unwrap();
        let flags = classify(&t).unwrap();
        assert!(flags.linear);
        assert!(flags.guarded);
        assert!(!flags.frontier_one);
    }

    #[test]
    fn classify_unguarded() {
        // R(x,y), S(y,z) -> exists w. T(x,w): no body atom covers {x,y,z}
        let t = Tgd::new(
            [Atom::new("R", &["x", "y"]), Atom::new("S", &["y", "z"])],
            [Atom::new("T", &["x", "w"])],
        )
        .unwrap();
        let flags = classify(&t).unwrap();
        assert!(!flags.linear);
        assert!(!flags.guarded);
    }

    #[test]
    fn restrict_basics() {
        let i = Instance::from_facts([fact("A", &["c"]), fact("R", &["c", "d"])]);
        let r = i.restrict(&schema(&["R"]));
        assert_eq!(r.facts, Instance::from_facts([fact("R", &["c", "d"])]).facts);
        assert!(i.restrict(&schema(&[])).is_empty());
        // idempotent
        assert_eq!(r.restrict(&schema(&["R"])), r);
    }

    #[test]
    fn connected_components_basics() {
        let two = Instance::from_facts([fact("R", &["a", "b"]), fact("R", &["c", "d"])]);
        assert_eq!(two.connected_components(&schema(&["R"])).len(), 2);

        let one = Instance::from_facts([fact("R", &["a", "b"]), fact("S", &["b", "c"])]);
        assert_eq!(one.connected_components(&schema(&["R", "S"])).len(), 1);

        // union of components equals the restriction
        let comps = two.connected_components(&schema(&["R"]));
        let mut union = Instance::new();
        for comp in &comps {
            union = union.union(comp);
        }
        assert_eq!(union, two.restrict(&schema(&["R"])));
    }

    #[test]
    fn induced_subinstances_counts() {
        let i = Instance::from_facts([fact("R", &["a", "b"])]);
        let subs = induced_subinstances(&i, 1, 0).unwrap();
        assert_eq!(subs.len(), 2);
        assert!(subs.iter().all(|s| s.instance.is_empty()));

        let subs2 = induced_subinstances(&i, 2, 0).unwrap();
        assert!(subs2.iter().any(|s| s.instance.len() == 1));

        // 3-clique over R: C(3,2) + C(3,1) = 6 nonempty-domain subinstances
        let clique = Instance::from_facts([
            fact("R", &["a", "b"]),
            fact("R", &["b", "c"]),
            fact("R", &["a", "c"]),
            fact("R", &["b", "a"]),
            fact("R", &["c", "b"]),
            fact("R", &["c", "a"]),
        ]);
        let subs3 = induced_subinstances(&clique, 2, 0).unwrap();
        assert_eq!(subs3.len(), 6);
    }

    #[test]
    fn induced_subinstances_budget() {
        let i = Instance::from_facts([fact("R", &["a", "b"]), fact("R", &["b", "c"])]);
        assert!(matches!(
            induced_subinstances(&i, 3, 2),
            Err(ModelError::BudgetExceeded(2))
        ));
    }

    #[test]
    fn canonical_database_round_trip() {
        let q = Cq::new(
            &["x"],
            [Atom::new("R", &["x", "y"]), Atom::new("S", &["y", "z"])],
        );
        let (db, assignment) = q.canonical_database();
        assert_eq!(db.adom().len(), q.vars().len());
        // view back as a CQ, answer var at x's constant
        let (q2, _, _) = instance_as_cq(&db, &[assignment["x"].clone()]);
        assert_eq!(q.canonicalize(), q2.canonicalize());
    }

    #[test]
    fn linear_implies_guarded_on_samples() {
        let rules = [
            Tgd::new([Atom::new("R", &["x", "y"])], [Atom::new("R", &["y", "x"])]).unwrap(),
            Tgd::new([], [Atom::new("P", &["x"])]).unwrap(),
            Tgd::new(
                [Atom::new("M", &["p", "q", "r"])],
                [Atom::new("M", &["q", "r", "s"])],
            )
            .unwrap(),
        ];
        for t in &rules {
            let flags = classify(t).unwrap();
            assert!(!flags.linear || flags.guarded);
        }
    }
}
