//! Conway functions, River gadget databases, the myth rule set and its
//! eventually-periodic chase chain, generated linear rule families
//! (recursive + projection layers), the guarded variant with its witness
//! database builder, and the combinatorial correctness oracles.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::chase::{chase, ChaseResult};
use crate::hom::{ChainAtom, ChainSegment, ChainSpec, ChainTerm};
use crate::model::{Atom, ConstantId, Database, Fact, Instance, Schema, Tgd};
use crate::verdict::{Basis, Budget, Certificate, Verdict};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConwayError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("river not generable by the recursive rules: {0}")]
    NotGenerable(String),
}

/// Parameters of a Conway function: `F(n) = n * alpha_k / beta_k` with
/// `k = n mod gamma`. The divisibility invariants make F integer-valued.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConwaySpec {
    pub gamma: u64,
    pub alpha: Vec<u64>,
    pub beta: Vec<u64>,
    /// Requires F(2) = 3 and F(1) = 1 (the normalization the rule
    /// generators assume).
    pub reduction_mode: bool,
}

impl ConwaySpec {
    pub fn new(
        gamma: u64,
        alpha: Vec<u64>,
        beta: Vec<u64>,
        reduction_mode: bool,
    ) -> Result<Self, ConwayError> {
        if gamma == 0 || alpha.len() != gamma as usize || beta.len() != gamma as usize {
            return Err(ConwayError::InvalidSpec(format!(
                "need gamma ({gamma}) coefficients on both sides"
            )));
        }
        for k in 0..gamma as usize {
            if alpha[k] == 0 || beta[k] == 0 {
                return Err(ConwayError::InvalidSpec("coefficients must be positive".into()));
            }
            if gamma % beta[k] != 0 {
                return Err(ConwayError::InvalidSpec(format!(
                    "beta_{k} = {} does not divide gamma = {gamma}",
                    beta[k]
                )));
            }
            if (k as u64 * alpha[k]) % beta[k] != 0 {
                return Err(ConwayError::InvalidSpec(format!(
                    "beta_{k} = {} does not divide k*alpha_k = {}",
                    beta[k],
                    k as u64 * alpha[k]
                )));
            }
        }
        let spec = ConwaySpec { gamma, alpha, beta, reduction_mode };
        if reduction_mode {
            if conway_eval(&spec, 2)? != 3 {
                return Err(ConwayError::InvalidSpec("reduction mode needs F(2) = 3".into()));
            }
            if conway_eval(&spec, 1)? != 1 {
                return Err(ConwayError::InvalidSpec("reduction mode needs F(1) = 1".into()));
            }
        }
        Ok(spec)
    }
}

/// Evaluates the Conway function; exact by the divisibility invariants.
pub fn conway_eval(spec: &ConwaySpec, n: u64) -> Result<u64, ConwayError> {
    if n == 0 {
        return Err(ConwayError::InvalidSpec("F is defined on positive integers".into()));
    }
    let k = (n % spec.gamma) as usize;
    let prod = n
        .checked_mul(spec.alpha[k])
        .ok_or_else(|| ConwayError::InvalidSpec("overflow in F(n)".into()))?;
    debug_assert_eq!(prod % spec.beta[k], 0, "divisibility invariant");
    Ok(prod / spec.beta[k])
}

/// Iterates F from `start` (the stopping question uses 2). HOLDS when 1
/// is reached, FAILS when the trajectory revisits a value, UNKNOWN once
/// the step budget runs out — the problem is undecidable in general.
pub fn conway_stops(spec: &ConwaySpec, start: u64, budget: &Budget) -> Verdict {
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    let mut trajectory = vec![start];
    let mut value = start;
    seen.insert(start, 0);
    for _ in 0..budget.max_candidates.max(1) {
        if value == 1 {
            return Verdict::holds(
                Certificate::Trajectory { values: trajectory },
                Basis::FiniteProblem,
            );
        }
        value = match conway_eval(spec, value) {
            Ok(v) => v,
            Err(_) => return Verdict::unknown(budget.echo()),
        };
        if let Some(&at) = seen.get(&value) {
            trajectory.push(value);
            return Verdict::fails(
                Certificate::Cycle { values: trajectory, cycle_start: at },
                Basis::FiniteProblem,
            );
        }
        seen.insert(value, trajectory.len());
        trajectory.push(value);
    }
    if value == 1 {
        return Verdict::holds(
            Certificate::Trajectory { values: trajectory },
            Basis::FiniteProblem,
        );
    }
    Verdict::unknown(budget.echo())
}

/// A pair of equal-length sequences of path lengths.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RiverSpec {
    pub p: Vec<u64>,
    pub t: Vec<u64>,
}

impl RiverSpec {
    pub fn new(p: Vec<u64>, t: Vec<u64>) -> Result<Self, ConwayError> {
        if p.is_empty() || p.len() != t.len() {
            return Err(ConwayError::InvalidSpec(
                "river needs equal-length nonempty sequences".into(),
            ));
        }
        if p.iter().chain(t.iter()).any(|&v| v == 0) {
            return Err(ConwayError::InvalidSpec("path lengths must be positive".into()));
        }
        Ok(RiverSpec { p, t })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub const RIVER_CHANNEL: &str = "c";
pub const ETERNITY_1: &str = "e1";
pub const ETERNITY_2: &str = "e2";

fn named(s: impl Into<String>) -> ConstantId {
    ConstantId::Named(s.into())
}

fn bridge(i: usize) -> ConstantId {
    named(format!("b{i}"))
}

/// Constants of segment `i`'s path (downstream order, bridges included):
/// `b_i, <prefix>{i}_1, ..., b_{i-1}`.
fn path(i: usize, len: u64, prefix: &str) -> Vec<ConstantId> {
    let mut out = vec![bridge(i)];
    for j in 1..len {
        out.push(named(format!("{prefix}{i}_{j}")));
    }
    out.push(bridge(i - 1));
    out
}

/// Builds the gadget database for `kappa`: interleaved downstream paths
/// over bridges, crossed eternity edges, a channel to every worldly
/// constant, eternity self-loops, the encounter at the source and the
/// mouth at the sink.
pub fn river_build(kappa: &RiverSpec) -> Database {
    let n = kappa.len();
    let c = named(RIVER_CHANNEL);
    let e1 = named(ETERNITY_1);
    let e2 = named(ETERNITY_2);
    let mut facts: Vec<Fact> = Vec::new();
    let mut worldly: Vec<ConstantId> = Vec::new();

    for i in 1..=n {
        let p_path = path(i, kappa.p[i - 1], "p");
        for w in p_path.windows(2) {
            facts.push(Fact::new("Pyramus", vec![w[0].clone(), w[1].clone()]));
        }
        // non-bridge Pyramus constants point at eternity 2
        for a in &p_path[1..p_path.len() - 1] {
            facts.push(Fact::new("Pyramus", vec![a.clone(), e2.clone()]));
            worldly.push(a.clone());
        }
        let t_path = path(i, kappa.t[i - 1], "t");
        for w in t_path.windows(2) {
            facts.push(Fact::new("Thisbe", vec![w[0].clone(), w[1].clone()]));
        }
        // non-bridge Thisbe constants point at eternity 1
        for a in &t_path[1..t_path.len() - 1] {
            facts.push(Fact::new("Thisbe", vec![a.clone(), e1.clone()]));
            worldly.push(a.clone());
        }
    }
    // bridges carry the crossed eternity edges
    for i in 0..=n {
        let b = bridge(i);
        facts.push(Fact::new("Pyramus", vec![b.clone(), e1.clone()]));
        facts.push(Fact::new("Thisbe", vec![b.clone(), e2.clone()]));
        worldly.push(b);
    }
    for e in [&e1, &e2] {
        facts.push(Fact::new("Pyramus", vec![e.clone(), e.clone()]));
        facts.push(Fact::new("Thisbe", vec![e.clone(), e.clone()]));
        facts.push(Fact::new("Channel", vec![e.clone(), e.clone()]));
    }
    for a in worldly {
        facts.push(Fact::new("Channel", vec![c.clone(), a]));
    }
    facts.push(Fact::new("Encounter", vec![bridge(n), bridge(n - 1)]));
    facts.push(Fact::new("Mouth", vec![bridge(0)]));
    Database::from_facts(facts).expect("river constants are named")
}

/// Correctness flags of a river w.r.t. a Conway function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiverCorrectness {
    pub locally_correct: bool,
    pub correct: bool,
    /// Least m (1-based) with `t_m != p_{m+1}`, when one exists.
    pub defect: Option<usize>,
}

pub fn river_correctness(kappa: &RiverSpec, spec: &ConwaySpec) -> RiverCorrectness {
    let n = kappa.len();
    let mut locally_correct = kappa.p[0] == 2 && kappa.p[n - 1] == 1;
    for i in 0..n - 1 {
        if conway_eval(spec, kappa.p[i]).ok() != Some(kappa.t[i]) {
            locally_correct = false;
        }
    }
    let defect = (0..n - 1).find(|&i| kappa.t[i] != kappa.p[i + 1]).map(|i| i + 1);
    RiverCorrectness { locally_correct, correct: locally_correct && defect.is_none(), defect }
}

/// The combinatorial oracle: the myth chase maps back into the river iff
/// some `t_m` differs from `p_{m+1}`.
pub fn observation1(kappa: &RiverSpec) -> bool {
    (0..kappa.len() - 1).any(|i| kappa.t[i] != kappa.p[i + 1])
}

/// Enumerates every locally correct river of length at most `max_n` with
/// intermediate Pyramus lengths drawn from `1..=max_val`.
pub fn locally_correct_rivers(
    spec: &ConwaySpec,
    max_n: usize,
    max_val: u64,
) -> Result<Vec<RiverSpec>, ConwayError> {
    let mut out = Vec::new();
    for n in 2..=max_n.max(2) {
        if n > max_n {
            break;
        }
        // p_1 = 2 and p_n = 1 are fixed; intermediates range freely
        let mids = n - 2;
        let mut counters = vec![1u64; mids];
        loop {
            let mut p = Vec::with_capacity(n);
            p.push(2);
            p.extend(counters.iter().copied());
            p.push(1);
            let t: Result<Vec<u64>, _> =
                p.iter().map(|&v| conway_eval(spec, v)).collect();
            if let Ok(t) = t {
                out.push(RiverSpec::new(p, t)?);
            }
            // advance the mixed-radix counter
            let mut idx = 0;
            loop {
                if idx == mids {
                    break;
                }
                counters[idx] += 1;
                if counters[idx] <= max_val {
                    break;
                }
                counters[idx] = 1;
                idx += 1;
            }
            if idx == mids {
                break;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The myth rules and their chase chain
// ---------------------------------------------------------------------------

/// Three linear rules: an encounter starts an M-chain, the chain extends
/// forever, and each link projects one Pyramus edge, one Thisbe edge and
/// a shared channel.
pub fn myth_rules() -> Vec<Tgd> {
    vec![
        Tgd::new(
            [Atom::new("Encounter", &["p", "t"])],
            [Atom::new("M", &["p", "p2", "ch", "t2", "t"])],
        )
        .unwrap(),
        Tgd::new(
            [Atom::new("M", &["p", "p2", "ch", "t2", "t"])],
            [Atom::new("M", &["p2", "p3", "ch2", "t3", "t2"])],
        )
        .unwrap(),
        Tgd::new(
            [Atom::new("M", &["p", "p2", "ch", "t2", "t"])],
            [
                Atom::new("Pyramus", &["p", "p2"]),
                Atom::new("Thisbe", &["t", "t2"]),
                Atom::new("Channel", &["ch", "p2"]),
                Atom::new("Channel", &["ch", "t2"]),
            ],
        )
        .unwrap(),
    ]
}

/// The query schema of the myth apparatus (everything except the
/// construction aid `M`).
pub fn myth_query_schema() -> Schema {
    ["Pyramus", "Thisbe", "Channel", "Encounter", "Mouth"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// The Σ_Q-projection of the myth chase below an encounter fact, as an
/// eventually-periodic chain: boundary (pyramus walker, thisbe walker),
/// the prefix consumes the encounter fact and performs the first step,
/// then one segment per step repeats forever.
pub fn myth_chain_spec(pyramus_start: ConstantId, thisbe_start: ConstantId) -> ChainSpec {
    let step_atoms = |with_encounter: bool| {
        let mut atoms = Vec::new();
        if with_encounter {
            atoms.push(ChainAtom {
                relation: "Encounter".into(),
                args: vec![ChainTerm::Left(0), ChainTerm::Left(1)],
            });
        }
        atoms.push(ChainAtom {
            relation: "Pyramus".into(),
            args: vec![ChainTerm::Left(0), ChainTerm::Right(0)],
        });
        atoms.push(ChainAtom {
            relation: "Thisbe".into(),
            args: vec![ChainTerm::Left(1), ChainTerm::Right(1)],
        });
        atoms.push(ChainAtom {
            relation: "Channel".into(),
            args: vec![ChainTerm::Internal("ch".into()), ChainTerm::Right(0)],
        });
        atoms.push(ChainAtom {
            relation: "Channel".into(),
            args: vec![ChainTerm::Internal("ch".into()), ChainTerm::Right(1)],
        });
        ChainSegment { atoms }
    };
    ChainSpec {
        boundary: 2,
        initial: vec![pyramus_start, thisbe_start],
        prefix: vec![step_atoms(true)],
        loop_segments: vec![step_atoms(false)],
    }
}

// ---------------------------------------------------------------------------
// Generated rule families
// ---------------------------------------------------------------------------

fn wh(i: u64, k: u64) -> String {
    format!("WH{i}_{k}")
}

fn bh(k: u64) -> String {
    format!("BH{k}")
}

fn vars(prefix: &str, from: u64, to_incl: u64) -> Vec<String> {
    (from..=to_incl).map(|j| format!("{prefix}{j}")).collect()
}

const DAGGER: [&str; 3] = ["c", "e1", "e2"];

fn dagger_vars() -> Vec<String> {
    DAGGER.iter().map(|s| s.to_string()).collect()
}

fn atom_of(rel: &str, args: &[String]) -> Atom {
    Atom {
        relation: rel.to_string(),
        args: args.to_vec(),
    }
}

/// Recursive-layer rules: build river skeletons over high-arity
/// construction relations, one workhorse family per residue class.
pub fn gen_t_rec(spec: &ConwaySpec) -> Result<Vec<Tgd>, ConwayError> {
    if !spec.reduction_mode {
        return Err(ConwayError::InvalidSpec(
            "rule generation requires a reduction-mode spec".into(),
        ));
    }
    let gamma = spec.gamma;
    let mut rules = Vec::new();
    let dag = dagger_vars();

    // something out of nothing
    let start_args: Vec<String> = dag
        .iter()
        .cloned()
        .chain(["b0", "x1", "y1", "y2", "b1"].iter().map(|s| s.to_string()))
        .collect();
    rules.push(Tgd::new([], [atom_of("Start", &start_args)]).unwrap());

    // the first bridge
    rules.push(
        Tgd::new(
            [atom_of("Start", &start_args)],
            [atom_of(
                "Bridge",
                &dag.iter().cloned().chain(["b1".to_string()]).collect::<Vec<_>>(),
            )],
        )
        .unwrap(),
    );

    let bridge_args: Vec<String> =
        dag.iter().cloned().chain(["b".to_string()]).collect();

    for k in 0..gamma {
        let (ak, bk) = (spec.alpha[k as usize], spec.beta[k as usize]);
        // Bridge -> initial workhorse: both blocks anchored at the bridge
        let mut head_args = dag.clone();
        head_args.push("b".into());
        head_args.extend(vars("x", 1, bk));
        head_args.push("b".into());
        head_args.extend(vars("y", 1, ak));
        rules.push(
            Tgd::new(
                [atom_of("Bridge", &bridge_args)],
                [atom_of(&wh(bk % gamma, k), &head_args)],
            )
            .unwrap(),
        );

        // workhorse steps
        for i in 0..gamma {
            let mut body_args = dag.clone();
            body_args.push("x0".into());
            body_args.extend(vars("x", 1, bk));
            body_args.push("y0".into());
            body_args.extend(vars("y", 1, ak));
            let mut head_args = dag.clone();
            head_args.push(format!("x{bk}"));
            head_args.extend(vars("z", 1, bk));
            head_args.push(format!("y{ak}"));
            head_args.extend(vars("u", 1, ak));
            rules.push(
                Tgd::new(
                    [atom_of(&wh(i, k), &body_args)],
                    [atom_of(&wh((i + bk) % gamma, k), &head_args)],
                )
                .unwrap(),
            );
        }

        // reaching the next bridge
        let i_at = (k + gamma - (bk % gamma)) % gamma;
        let mut body_args = dag.clone();
        body_args.push("x0".into());
        body_args.extend(vars("x", 1, bk));
        body_args.push("y0".into());
        body_args.extend(vars("y", 1, ak));
        let mut head_args = dag.clone();
        head_args.push(format!("x{bk}"));
        head_args.extend(vars("z", 1, bk.saturating_sub(1)));
        head_args.push("b".into());
        head_args.push(format!("y{ak}"));
        head_args.extend(vars("u", 1, ak.saturating_sub(1)));
        head_args.push("b".into());
        rules.push(
            Tgd::new(
                [atom_of(&wh(i_at, k), &body_args)],
                [atom_of(&bh(k), &head_args)],
            )
            .unwrap(),
        );

        // the bridgehead is a bridge
        let mut bh_args = dag.clone();
        bh_args.push("x0".into());
        bh_args.extend(vars("z", 1, bk.saturating_sub(1)));
        bh_args.push("b".into());
        bh_args.push("y0".into());
        bh_args.extend(vars("u", 1, ak.saturating_sub(1)));
        bh_args.push("b".into());
        rules.push(
            Tgd::new([atom_of(&bh(k), &bh_args)], [atom_of("Bridge", &bridge_args)])
                .unwrap(),
        );
    }

    // the last segment: a fresh source bridge one step upstream
    rules.push(
        Tgd::new(
            [atom_of("Bridge", &bridge_args)],
            [atom_of(
                "End",
                &dag.iter()
                    .cloned()
                    .chain(["b".to_string(), "b2".to_string()])
                    .collect::<Vec<_>>(),
            )],
        )
        .unwrap(),
    );
    Ok(rules)
}

/// Projection-layer rules: turn the construction relations into actual
/// river facts over the query schema.
pub fn gen_t_proj(spec: &ConwaySpec) -> Result<Vec<Tgd>, ConwayError> {
    if !spec.reduction_mode {
        return Err(ConwayError::InvalidSpec(
            "rule generation requires a reduction-mode spec".into(),
        ));
    }
    let gamma = spec.gamma;
    let mut rules = Vec::new();
    let dag = dagger_vars();
    let start_args: Vec<String> = dag
        .iter()
        .cloned()
        .chain(["b0", "x1", "y1", "y2", "b1"].iter().map(|s| s.to_string()))
        .collect();

    // mouth segment: p_1 = 2 and t_1 = 3, plus the eternity loops and the
    // mouth bridge's own worldly facts
    let a = |r: &str, args: &[&str]| Atom::new(r, args);
    rules.push(
        Tgd::new(
            [atom_of("Start", &start_args)],
            [
                a("Mouth", &["b0"]),
                a("Pyramus", &["x1", "b0"]),
                a("Pyramus", &["b1", "x1"]),
                a("Pyramus", &["x1", "e2"]),
                a("Thisbe", &["y1", "b0"]),
                a("Thisbe", &["y2", "y1"]),
                a("Thisbe", &["b1", "y2"]),
                a("Thisbe", &["y1", "e1"]),
                a("Thisbe", &["y2", "e1"]),
                a("Channel", &["c", "x1"]),
                a("Channel", &["c", "y1"]),
                a("Channel", &["c", "y2"]),
                a("Channel", &["c", "b0"]),
                a("Pyramus", &["b0", "e1"]),
                a("Thisbe", &["b0", "e2"]),
                a("Channel", &["e1", "e1"]),
                a("Pyramus", &["e1", "e1"]),
                a("Thisbe", &["e1", "e1"]),
                a("Channel", &["e2", "e2"]),
                a("Pyramus", &["e2", "e2"]),
                a("Thisbe", &["e2", "e2"]),
            ],
        )
        .unwrap(),
    );

    // workhorse and bridgehead blocks project onto path edges
    for k in 0..gamma {
        let (ak, bk) = (spec.alpha[k as usize], spec.beta[k as usize]);
        for i in 0..gamma {
            let mut body_args = dag.clone();
            body_args.push("x0".into());
            body_args.extend(vars("x", 1, bk));
            body_args.push("y0".into());
            body_args.extend(vars("y", 1, ak));
            let mut head = Vec::new();
            for j in 1..=bk {
                head.push(atom_of(
                    "Pyramus",
                    &[format!("x{j}"), format!("x{}", j - 1)],
                ));
                head.push(atom_of("Pyramus", &[format!("x{j}"), "e2".into()]));
                head.push(atom_of("Channel", &["c".into(), format!("x{j}")]));
            }
            for j in 1..=ak {
                head.push(atom_of(
                    "Thisbe",
                    &[format!("y{j}"), format!("y{}", j - 1)],
                ));
                head.push(atom_of("Thisbe", &[format!("y{j}"), "e1".into()]));
                head.push(atom_of("Channel", &["c".into(), format!("y{j}")]));
            }
            rules.push(Tgd::new([atom_of(&wh(i, k), &body_args)], head).unwrap());
        }

        // bridgehead: the final block ends in the new bridge, whose own
        // facts come from the Bridge projection
        let mut bh_args = dag.clone();
        bh_args.push("x0".into());
        bh_args.extend(vars("z", 1, bk.saturating_sub(1)));
        bh_args.push("b".into());
        bh_args.push("y0".into());
        bh_args.extend(vars("u", 1, ak.saturating_sub(1)));
        bh_args.push("b".into());
        let mut head = Vec::new();
        let x_block: Vec<String> = std::iter::once("x0".to_string())
            .chain(vars("z", 1, bk.saturating_sub(1)))
            .chain(std::iter::once("b".to_string()))
            .collect();
        for w in x_block.windows(2) {
            head.push(atom_of("Pyramus", &[w[1].clone(), w[0].clone()]));
        }
        for z in &x_block[1..x_block.len() - 1] {
            head.push(atom_of("Pyramus", &[z.clone(), "e2".into()]));
            head.push(atom_of("Channel", &["c".into(), z.clone()]));
        }
        let y_block: Vec<String> = std::iter::once("y0".to_string())
            .chain(vars("u", 1, ak.saturating_sub(1)))
            .chain(std::iter::once("b".to_string()))
            .collect();
        for w in y_block.windows(2) {
            head.push(atom_of("Thisbe", &[w[1].clone(), w[0].clone()]));
        }
        for u in &y_block[1..y_block.len() - 1] {
            head.push(atom_of("Thisbe", &[u.clone(), "e1".into()]));
            head.push(atom_of("Channel", &["c".into(), u.clone()]));
        }
        rules.push(Tgd::new([atom_of(&bh(k), &bh_args)], head).unwrap());
    }

    // bridges are worldly and carry the crossed eternity edges
    let bridge_args: Vec<String> =
        dag.iter().cloned().chain(["b".to_string()]).collect();
    rules.push(
        Tgd::new(
            [atom_of("Bridge", &bridge_args)],
            [
                a("Channel", &["c", "b"]),
                a("Pyramus", &["b", "e1"]),
                a("Thisbe", &["b", "e2"]),
            ],
        )
        .unwrap(),
    );

    // the source: unit paths, the encounter, and the source bridge's facts
    let end_args: Vec<String> = dag
        .iter()
        .cloned()
        .chain(["b".to_string(), "b2".to_string()])
        .collect();
    rules.push(
        Tgd::new(
            [atom_of("End", &end_args)],
            [
                a("Pyramus", &["b2", "b"]),
                a("Thisbe", &["b2", "b"]),
                a("Encounter", &["b2", "b"]),
                a("Channel", &["c", "b2"]),
                a("Pyramus", &["b2", "e1"]),
                a("Thisbe", &["b2", "e2"]),
            ],
        )
        .unwrap(),
    );
    Ok(rules)
}

/// The full linear rule set whose empty-database chase is the overlapped
/// union of all locally correct rivers.
pub fn gen_t1(spec: &ConwaySpec) -> Result<Vec<Tgd>, ConwayError> {
    let mut rules = gen_t_rec(spec)?;
    rules.extend(gen_t_proj(spec)?);
    Ok(rules)
}

/// `T1` plus the myth rules.
pub fn gen_t2(spec: &ConwaySpec) -> Result<Vec<Tgd>, ConwayError> {
    let mut rules = gen_t1(spec)?;
    rules.extend(myth_rules());
    Ok(rules)
}

// ---------------------------------------------------------------------------
// Guarded variant
// ---------------------------------------------------------------------------

/// Distinct variables of a recursive rule in (body occurrence, then new
/// head occurrence) order: the argument layout of its step relation.
fn rule_var_layout(rule: &Tgd) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for atom in rule.body.iter().chain(rule.head.iter()) {
        for v in &atom.args {
            if seen.insert(v.clone()) {
                out.push(v.clone());
            }
        }
    }
    out
}

/// Step-relation name for the `idx`-th recursive rule.
fn step_relation(idx: usize) -> String {
    format!("SR{idx}")
}

/// The guarded rule set whose triviality encodes the stopping problem,
/// with its data schema. Every rule is guarded: the myth rules are
/// linear, the encounter rule is guarded by its `End` atom, and each
/// replay rule is guarded by its step relation.
pub fn gen_guarded_t0(spec: &ConwaySpec) -> Result<(Vec<Tgd>, Schema), ConwayError> {
    let t_rec = gen_t_rec(spec)?;
    let t_proj = gen_t_proj(spec)?;
    let mut rules = myth_rules();

    // the encounter is re-derived from a completed source segment
    rules.push(
        Tgd::new(
            [
                Atom::new("End", &["c", "e1", "e2", "b", "b2"]),
                Atom::new("Pyramus", &["b2", "b"]),
                Atom::new("Thisbe", &["b2", "b"]),
            ],
            [Atom::new("Encounter", &["b2", "b"])],
        )
        .unwrap(),
    );

    let mut sigma_d: Schema = myth_query_schema();
    sigma_d.remove("Encounter");
    sigma_d.insert("Start".to_string());

    for (idx, rule) in t_rec.iter().enumerate() {
        if rule.body.is_empty() {
            // the creation rule has no replay: Start facts come from data
            continue;
        }
        let layout = rule_var_layout(rule);
        let sr = step_relation(idx);
        sigma_d.insert(sr.clone());
        let mut body: Vec<Atom> = vec![Atom {
            relation: sr,
            args: layout.clone(),
        }];
        body.extend(rule.body.iter().cloned());
        // inline the projection closure of the body fact
        let body_atom = rule.body.iter().next().expect("nonempty body");
        body.extend(projection_closure(body_atom, &t_proj));
        let head: Vec<Atom> = rule.head.iter().cloned().collect();
        rules.push(Tgd::new(body, head).expect("well-formed replay rule"));
    }
    Ok((rules, sigma_d))
}

/// All query-schema facts derivable from a single construction fact by
/// the projection rules, as body atoms over the fact's variables.
fn projection_closure(atom: &Atom, t_proj: &[Tgd]) -> Vec<Atom> {
    // run the projection rules on the atom's canonical fact
    let seed = Fact {
        relation: atom.relation.clone(),
        args: atom.args.iter().map(|v| ConstantId::Named(format!("${v}"))).collect(),
    };
    let start = Instance::from_facts([seed.clone()]);
    let result = chase(&start, t_proj, &Budget { max_depth: 4, ..Budget::default() });
    debug_assert!(result.saturated, "projection layer is datalog");
    let mut out = Vec::new();
    for fact in &result.instance.facts {
        if fact == &seed {
            continue;
        }
        out.push(Atom {
            relation: fact.relation.clone(),
            args: fact
                .args
                .iter()
                .map(|c| match c {
                    ConstantId::Named(name) => {
                        name.strip_prefix('$').expect("projection is var-pure").to_string()
                    }
                    ConstantId::Null(_) => unreachable!("projection is datalog"),
                })
                .collect(),
        });
    }
    out
}

// ---------------------------------------------------------------------------
// Witness database for the guarded reduction
// ---------------------------------------------------------------------------

/// Derivation replay data: the chain of construction facts that builds
/// `River_kappa` in the recursive layer, with the index of the rule used
/// at every step.
struct Derivation {
    /// (rule index into `gen_t_rec`, resulting fact) per step; the first
    /// fact is the `Start` fact.
    steps: Vec<(usize, Fact)>,
}

fn derive_river(spec: &ConwaySpec, kappa: &RiverSpec) -> Result<Derivation, ConwayError> {
    let n = kappa.len();
    if n < 2 {
        return Err(ConwayError::NotGenerable("need at least two segments".into()));
    }
    if kappa.p[0] != 2 || kappa.t[0] != 3 {
        return Err(ConwayError::NotGenerable("segment 1 must be (2,3)".into()));
    }
    if kappa.p[n - 1] != 1 || kappa.t[n - 1] != 1 {
        return Err(ConwayError::NotGenerable("segment n must be (1,1)".into()));
    }
    let gamma = spec.gamma;
    let c = named(RIVER_CHANNEL);
    let e1 = named(ETERNITY_1);
    let e2 = named(ETERNITY_2);
    let dag = vec![c, e1, e2];

    // rule indices in gen_t_rec's emission order
    let idx_start_bridge = 1usize;
    let idx_bridge_wh = |k: u64| 2 + (k as usize) * (3 + gamma as usize);
    let idx_wh_step = |k: u64, i: u64| 3 + (k as usize) * (3 + gamma as usize) + i as usize;
    let idx_wh_bh = |k: u64| 3 + (k as usize) * (3 + gamma as usize) + gamma as usize;
    let idx_bh_bridge = |k: u64| 4 + (k as usize) * (3 + gamma as usize) + gamma as usize;
    let idx_bridge_end = 2 + (gamma as usize) * (3 + gamma as usize);

    let mut steps: Vec<(usize, Fact)> = Vec::new();
    let start_fact = Fact::new(
        "Start",
        dag.iter()
            .cloned()
            .chain([
                bridge(0),
                named("p1_1"),
                named("t1_2"),
                named("t1_1"),
                bridge(1),
            ])
            .collect(),
    );
    let bridge_fact = |i: usize| {
        Fact::new("Bridge", dag.iter().cloned().chain([bridge(i)]).collect::<Vec<_>>())
    };
    steps.push((idx_start_bridge, bridge_fact(1)));

    for seg in 2..n {
        let p = kappa.p[seg - 1];
        let t = kappa.t[seg - 1];
        let k = p % gamma;
        let (ak, bk) = (spec.alpha[k as usize], spec.beta[k as usize]);
        if p % bk != 0 || p / bk < 2 {
            return Err(ConwayError::NotGenerable(format!(
                "segment {seg} has Pyramus length {p}, not a multiple >= 2 of beta_{k} = {bk}"
            )));
        }
        let m = p / bk;
        if t != ak * m {
            return Err(ConwayError::NotGenerable(format!(
                "segment {seg} Thisbe length {t} != alpha_k * m = {}",
                ak * m
            )));
        }
        // downstream paths, machinery walks them upstream from the old bridge
        let p_path = path(seg, p, "p");
        let t_path = path(seg, t, "t");
        let px = |offset_from_end: u64| {
            p_path[p_path.len() - 1 - offset_from_end as usize].clone()
        };
        let ty = |offset_from_end: u64| {
            t_path[t_path.len() - 1 - offset_from_end as usize].clone()
        };
        // initial workhorse: both blocks anchored at the downstream bridge
        let mut args: Vec<ConstantId> = dag.clone();
        args.push(bridge(seg - 1));
        for j in 1..=bk {
            args.push(px(j));
        }
        args.push(bridge(seg - 1));
        for j in 1..=ak {
            args.push(ty(j));
        }
        let mut superscript = bk % gamma;
        steps.push((idx_bridge_wh(k), Fact::new(wh(superscript, k), args)));
        // chained workhorses
        for step in 1..m - 1 {
            let mut args: Vec<ConstantId> = dag.clone();
            args.push(px(step * bk));
            for j in 1..=bk {
                args.push(px(step * bk + j));
            }
            args.push(ty(step * ak));
            for j in 1..=ak {
                args.push(ty(step * ak + j));
            }
            let from = superscript;
            superscript = (superscript + bk) % gamma;
            let _ = from;
            steps.push((idx_wh_step(k, (superscript + gamma - bk % gamma) % gamma), Fact::new(wh(superscript, k), args)));
        }
        // bridgehead block ends at the new bridge
        let mut args: Vec<ConstantId> = dag.clone();
        args.push(px((m - 1) * bk));
        for j in 1..bk {
            args.push(px((m - 1) * bk + j));
        }
        args.push(bridge(seg));
        args.push(ty((m - 1) * ak));
        for j in 1..ak {
            args.push(ty((m - 1) * ak + j));
        }
        args.push(bridge(seg));
        steps.push((idx_wh_bh(k), Fact::new(bh(k), args)));
        steps.push((idx_bh_bridge(k), bridge_fact(seg)));
    }

    // the source segment
    steps.push((
        idx_bridge_end,
        Fact::new(
            "End",
            dag.iter().cloned().chain([bridge(n - 1), bridge(n)]).collect::<Vec<_>>(),
        ),
    ));

    let mut all = vec![(usize::MAX, start_fact)];
    all.extend(steps);
    Ok(Derivation { steps: all })
}

/// The witness database for the guarded reduction: the river without its
/// encounter fact, the start fact, and one step fact per derivation step.
/// Fails when `kappa` is not generable by the recursive rules.
pub fn river_witness_db(
    spec: &ConwaySpec,
    kappa: &RiverSpec,
) -> Result<Database, ConwayError> {
    let t_rec = gen_t_rec(spec)?;
    let derivation = derive_river(spec, kappa)?;
    let river = river_build(kappa);
    let n = kappa.len();
    let encounter = Fact::new("Encounter", vec![bridge(n), bridge(n - 1)]);
    let mut facts: Vec<Fact> = river
        .instance()
        .facts
        .iter()
        .filter(|f| **f != encounter)
        .cloned()
        .collect();

    // parent chain: start fact, then each step consumes its predecessor
    for (pos, (rule_idx, fact)) in derivation.steps.iter().enumerate() {
        if pos == 0 {
            facts.push(fact.clone());
            continue;
        }
        let rule = &t_rec[*rule_idx];
        let parent = &derivation.steps[pos - 1].1;
        // bind the rule's variables: body against the parent, head
        // against the derived fact
        let mut binding: BTreeMap<String, ConstantId> = BTreeMap::new();
        let body_atom = rule.body.iter().next().expect("recursive rules have bodies");
        assert_eq!(body_atom.relation, parent.relation, "derivation replay mismatch");
        for (v, cst) in body_atom.args.iter().zip(&parent.args) {
            let prev = binding.insert(v.clone(), cst.clone());
            assert!(prev.map_or(true, |p| p == *cst), "inconsistent body binding");
        }
        let head_atom = rule.head.iter().next().expect("single head atom");
        assert_eq!(head_atom.relation, fact.relation, "derivation replay mismatch");
        for (v, cst) in head_atom.args.iter().zip(&fact.args) {
            let prev = binding.insert(v.clone(), cst.clone());
            assert!(prev.map_or(true, |p| p == *cst), "inconsistent head binding");
        }
        let layout = rule_var_layout(rule);
        facts.push(Fact {
            relation: step_relation(*rule_idx),
            args: layout.iter().map(|v| binding[v].clone()).collect(),
        });
        facts.push(fact.clone());
    }
    // construction facts other than Start are not data; strip them
    let keep: Schema = {
        let mut s = myth_query_schema();
        s.remove("Encounter");
        s.insert("Start".to_string());
        s
    };
    let facts: Vec<Fact> = facts
        .into_iter()
        .filter(|f| keep.contains(&f.relation) || f.relation.starts_with("SR"))
        .collect();
    Database::from_facts(facts).map_err(|e| ConwayError::InvalidSpec(e.to_string()))
}

// ---------------------------------------------------------------------------
// Ancestor decoding (sanity oracles for the generated rules)
// ---------------------------------------------------------------------------

/// The query-schema facts producible from the ancestors of `fact` by the
/// projection rules (the fact itself included in the ancestor set).
pub fn ancestors_sigma_q(
    result: &ChaseResult,
    fact: &Fact,
    t_proj: &[Tgd],
) -> Option<Instance> {
    let parents = result.parents.as_ref()?;
    let mut ancestors = vec![fact.clone()];
    let mut cursor = fact.clone();
    while let Some(parent) = parents.get(&cursor) {
        ancestors.push(parent.clone());
        cursor = parent.clone();
    }
    // apply every projection rule to every ancestor, one step each
    let mut out = Instance::new();
    for anc in &ancestors {
        let start = Instance::from_facts([anc.clone()]);
        let step = chase(&start, t_proj, &Budget { max_depth: 2, ..Budget::default() });
        for f in &step.instance.facts {
            if f != anc {
                out.facts.insert(f.clone());
            }
        }
    }
    Some(out)
}

/// Decodes a river instance back into its length spec by walking the
/// worldly Pyramus/Thisbe paths from the encounter down to the mouth.
/// Returns `None` when the instance is not a complete river shape.
pub fn river_from_instance(instance: &Instance) -> Option<RiverSpec> {
    let mouth = instance
        .facts
        .iter()
        .find(|f| f.relation == "Mouth")
        .map(|f| f.args[0].clone())?;
    let encounter = instance.facts.iter().find(|f| f.relation == "Encounter")?;
    let (source, below) = (encounter.args[0].clone(), encounter.args[1].clone());
    // eternities: constants with self loops
    let eternal: std::collections::BTreeSet<ConstantId> = instance
        .facts
        .iter()
        .filter(|f| {
            (f.relation == "Pyramus" || f.relation == "Thisbe") && f.args[0] == f.args[1]
        })
        .map(|f| f.args[0].clone())
        .collect();
    // bridges: worldly constants with both a Pyramus and a Thisbe edge
    // into an eternity (path intermediates only have one of the two)
    let eternity_edges = |relation: &str| -> std::collections::BTreeSet<ConstantId> {
        instance
            .facts
            .iter()
            .filter(|f| {
                f.relation == relation
                    && eternal.contains(&f.args[1])
                    && !eternal.contains(&f.args[0])
            })
            .map(|f| f.args[0].clone())
            .collect()
    };
    let bridges: std::collections::BTreeSet<ConstantId> = eternity_edges("Pyramus")
        .intersection(&eternity_edges("Thisbe"))
        .cloned()
        .collect();
    if !bridges.contains(&source) || !bridges.contains(&mouth) {
        return None;
    }

    let walk = |relation: &str| -> Option<Vec<u64>> {
        let mut lengths = Vec::new();
        let mut at = source.clone();
        let mut steps_in_segment = 0u64;
        let mut guard = 0usize;
        while at != mouth {
            guard += 1;
            if guard > 10_000 {
                return None;
            }
            let next = instance
                .facts
                .iter()
                .filter(|f| {
                    f.relation == relation
                        && f.args[0] == at
                        && !eternal.contains(&f.args[1])
                })
                .map(|f| f.args[1].clone())
                .collect::<Vec<_>>();
            if next.len() != 1 {
                return None;
            }
            steps_in_segment += 1;
            at = next.into_iter().next().unwrap();
            if bridges.contains(&at) {
                lengths.push(steps_in_segment);
                steps_in_segment = 0;
            }
        }
        if steps_in_segment != 0 {
            return None;
        }
        lengths.reverse();
        Some(lengths)
    };
    let p = walk("Pyramus")?;
    let t = walk("Thisbe")?;
    if below != source {
        // encounter must point one bridge downstream
        let mut at = source.clone();
        for _ in 0..*p.last()? {
            let next = instance
                .facts
                .iter()
                .find(|f| {
                    f.relation == "Pyramus"
                        && f.args[0] == at
                        && !eternal.contains(&f.args[1])
                })
                .map(|f| f.args[1].clone())?;
            at = next;
        }
        if at != below {
            return None;
        }
    }
    RiverSpec::new(p, t).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::classify;

    fn demo_spec() -> ConwaySpec {
        // F(2) = 1: the simple non-normalized spec
        ConwaySpec::new(2, vec![1, 1], vec![2, 1], false).unwrap()
    }

    /// Reduction-mode spec used by the generator tests: F(2)=3, F(3)=3,
    /// F(1)=1 (never stops; 3 cycles to itself).
    pub(crate) fn reduction_spec() -> ConwaySpec {
        ConwaySpec::new(2, vec![3, 1], vec![2, 1], true).unwrap()
    }

    #[test]
    fn conway_eval_examples() {
        let s = demo_spec();
        assert_eq!(conway_eval(&s, 2).unwrap(), 1);
        assert_eq!(conway_eval(&s, 3).unwrap(), 3);
        let identity = ConwaySpec::new(2, vec![1, 1], vec![1, 1], false).unwrap();
        for n in 1..=20 {
            assert_eq!(conway_eval(&identity, n).unwrap(), n);
        }
    }

    #[test]
    fn conway_eval_positive_range() {
        for spec in [demo_spec(), reduction_spec()] {
            for n in 1..=10_000u64 {
                assert!(conway_eval(&spec, n).unwrap() >= 1);
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ConwaySpec::new(2, vec![1, 1], vec![3, 1], false).is_err());
        assert!(ConwaySpec::new(2, vec![1], vec![1, 1], false).is_err());
        assert!(ConwaySpec::new(2, vec![1, 1], vec![2, 1], true).is_err());
    }

    #[test]
    fn conway_stops_examples() {
        let b = Budget::default();
        let v = conway_stops(&demo_spec(), 2, &b);
        assert!(v.is_holds());
        if let Some(Certificate::Trajectory { values }) = v.certificate {
            assert_eq!(values, vec![2, 1]);
        } else {
            panic!("expected trajectory");
        }

        let identity = ConwaySpec::new(2, vec![1, 1], vec![1, 1], false).unwrap();
        let v = conway_stops(&identity, 2, &b);
        assert!(v.is_fails());

        let v = conway_stops(&reduction_spec(), 2, &b);
        assert!(v.is_fails(), "2 -> 3 -> 3 cycles");
    }

    #[test]
    fn river_shape_minimal() {
        let kappa = RiverSpec::new(vec![1], vec![1]).unwrap();
        let db = river_build(&kappa);
        let facts = &db.instance().facts;
        let has = |r: &str, args: &[&str]| {
            facts.contains(&Fact::new(r, args.iter().map(|a| named(*a)).collect()))
        };
        assert!(has("Pyramus", &["b1", "b0"]));
        assert!(has("Thisbe", &["b1", "b0"]));
        assert!(has("Encounter", &["b1", "b0"]));
        assert!(has("Mouth", &["b0"]));
        assert!(has("Channel", &["c", "b0"]));
        assert!(has("Channel", &["c", "b1"]));
        assert!(has("Pyramus", &["b0", "e1"]));
        assert!(has("Thisbe", &["b0", "e2"]));
        assert!(has("Pyramus", &["b1", "e1"]));
        assert!(has("Thisbe", &["b1", "e2"]));
        for e in ["e1", "e2"] {
            assert!(has("Pyramus", &[e, e]));
            assert!(has("Thisbe", &[e, e]));
            assert!(has("Channel", &[e, e]));
        }
        assert_eq!(facts.len(), 16);
        // every worldly constant is channeled
        for c in db.adom() {
            let name = c.to_string();
            if name.starts_with('e') || name == "c" {
                continue;
            }
            assert!(
                facts.contains(&Fact::new("Channel", vec![named("c"), c.clone()])),
                "missing channel to {c}"
            );
        }
    }

    #[test]
    fn river_figure_example() {
        let kappa = RiverSpec::new(vec![4, 7, 7, 1], vec![7, 4, 6, 2]).unwrap();
        let db = river_build(&kappa);
        // bridges b0..b4, intermediates sum((p_i - 1)) + sum((t_i - 1)),
        // channel and two eternities
        let intermediates: u64 =
            kappa.p.iter().map(|v| v - 1).sum::<u64>() + kappa.t.iter().map(|v| v - 1).sum::<u64>();
        assert_eq!(db.adom().len() as u64, 5 + intermediates + 3);
        let decoded = river_from_instance(db.instance()).unwrap();
        assert_eq!(decoded, kappa);
    }

    #[test]
    fn correctness_flags() {
        let s = demo_spec();
        let fig = RiverSpec::new(vec![4, 7, 7, 1], vec![7, 4, 6, 2]).unwrap();
        let c = river_correctness(&fig, &s);
        assert!(!c.locally_correct);
        assert_eq!(c.defect, Some(2));
        assert!(observation1(&fig));

        let no_defect = RiverSpec::new(vec![2, 3], vec![3, 1]).unwrap();
        assert!(!observation1(&no_defect));
        assert_eq!(river_correctness(&no_defect, &s).defect, None);

        // single segment: no valid m
        let single = RiverSpec::new(vec![1], vec![1]).unwrap();
        assert!(!observation1(&single));

        // the demo spec's correct river
        let correct = RiverSpec::new(vec![2, 1], vec![1, 1]).unwrap();
        let c = river_correctness(&correct, &s);
        assert!(c.locally_correct && c.correct);
    }

    #[test]
    fn locally_correct_enumeration() {
        let s = demo_spec();
        let rivers = locally_correct_rivers(&s, 3, 3).unwrap();
        assert!(!rivers.is_empty());
        for kappa in &rivers {
            assert!(river_correctness(kappa, &s).locally_correct, "{kappa:?}");
        }
        // the demo spec stops, so its correct river is enumerated
        assert!(rivers
            .iter()
            .any(|k| river_correctness(k, &s).correct));

        // reduction spec: no correct river exists (3 cycles to itself)
        let rivers = locally_correct_rivers(&reduction_spec(), 4, 4).unwrap();
        assert!(!rivers.is_empty());
        assert!(rivers.iter().all(|k| !river_correctness(k, &reduction_spec()).correct));
    }

    #[test]
    fn myth_rules_shape() {
        let rules = myth_rules();
        assert_eq!(rules.len(), 3);
        for rule in &rules {
            assert!(classify(rule).unwrap().linear);
        }
        // the projection rule carries the four query-schema atoms
        let proj = &rules[2];
        assert_eq!(proj.head.len(), 4);
    }

    #[test]
    fn gen_t1_relation_arities() {
        let s = reduction_spec();
        let rules = gen_t1(&s).unwrap();
        for rule in &rules {
            assert!(classify(rule).unwrap().linear, "{rule}");
        }
        // WH relations have arity alpha_k + beta_k + 5
        let mut arities: BTreeMap<String, usize> = BTreeMap::new();
        for rule in &rules {
            for atom in rule.body.iter().chain(rule.head.iter()) {
                arities.insert(atom.relation.clone(), atom.args.len());
            }
        }
        for k in 0..2u64 {
            let expect = (s.alpha[k as usize] + s.beta[k as usize] + 5) as usize;
            for i in 0..2u64 {
                assert_eq!(arities[&wh(i, k)], expect);
            }
            assert_eq!(arities[&bh(k)], expect);
        }
        assert_eq!(arities["Start"], 8);
        assert_eq!(arities["End"], 5);
        assert_eq!(arities["Bridge"], 4);
    }

    #[test]
    fn gen_t0_guarded() {
        let (rules, sigma_d) = gen_guarded_t0(&reduction_spec()).unwrap();
        for rule in &rules {
            assert!(classify(rule).unwrap().guarded, "not guarded: {rule}");
        }
        assert!(sigma_d.contains("Start"));
        assert!(sigma_d.contains("Pyramus"));
        assert!(!sigma_d.contains("Encounter"));
        assert!(sigma_d.iter().any(|r| r.starts_with("SR")));
    }
}
