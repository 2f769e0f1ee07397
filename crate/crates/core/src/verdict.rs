//! Three-valued verdicts with machine-checkable certificates, and the
//! budget knobs that bound every search in this crate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Resource bounds for chases, searches and enumerations.
///
/// `max_depth` counts chase rounds, `max_facts` caps instance growth and
/// `max_candidates` caps enumeration/search nodes. Zero means "unbounded"
/// only for `max_candidates`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_depth: u32,
    pub max_facts: usize,
    pub max_candidates: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_depth: 6, max_facts: 50_000, max_candidates: 100_000 }
    }
}

impl Budget {
    pub fn with_depth(depth: u32) -> Self {
        Budget { max_depth: depth, ..Budget::default() }
    }

    pub fn depth(mut self, depth: u32) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn candidates(mut self, candidates: usize) -> Self {
        self.max_candidates = candidates;
        self
    }

    pub fn echo(&self) -> BTreeMap<String, u64> {
        let mut m = BTreeMap::new();
        m.insert("depth".to_string(), self.max_depth as u64);
        m.insert("facts".to_string(), self.max_facts as u64);
        m.insert("candidates".to_string(), self.max_candidates as u64);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictValue {
    Holds,
    Fails,
    Unknown,
}

/// What a definite verdict rests on. `TruncatedWitness` marks evidence
/// found inside a chase truncation (sound for HOLDS, never permitted as
/// the basis of a FAILS emitted by a conservativity checker).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    FiniteProblem,
    SaturatedChase,
    TruncatedWitness,
    StateSpaceFixpoint,
}

/// A machine-checkable witness. Facts and constants are rendered in the
/// textual format; identifiers of the form `n<digits>` denote nulls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// A homomorphism, as sorted (source, target) constant pairs.
    Homomorphism { mapping: Vec<(String, String)> },
    /// A witnessing database.
    Database { facts: Vec<String> },
    /// A witnessing fact set (e.g. a cluster or head fragment).
    FactSet { facts: Vec<String> },
    /// An induced subinstance refuting a bounded homomorphism.
    Subinstance { domain: Vec<String>, facts: Vec<String> },
    /// A trajectory of Conway-function values ending at the target.
    Trajectory { values: Vec<u64> },
    /// A trajectory entering a cycle; `cycle_start` indexes into `values`.
    Cycle { values: Vec<u64>, cycle_start: usize },
    /// Non-triviality witness: a singleton database plus an entailed
    /// cluster admitting no database-preserving hom back into it.
    TrivialityWitness { database: Vec<String>, cluster: Vec<String> },
    /// A query answered by one rule set and exactly refuted by the other.
    CounterexampleCq {
        database: Vec<String>,
        query: String,
        tuple: Vec<String>,
    },
    /// A lasso in the product of an eventually-periodic chain with a
    /// finite instance: boundary states, looping back to `cycle_start`.
    Lasso { states: Vec<Vec<String>>, cycle_start: usize },
    /// The extended chase of the database admits no database-preserving
    /// query-schema hom into the saturated base chase at this depth.
    HomFailure { database: Vec<String>, chase_depth: u64 },
    /// Per-condition outcome of a properness check, named by node/edge.
    ProperTreeReport {
        holds: Vec<String>,
        fails: Vec<String>,
        unknown: Vec<String>,
    },
    /// A summary of an exhaustively searched finite space.
    SearchSummary { summary: BTreeMap<String, u64> },
}

/// Three-valued outcome carrying a certificate (HOLDS/FAILS) or the
/// exhausted budget (UNKNOWN).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    pub certificate: Option<Certificate>,
    pub basis: Option<Basis>,
    pub budget: BTreeMap<String, u64>,
}

impl Verdict {
    pub fn holds(certificate: Certificate, basis: Basis) -> Self {
        Verdict {
            value: VerdictValue::Holds,
            certificate: Some(certificate),
            basis: Some(basis),
            budget: BTreeMap::new(),
        }
    }

    pub fn fails(certificate: Certificate, basis: Basis) -> Self {
        Verdict {
            value: VerdictValue::Fails,
            certificate: Some(certificate),
            basis: Some(basis),
            budget: BTreeMap::new(),
        }
    }

    pub fn unknown(budget: BTreeMap<String, u64>) -> Self {
        Verdict {
            value: VerdictValue::Unknown,
            certificate: None,
            basis: None,
            budget,
        }
    }

    pub fn with_budget(mut self, budget: BTreeMap<String, u64>) -> Self {
        self.budget = budget;
        self
    }

    pub fn is_holds(&self) -> bool {
        self.value == VerdictValue::Holds
    }

    pub fn is_fails(&self) -> bool {
        self.value == VerdictValue::Fails
    }

    pub fn is_unknown(&self) -> bool {
        self.value == VerdictValue::Unknown
    }
}

pub fn budget_echo(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
