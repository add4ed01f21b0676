//! Finite-domain constraint models compiled from grounded validity
//! specifications, in a Boolean (`Low`) or constructive (`High`) encoding.

mod compile;
mod listing;
mod objects;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{AugmentError, Scope};
use crate::pddl::{GroundAtom, TypedName};

pub use compile::{compile, compile_high, compile_low, compile_with};
pub use listing::{listing, ModelSummary};
pub use objects::{grid_number, required_params, synthesize_objects};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no validity specification: the domain has no `:instance-constraints` section")]
    NoValiditySpec,
    #[error("missing generator parameter `{0}`")]
    MissingParam(String),
    #[error("unknown generator parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{name}` = {value}: {reason}")]
    BadParam {
        name: String,
        value: u64,
        reason: String,
    },
    #[error("statically infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Low,
    High,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Low => "low",
            Encoding::High => "high",
        })
    }
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Encoding::Low),
            "high" => Ok(Encoding::High),
            _ => Err(format!("unknown encoding `{s}` (expected low or high)")),
        }
    }
}

/// Integer parameter assignment that drives one generation run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub assignment: BTreeMap<String, u64>,
    pub seed: u64,
    /// Upper bound for integer fluents without a declared `max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub int_max: Option<i64>,
}

impl GeneratorConfig {
    pub fn new<S: Into<String>>(params: impl IntoIterator<Item = (S, u64)>, seed: u64) -> Self {
        GeneratorConfig {
            assignment: params.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            seed,
            int_max: None,
        }
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.assignment.get(name).copied()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GeneratorConfig {
            seed,
            ..self.clone()
        }
    }
}

impl fmt::Display for GeneratorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.assignment {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub type VarId = u32;

/// Compact ground atom: indices into the model's symbol and object tables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomKey {
    pub symbol: u32,
    pub args: Box<[u32]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Bool { atom: AtomKey, scope: Scope },
    Int { term: AtomKey, lo: i64, hi: i64 },
    /// Reification auxiliary, Boolean.
    Aux,
}

impl VarKind {
    pub fn is_bool(&self) -> bool {
        !matches!(self, VarKind::Int { .. })
    }

    /// Initial `(lo, hi)` domain.
    pub fn bounds(&self) -> (i64, i64) {
        match self {
            VarKind::Int { lo, hi, .. } => (*lo, *hi),
            _ => (0, 1),
        }
    }
}

/// `var == value` when `pos`, `var != value` otherwise. Booleans use 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lit {
    pub var: VarId,
    pub value: i64,
    pub pos: bool,
}

impl Lit {
    pub fn is_true(var: VarId) -> Lit {
        Lit {
            var,
            value: 1,
            pos: true,
        }
    }

    pub fn negate(self) -> Lit {
        Lit {
            pos: !self.pos,
            ..self
        }
    }

    pub fn holds(self, value: i64) -> bool {
        (value == self.value) == self.pos
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    Eq,
    Le,
    Ge,
}

impl Cmp {
    pub fn holds(self, count: usize, k: u32) -> bool {
        let k = k as usize;
        match self {
            Cmp::Eq => count == k,
            Cmp::Le => count <= k,
            Cmp::Ge => count >= k,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// `count(true lits) cmp k`.
    Cardinality { lits: Vec<Lit>, cmp: Cmp, k: u32 },
    /// `indicator <-> count(true lits) cmp k`.
    ReifiedCardinality {
        indicator: VarId,
        lits: Vec<Lit>,
        cmp: Cmp,
        k: u32,
    },
    Biconditional { a: VarId, b: VarId },
    BiconditionalConst { a: VarId, value: bool },
    /// Exactly one of the two literals holds.
    Xor { a: Lit, b: Lit },
    Implies { a: Lit, b: Lit },
}

impl Constraint {
    /// Whether the constraint holds under a total assignment.
    pub fn satisfied(&self, values: &[i64]) -> bool {
        let lit = |l: &Lit| l.holds(values[l.var as usize]);
        let count = |lits: &[Lit]| lits.iter().filter(|l| lit(l)).count();
        match self {
            Constraint::Cardinality { lits, cmp, k } => cmp.holds(count(lits), *k),
            Constraint::ReifiedCardinality {
                indicator,
                lits,
                cmp,
                k,
            } => (values[*indicator as usize] == 1) == cmp.holds(count(lits), *k),
            Constraint::Biconditional { a, b } => values[*a as usize] == values[*b as usize],
            Constraint::BiconditionalConst { a, value } => (values[*a as usize] == 1) == *value,
            Constraint::Xor { a, b } => lit(a) != lit(b),
            Constraint::Implies { a, b } => !lit(a) || lit(b),
        }
    }
}

/// Per-category constraint accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    /// Low: emitted grid biconditionals. High: constructive partner decisions.
    pub structural: u64,
    pub cardinality: u64,
    pub logic: u64,
    pub fixed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintModel {
    pub encoding: Encoding,
    pub domain_name: String,
    pub config: GeneratorConfig,
    /// Predicate names followed by integer fluent names.
    pub symbols: Vec<String>,
    pub objects: Vec<TypedName>,
    pub variables: Vec<VarKind>,
    pub constraints: Vec<Constraint>,
    /// Constructive assignments made at compile time.
    pub fixed: BTreeMap<VarId, i64>,
    /// Exactly-one groups decoded as total functions (High mode).
    pub total_functions: Vec<Vec<VarId>>,
    /// Indices of the grid biconditionals within `constraints` (Low mode).
    pub structural: Range<usize>,
    /// Partner decisions taken while building `fixed` (High mode).
    pub decisions: u64,
}

impl ConstraintModel {
    pub fn atom(&self, key: &AtomKey) -> GroundAtom {
        GroundAtom {
            predicate: self.symbols[key.symbol as usize].clone(),
            args: key
                .args
                .iter()
                .map(|&o| self.objects[o as usize].name.clone())
                .collect(),
        }
    }

    /// Ground atom behind a Bool variable, with its scope.
    pub fn bool_atom(&self, var: VarId) -> Option<(GroundAtom, Scope)> {
        match &self.variables[var as usize] {
            VarKind::Bool { atom, scope } => Some((self.atom(atom), *scope)),
            _ => None,
        }
    }

    pub fn var_name(&self, var: VarId) -> String {
        match &self.variables[var as usize] {
            VarKind::Bool { atom, scope } => format!("{scope}:{}", self.atom(atom)),
            VarKind::Int { term, .. } => format!("int:{}", self.atom(term)),
            VarKind::Aux => format!("aux#{var}"),
        }
    }

    /// Whether `values` satisfies every constraint, fixed entry and total function.
    pub fn check(&self, values: &[i64]) -> bool {
        values.len() == self.variables.len()
            && self.variables.iter().zip(values).all(|(k, v)| {
                let (lo, hi) = k.bounds();
                (lo..=hi).contains(v)
            })
            && self.fixed.iter().all(|(v, x)| values[*v as usize] == *x)
            && self
                .total_functions
                .iter()
                .all(|g| g.iter().filter(|v| values[**v as usize] == 1).count() == 1)
            && self.constraints.iter().all(|c| c.satisfied(values))
    }
}

/// Exact per-category counts of a model.
pub fn count_constraints(m: &ConstraintModel) -> Tally {
    let mut t = Tally {
        fixed: m.fixed.len() as u64,
        ..Tally::default()
    };
    t.structural = match m.encoding {
        Encoding::Low => m.structural.len() as u64,
        Encoding::High => m.decisions,
    };
    for (i, c) in m.constraints.iter().enumerate() {
        if m.structural.contains(&i) {
            continue;
        }
        match c {
            Constraint::Cardinality { .. } | Constraint::ReifiedCardinality { .. } => t.cardinality += 1,
            _ => t.logic += 1,
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_model_counts_zero() {
        let m = ConstraintModel {
            encoding: Encoding::High,
            domain_name: "d".into(),
            config: GeneratorConfig::default(),
            symbols: vec![],
            objects: vec![],
            variables: vec![],
            constraints: vec![],
            fixed: BTreeMap::new(),
            total_functions: vec![],
            structural: 0..0,
            decisions: 0,
        };
        assert_eq!(count_constraints(&m), Tally::default());
        assert!(m.check(&[]));
    }

    #[test]
    fn encoding_names() {
        assert_eq!("HIGH".parse::<Encoding>(), Ok(Encoding::High));
        assert_eq!(Encoding::Low.to_string(), "low");
        assert!("mid".parse::<Encoding>().is_err());
    }

    #[test]
    fn config_display_is_sorted() {
        let c = GeneratorConfig::new([("tile_size", 2), ("n_robot", 1)], 0);
        assert_eq!(c.to_string(), "n_robot=1,tile_size=2");
    }
}
