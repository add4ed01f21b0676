//! Typed-STRIPS PDDL: AST, domain/problem parsers and canonical emission.

mod domain;
mod emit;
mod problem;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{AugmentError, ValiditySpec};
use crate::model::GeneratorConfig;
use crate::sexpr::{LexError, Pos};
use crate::solve::SolveStats;

pub use domain::parse_domain;
pub use emit::emit_problem;
pub use problem::parse_problem;

/// The implicit root of every type hierarchy.
pub const OBJECT: &str = "object";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PddlError {
    #[error("lexical error: {0}")]
    Lex(#[from] LexError),
    #[error("{pos}: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("unsupported PDDL feature: {0}")]
    Unsupported(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("undeclared object `{0}`")]
    UndeclaredObject(String),
    #[error("variable `{var}` not bound by the parameters of `{context}`")]
    UnboundVariable { var: String, context: String },
    #[error("`{predicate}` expects {expected} arguments, found {found}")]
    Arity {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("argument `{arg}` of `{predicate}` has type `{found}`, expected `{expected}`")]
    TypeMismatch {
        predicate: String,
        arg: String,
        expected: String,
        found: String,
    },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("action `{action}` both adds and deletes {atom}")]
    AddDeleteOverlap { action: String, atom: String },
    #[error("missing `{0}` section")]
    MissingSection(&'static str),
    #[error("goal nonempty: the goal must contain at least one atom")]
    EmptyGoal,
    #[error("problem is for domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

pub type Result<T, E = PddlError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypedName {
    pub name: String,
    #[serde(rename = "type")]
    pub typ: String,
}

impl TypedName {
    pub fn new(name: impl Into<String>, typ: impl Into<String>) -> Self {
        TypedName {
            name: name.into(),
            typ: typ.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedName>,
}

/// Integer-valued fluent declared in `:functions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<TypedName>,
}

/// A predicate applied to action parameters (`?x`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomSchema {
    pub predicate: String,
    pub args: Vec<String>,
}

impl fmt::Display for AtomSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub atom: AtomSchema,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub precondition: Vec<Literal>,
    pub add: Vec<AtomSchema>,
    pub del: Vec<AtomSchema>,
}

impl ActionSchema {
    pub fn effect_count(&self) -> usize {
        self.add.len() + self.del.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub requirements: Vec<String>,
    /// Declared types in order; `object` is implicit.
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<PredicateDecl>,
    pub functions: Vec<FunctionDecl>,
    pub actions: Vec<ActionSchema>,
    pub validity: Option<ValiditySpec>,
}

impl DomainSpec {
    pub fn has_type(&self, name: &str) -> bool {
        name == OBJECT || self.types.iter().any(|t| t.name == name)
    }

    fn parent_of(&self, name: &str) -> Option<&str> {
        self.types
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.parent.as_str())
    }

    /// `sub` equals `sup` or (transitively) declares it as a parent.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sup == OBJECT {
            return true;
        }
        let mut cur = sub;
        // Bounded walk: a malformed cyclic hierarchy must not hang.
        for _ in 0..=self.types.len() {
            if cur == sup {
                return true;
            }
            match self.parent_of(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }

    /// Types with no declared subtypes, excluding `object`, in declaration order.
    pub fn leaf_types(&self) -> Vec<&str> {
        self.types
            .iter()
            .filter(|t| !self.types.iter().any(|o| o.parent == t.name))
            .map(|t| t.name.as_str())
            .collect()
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Parameter signature of a predicate or function.
    pub fn signature(&self, name: &str) -> Option<&[TypedName]> {
        self.predicate(name)
            .map(|p| p.params.as_slice())
            .or_else(|| self.function(name).map(|f| f.params.as_slice()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: GeneratorConfig,
    pub seed: u64,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedName>,
    /// Closed world: atoms not listed are false.
    pub init: BTreeSet<GroundAtom>,
    /// Initial values of integer fluents, `(= (f ...) v)`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub numeric: BTreeMap<GroundAtom, i64>,
    pub goal: BTreeSet<GroundAtom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ProblemInstance {
    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects
            .iter()
            .find(|o| o.name == name)
            .map(|o| o.typ.as_str())
    }

    /// Objects whose type is `typ` or one of its subtypes.
    pub fn objects_of<'a>(&'a self, domain: &'a DomainSpec, typ: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects
            .iter()
            .filter(move |o| domain.is_subtype(&o.typ, typ))
            .map(|o| o.name.as_str())
    }

    /// Same instance without provenance, for structural comparison.
    pub fn without_provenance(&self) -> ProblemInstance {
        ProblemInstance {
            provenance: None,
            ..self.clone()
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub(crate) fn is_variable(s: &str) -> bool {
    s.strip_prefix('?').is_some_and(is_identifier)
}

/// Checks arity and argument types of a ground atom or fluent term.
pub(crate) fn check_ground(
    domain: &DomainSpec,
    atom: &GroundAtom,
    object_type: impl Fn(&str) -> Option<String>,
) -> Result<()> {
    let sig = domain
        .signature(&atom.predicate)
        .ok_or_else(|| PddlError::UndeclaredPredicate(atom.predicate.clone()))?;
    if sig.len() != atom.args.len() {
        return Err(PddlError::Arity {
            predicate: atom.predicate.clone(),
            expected: sig.len(),
            found: atom.args.len(),
        });
    }
    for (arg, param) in atom.args.iter().zip(sig) {
        let typ = object_type(arg).ok_or_else(|| PddlError::UndeclaredObject(arg.clone()))?;
        if !domain.is_subtype(&typ, &param.typ) {
            return Err(PddlError::TypeMismatch {
                predicate: atom.predicate.clone(),
                arg: arg.clone(),
                expected: param.typ.clone(),
                found: typ,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    /// Fig-2 predicates, the public IPC-2014 floor-tile action set, and the
    /// Fig-5 constraints plus the square-grid template.
    pub const FLOOR_TILE: &str = include_str!("../../../../domains/floor-tile.pddl");
    /// Generator-oriented variant used by the pipeline tests.
    pub const FLOOR_TILE_GEN: &str = include_str!("../../../../domains/floor-tile-gen.pddl");
    pub const FIG3_PROBLEM: &str = include_str!("../../../../domains/floor-tile-toy.pddl");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers() {
        assert!(is_identifier("tile_0-1"));
        assert!(is_identifier("robot-at"));
        assert!(!is_identifier("0tile"));
        assert!(!is_identifier("_x"));
        assert!(!is_identifier(""));
        assert!(is_variable("?from"));
        assert!(!is_variable("?"));
    }

    #[test]
    fn subtype_walk() {
        let d = parse_domain(
            "(define (domain d) (:types a - object b - a c) (:predicates))",
            false,
        )
        .unwrap();
        assert!(d.is_subtype("b", "a"));
        assert!(d.is_subtype("b", "object"));
        assert!(!d.is_subtype("a", "b"));
        assert!(!d.is_subtype("c", "a"));
        assert_eq!(d.leaf_types(), vec!["b", "c"]);
    }
}
