//! Validity specifications: the `:instance-constraints` section of an
//! augmented domain and its grounding over a concrete object set.

mod expand;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::TypedName;
use crate::sexpr::Pos;

pub use expand::{expand, GroundCard, GroundConstraint, GroundFormula, GroundedValiditySpec};
pub use parse::parse_instance_constraints;

/// Upper bound for integer fluents without a `max` declaration.
pub const DEFAULT_INT_MAX: i64 = i32::MAX as i64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("{pos}: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("unknown keyword `{0}` in instance constraints")]
    UnknownKeyword(String),
    #[error("appear only valid in goal scope")]
    AppearOutsideGoal,
    #[error("structural template `{0}` must appear at the top level of an init constraint")]
    MisplacedTemplate(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("undeclared predicate or fluent `{0}`")]
    UnknownPredicate(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("pattern for `{predicate}` has {found} arguments, expected {expected}")]
    PatternArity {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("`{var}` of type `{found}` cannot fill a `{expected}` argument of `{predicate}`")]
    TypeMismatch {
        predicate: String,
        var: String,
        expected: String,
        found: String,
    },
    #[error("`{0}` is not an integer fluent; min/max attach to integer fluents only")]
    NotIntegerFluent(String),
    #[error("inconsistent bounds for `{fluent}`: min {min} > max {max}")]
    InvalidBounds { fluent: String, min: i64, max: i64 },
    #[error("value {value} is not valid for `{predicate}`")]
    BadValue { predicate: String, value: String },
    #[error("`xor` takes exactly two operands, found {0}")]
    XorArity(usize),
    #[error("template predicate `{0}` must be binary over the grid type")]
    TemplateSignature(String),
    #[error("duplicate generator parameter `{0}`")]
    DuplicateParam(String),
    #[error("object `{0}` is not declared or has the wrong type")]
    UnknownObject(String),
    #[error("statically unsatisfiable: {0}")]
    StaticallyUnsat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternArg {
    Var(String),
    Const(String),
    Wildcard,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FluentPattern {
    pub predicate: String,
    pub args: Vec<PatternArg>,
}

impl FluentPattern {
    pub fn wildcards(&self) -> usize {
        self.args.iter().filter(|a| **a == PatternArg::Wildcard).count()
    }
}

impl fmt::Display for FluentPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            match a {
                PatternArg::Var(v) | PatternArg::Const(v) => write!(f, " {v}")?,
                PatternArg::Wildcard => f.write_str(" _")?,
            }
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CardKind {
    ExactlyK,
    AtLeastK,
    AtMostK,
}

impl CardKind {
    pub fn keyword(self) -> &'static str {
        match self {
            CardKind::ExactlyK => "exactly-k",
            CardKind::AtLeastK => "atleast-k",
            CardKind::AtMostK => "atmost-k",
        }
    }

    /// Whether `count` matching atoms satisfies the term.
    pub fn holds(self, count: usize, k: u32) -> bool {
        let k = k as usize;
        match self {
            CardKind::ExactlyK => count == k,
            CardKind::AtLeastK => count >= k,
            CardKind::AtMostK => count <= k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FluentValue {
    Bool(bool),
    Int(i64),
}

impl fmt::Display for FluentValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluentValue::Bool(true) => f.write_str("True"),
            FluentValue::Bool(false) => f.write_str("False"),
            FluentValue::Int(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardinalityTerm {
    pub kind: CardKind,
    pub pattern: FluentPattern,
    pub k: u32,
    pub value: FluentValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scope {
    Init,
    Goal,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Init => "init",
            Scope::Goal => "goal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formula {
    Card(CardinalityTerm),
    Appear(FluentPattern),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Xor(Box<Formula>, Box<Formula>),
    Forall(TypedName, Box<Formula>),
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Card(c) => write!(f, "({} {} {} {})", c.kind.keyword(), c.pattern, c.k, c.value),
            Formula::Appear(p) => write!(f, "(appear {p})"),
            Formula::Not(b) => write!(f, "(not {b})"),
            Formula::And(xs) | Formula::Or(xs) => {
                f.write_str(if matches!(self, Formula::And(_)) { "(and" } else { "(or" })?;
                for x in xs {
                    write!(f, " {x}")?;
                }
                f.write_str(")")
            }
            Formula::Xor(a, b) => write!(f, "(xor {a} {b})"),
            Formula::Forall(v, b) => write!(f, "(forall ({} - {}) {b})", v.name, v.typ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityConstraint {
    pub scope: Scope,
    pub body: Formula,
}

impl fmt::Display for ValidityConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {})", self.scope, self.body)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateKind {
    LRUDSquareGrid,
}

/// Grid direction, in template argument order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn inverse(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralTemplate {
    pub kind: TemplateKind,
    pub type_arg: String,
    /// up, down, left, right.
    pub predicate_args: [String; 4],
    pub aux_param: String,
}

impl StructuralTemplate {
    pub fn predicate(&self, dir: Direction) -> &str {
        &self.predicate_args[dir.index()]
    }

    pub fn direction_of(&self, predicate: &str) -> Option<Direction> {
        Direction::ALL
            .into_iter()
            .find(|d| self.predicate(*d) == predicate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntBound {
    pub fluent: String,
    pub kind: BoundKind,
    pub value: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValiditySpec {
    pub constraints: Vec<ValidityConstraint>,
    pub structures: Vec<StructuralTemplate>,
    pub bounds: Vec<IntBound>,
    /// Generator parameters: `n_<type>` per leaf type not governed by a
    /// template, plus every template's auxiliary size parameter.
    pub params: BTreeSet<String>,
}

impl ValiditySpec {
    /// Effective `[min, max]` range of an integer fluent.
    pub fn range_of(&self, fluent: &str, int_max: i64) -> (i64, i64) {
        let mut lo = 0;
        let mut hi = int_max;
        for b in self.bounds.iter().filter(|b| b.fluent == fluent) {
            match b.kind {
                BoundKind::Min => lo = b.value,
                BoundKind::Max => hi = b.value,
            }
        }
        (lo, hi)
    }

    pub fn template_for(&self, typ: &str) -> Option<&StructuralTemplate> {
        self.structures.iter().find(|s| s.type_arg == typ)
    }

    pub fn count_in(&self, scope: Scope) -> usize {
        self.constraints.iter().filter(|c| c.scope == scope).count()
    }
}

/// Name of the cardinality parameter for objects of `typ`.
pub fn count_param(typ: &str) -> String {
    format!("n_{typ}")
}
