use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{count_constraints, Constraint, ConstraintModel, Encoding, Lit, Tally, VarKind};
use crate::augment::Scope;

/// Machine-readable digest of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub encoding: Encoding,
    pub objects: usize,
    pub init_vars: usize,
    pub goal_vars: usize,
    pub int_vars: usize,
    pub aux_vars: usize,
    pub constraints: usize,
    pub total_functions: usize,
    pub counts: Tally,
}

impl ModelSummary {
    pub fn of(m: &ConstraintModel) -> Self {
        let mut s = ModelSummary {
            encoding: m.encoding,
            objects: m.objects.len(),
            init_vars: 0,
            goal_vars: 0,
            int_vars: 0,
            aux_vars: 0,
            constraints: m.constraints.len(),
            total_functions: m.total_functions.len(),
            counts: count_constraints(m),
        };
        for v in &m.variables {
            match v {
                VarKind::Bool { scope: Scope::Init, .. } => s.init_vars += 1,
                VarKind::Bool { scope: Scope::Goal, .. } => s.goal_vars += 1,
                VarKind::Int { .. } => s.int_vars += 1,
                VarKind::Aux => s.aux_vars += 1,
            }
        }
        s
    }
}

fn lit(m: &ConstraintModel, l: &Lit) -> String {
    let name = m.var_name(l.var);
    match (m.variables[l.var as usize].is_bool(), l.value, l.pos) {
        (true, 1, true) | (true, 0, false) => name,
        (true, _, _) => format!("!{name}"),
        (false, v, true) => format!("{name}={v}"),
        (false, v, false) => format!("{name}!={v}"),
    }
}

fn lits(m: &ConstraintModel, ls: &[Lit]) -> String {
    ls.iter().map(|l| lit(m, l)).collect::<Vec<_>>().join(" ")
}

/// Text listing: fixed values, total functions, then one constraint per line.
pub fn listing(m: &ConstraintModel) -> String {
    let mut out = String::new();
    for (v, x) in &m.fixed {
        let _ = writeln!(out, "fixed {} = {x}", m.var_name(*v));
    }
    for g in &m.total_functions {
        let names: Vec<String> = g.iter().map(|v| m.var_name(*v)).collect();
        let _ = writeln!(out, "function exactly-one [{}]", names.join(" "));
    }
    for c in &m.constraints {
        let line = match c {
            Constraint::Cardinality { lits: ls, cmp, k } => {
                format!("card {} {k} [{}]", cmp.symbol(), lits(m, ls))
            }
            Constraint::ReifiedCardinality {
                indicator,
                lits: ls,
                cmp,
                k,
            } => format!("reif {} <-> card {} {k} [{}]", m.var_name(*indicator), cmp.symbol(), lits(m, ls)),
            Constraint::Biconditional { a, b } => format!("iff {} {}", m.var_name(*a), m.var_name(*b)),
            Constraint::BiconditionalConst { a, value } => format!("const {} {value}", m.var_name(*a)),
            Constraint::Xor { a, b } => format!("xor {} {}", lit(m, a), lit(m, b)),
            Constraint::Implies { a, b } => format!("implies {} {}", lit(m, a), lit(m, b)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}
