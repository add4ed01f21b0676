use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    AugmentError, CardKind, FluentPattern, FluentValue, Formula, IntBound, PatternArg, Scope,
    StructuralTemplate, ValiditySpec,
};
use crate::pddl::{DomainSpec, GroundAtom, TypedName};

/// A cardinality term over an explicit atom set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundCard {
    pub kind: CardKind,
    pub atoms: Vec<GroundAtom>,
    pub k: u32,
    pub value: FluentValue,
    /// Number of wildcard positions in the source pattern.
    pub wildcards: usize,
}

impl GroundCard {
    /// Whether the term ranges over integer fluents rather than predicates.
    pub fn is_numeric(&self) -> bool {
        matches!(self.value, FluentValue::Int(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroundFormula {
    Card(GroundCard),
    /// Holds when at least one of the atoms is in the goal.
    Appear(Vec<GroundAtom>),
    Not(Box<GroundFormula>),
    And(Vec<GroundFormula>),
    Or(Vec<GroundFormula>),
    Xor(Box<GroundFormula>, Box<GroundFormula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundConstraint {
    pub scope: Scope,
    pub body: GroundFormula,
    /// Source constraint with the quantifier binding, for diagnostics.
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundedValiditySpec {
    pub constraints: Vec<GroundConstraint>,
    pub structures: Vec<StructuralTemplate>,
    pub bounds: Vec<IntBound>,
}

struct Grounder<'a> {
    domain: &'a DomainSpec,
    objects: &'a [TypedName],
    types: HashMap<&'a str, &'a str>,
}

impl<'a> Grounder<'a> {
    fn objects_of(&self, typ: &str) -> Vec<&'a str> {
        self.objects
            .iter()
            .filter(|o| self.domain.is_subtype(&o.typ, typ))
            .map(|o| o.name.as_str())
            .collect()
    }

    fn atoms(&self, pattern: &FluentPattern, env: &HashMap<String, String>) -> Result<Vec<GroundAtom>, AugmentError> {
        let sig = self
            .domain
            .signature(&pattern.predicate)
            .ok_or_else(|| AugmentError::UnknownPredicate(pattern.predicate.clone()))?;
        let mut choices: Vec<Vec<&str>> = Vec::with_capacity(sig.len());
        for (arg, param) in pattern.args.iter().zip(sig) {
            choices.push(match arg {
                PatternArg::Wildcard => self.objects_of(&param.typ),
                PatternArg::Var(v) => {
                    let o = env
                        .get(v)
                        .ok_or_else(|| AugmentError::UnboundVariable(v.clone()))?;
                    vec![o.as_str()]
                }
                PatternArg::Const(c) => {
                    let ok = self
                        .types
                        .get(c.as_str())
                        .is_some_and(|t| self.domain.is_subtype(t, &param.typ));
                    if !ok {
                        return Err(AugmentError::UnknownObject(c.clone()));
                    }
                    vec![c.as_str()]
                }
            });
        }
        let mut out = vec![Vec::new()];
        for options in &choices {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<&str>| {
                    options.iter().map(move |o| {
                        let mut p = prefix.clone();
                        p.push(o);
                        p
                    })
                })
                .collect();
        }
        Ok(out
            .into_iter()
            .map(|args| GroundAtom::new(pattern.predicate.clone(), args))
            .collect())
    }

    fn formula(&self, f: &Formula, env: &mut HashMap<String, String>) -> Result<GroundFormula, AugmentError> {
        Ok(match f {
            Formula::Card(c) => GroundFormula::Card(GroundCard {
                kind: c.kind,
                atoms: self.atoms(&c.pattern, env)?,
                k: c.k,
                value: c.value,
                wildcards: c.pattern.wildcards(),
            }),
            Formula::Appear(p) => GroundFormula::Appear(self.atoms(p, env)?),
            Formula::Not(x) => GroundFormula::Not(Box::new(self.formula(x, env)?)),
            Formula::And(xs) => GroundFormula::And(xs.iter().map(|x| self.formula(x, env)).collect::<Result<_, _>>()?),
            Formula::Or(xs) => GroundFormula::Or(xs.iter().map(|x| self.formula(x, env)).collect::<Result<_, _>>()?),
            Formula::Xor(a, b) => GroundFormula::Xor(Box::new(self.formula(a, env)?), Box::new(self.formula(b, env)?)),
            Formula::Forall(v, body) => {
                let mut parts = Vec::new();
                for o in self.objects_of(&v.typ) {
                    let saved = env.insert(v.name.clone(), o.to_string());
                    let part = self.formula(body, env);
                    restore(env, &v.name, saved);
                    parts.push(part?);
                }
                GroundFormula::And(parts)
            }
        })
    }

    /// Unrolls top-level quantifiers and conjunctions into separate constraints.
    fn top(
        &self,
        scope: Scope,
        f: &Formula,
        env: &mut HashMap<String, String>,
        binding: &mut Vec<String>,
        origin: &str,
        out: &mut Vec<GroundConstraint>,
    ) -> Result<(), AugmentError> {
        match f {
            Formula::Forall(v, body) => {
                for o in self.objects_of(&v.typ) {
                    let saved = env.insert(v.name.clone(), o.to_string());
                    binding.push(format!("{}={o}", v.name));
                    let r = self.top(scope, body, env, binding, origin, out);
                    binding.pop();
                    restore(env, &v.name, saved);
                    r?;
                }
                Ok(())
            }
            Formula::And(xs) => xs
                .iter()
                .try_for_each(|x| self.top(scope, x, env, binding, origin, out)),
            _ => {
                let body = self.formula(f, env)?;
                if let GroundFormula::Card(c) = &body {
                    let need = match c.kind {
                        CardKind::AtMostK => 0,
                        _ => c.k as usize,
                    };
                    if need > c.atoms.len() {
                        return Err(AugmentError::StaticallyUnsat(format!(
                            "{origin} needs {need} of {} matching atoms",
                            c.atoms.len()
                        )));
                    }
                }
                let origin = if binding.is_empty() {
                    origin.to_string()
                } else {
                    format!("{origin} [{}]", binding.join(", "))
                };
                out.push(GroundConstraint { scope, body, origin });
                Ok(())
            }
        }
    }
}

fn restore(env: &mut HashMap<String, String>, name: &str, saved: Option<String>) {
    match saved {
        Some(prev) => env.insert(name.to_string(), prev),
        None => env.remove(name),
    };
}

/// Grounds every constraint of `spec` over a concrete object set.
pub fn expand(
    spec: &ValiditySpec,
    domain: &DomainSpec,
    objects: &[TypedName],
) -> Result<GroundedValiditySpec, AugmentError> {
    let g = Grounder {
        domain,
        objects,
        types: objects.iter().map(|o| (o.name.as_str(), o.typ.as_str())).collect(),
    };
    let mut constraints = Vec::new();
    for c in &spec.constraints {
        g.top(c.scope, &c.body, &mut HashMap::new(), &mut Vec::new(), &c.to_string(), &mut constraints)?;
    }
    Ok(GroundedValiditySpec {
        constraints,
        structures: spec.structures.clone(),
        bounds: spec.bounds.clone(),
    })
}
