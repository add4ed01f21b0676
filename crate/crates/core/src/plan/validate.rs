//! Instance validity, checked by interpreting the constraints directly on
//! the problem rather than through the compiled model.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::PlanError;
use crate::augment::{
    count_param, FluentPattern, FluentValue, Formula, PatternArg, Scope, StructuralTemplate, ValiditySpec,
    DEFAULT_INT_MAX,
};
use crate::model::GeneratorConfig;
use crate::pddl::{DomainSpec, GroundAtom, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Objects,
    Cardinality,
    Appear,
    Logic,
    Structural,
    InverseCoherence,
    Bound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn kinds(&self) -> BTreeSet<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }

    fn push(&mut self, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            message: message.into(),
        });
    }
}

/// Parses `<typ>_<row>-<col>`.
pub fn grid_coords(name: &str, typ: &str) -> Option<(u64, u64)> {
    let rest = name.strip_prefix(typ)?.strip_prefix('_')?;
    let (r, c) = rest.split_once('-')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

/// Recovers the generator parameters from object counts.
pub fn infer_config(domain: &DomainSpec, inst: &ProblemInstance) -> Option<GeneratorConfig> {
    let spec = domain.validity.as_ref()?;
    let mut assignment = BTreeMap::new();
    for t in domain.leaf_types() {
        let n = inst.objects.iter().filter(|o| o.typ == t).count() as u64;
        match spec.template_for(t) {
            Some(tpl) => {
                let s = n.isqrt();
                if s * s != n {
                    return None;
                }
                assignment.insert(tpl.aux_param.clone(), s);
            }
            None => {
                assignment.insert(count_param(t), n);
            }
        }
    }
    Some(GeneratorConfig {
        assignment,
        seed: inst.provenance.as_ref().map_or(0, |p| p.seed),
        int_max: None,
    })
}

struct Checker<'a> {
    domain: &'a DomainSpec,
    inst: &'a ProblemInstance,
}

impl<'a> Checker<'a> {
    fn objects_of(&self, typ: &str) -> Vec<&'a str> {
        self.inst
            .objects
            .iter()
            .filter(|o| self.domain.is_subtype(&o.typ, typ))
            .map(|o| o.name.as_str())
            .collect()
    }

    fn matches(&self, p: &FluentPattern, env: &HashMap<String, String>, atom: &GroundAtom) -> bool {
        atom.predicate == p.predicate
            && atom.args.len() == p.args.len()
            && p.args.iter().zip(&atom.args).all(|(pa, a)| match pa {
                PatternArg::Wildcard => true,
                PatternArg::Const(c) => c == a,
                PatternArg::Var(v) => env.get(v) == Some(a),
            })
    }

    /// Number of ground atoms the pattern ranges over.
    fn instantiations(&self, p: &FluentPattern) -> usize {
        let Some(sig) = self.domain.signature(&p.predicate) else {
            return 0;
        };
        p.args
            .iter()
            .zip(sig)
            .map(|(a, t)| match a {
                PatternArg::Wildcard => self.objects_of(&t.typ).len(),
                _ => 1,
            })
            .product()
    }

    fn count(&self, p: &FluentPattern, value: FluentValue, scope: Scope, env: &HashMap<String, String>) -> usize {
        let set = match scope {
            Scope::Init => &self.inst.init,
            Scope::Goal => &self.inst.goal,
        };
        match value {
            FluentValue::Bool(b) => {
                let t = set.iter().filter(|a| self.matches(p, env, a)).count();
                if b {
                    t
                } else {
                    self.instantiations(p) - t
                }
            }
            FluentValue::Int(v) => self
                .inst
                .numeric
                .iter()
                .filter(|(a, x)| **x == v && self.matches(p, env, a))
                .count(),
        }
    }

    fn eval(&self, f: &Formula, scope: Scope, env: &mut HashMap<String, String>) -> bool {
        match f {
            Formula::Card(c) => c.kind.holds(self.count(&c.pattern, c.value, scope, env), c.k),
            Formula::Appear(p) => self.inst.goal.iter().any(|a| self.matches(p, env, a)),
            Formula::Not(b) => !self.eval(b, scope, env),
            Formula::And(xs) => xs.iter().all(|x| self.eval(x, scope, env)),
            Formula::Or(xs) => xs.iter().any(|x| self.eval(x, scope, env)),
            Formula::Xor(a, b) => self.eval(a, scope, env) != self.eval(b, scope, env),
            Formula::Forall(v, body) => {
                let prev = env.get(&v.name).cloned();
                let mut ok = true;
                for o in self.objects_of(&v.typ) {
                    env.insert(v.name.clone(), o.to_string());
                    if !self.eval(body, scope, env) {
                        ok = false;
                        break;
                    }
                }
                match prev {
                    Some(p) => env.insert(v.name.clone(), p),
                    None => env.remove(&v.name),
                };
                ok
            }
        }
    }

    /// Unrolls top-level quantifiers and conjunctions so that each failing
    /// instantiation is reported on its own.
    fn check(&self, f: &Formula, scope: Scope, env: &mut HashMap<String, String>, out: &mut ValidationReport) {
        match f {
            Formula::Forall(v, body) => {
                for o in self.objects_of(&v.typ) {
                    env.insert(v.name.clone(), o.to_string());
                    self.check(body, scope, env, out);
                }
                env.remove(&v.name);
            }
            Formula::And(xs) => {
                for x in xs {
                    self.check(x, scope, env, out);
                }
            }
            _ if self.eval(f, scope, env) => {}
            _ => {
                let kind = match f {
                    Formula::Card(_) => ViolationKind::Cardinality,
                    Formula::Appear(_) => ViolationKind::Appear,
                    Formula::Not(b) if matches!(**b, Formula::Appear(_)) => ViolationKind::Appear,
                    _ => ViolationKind::Logic,
                };
                let mut binding: Vec<_> = env.iter().map(|(k, v)| format!("{k}={v}")).collect();
                binding.sort();
                let at = if binding.is_empty() {
                    String::new()
                } else {
                    format!(" with {}", binding.join(", "))
                };
                out.push(kind, format!("({scope} {f}) fails{at}"));
            }
        }
    }
}

fn check_objects(domain: &DomainSpec, spec: &ValiditySpec, inst: &ProblemInstance, config: &GeneratorConfig, out: &mut ValidationReport) {
    for t in domain.leaf_types() {
        let n = inst.objects.iter().filter(|o| o.typ == t).count() as u64;
        let (param, expected) = match spec.template_for(t) {
            Some(tpl) => {
                let s = config.get(&tpl.aux_param);
                (tpl.aux_param.clone(), s.map(|s| s * s))
            }
            None => {
                let p = count_param(t);
                (p.clone(), config.get(&p))
            }
        };
        match expected {
            Some(e) if e != n => out.push(
                ViolationKind::Objects,
                format!("{n} objects of type `{t}`, but {param} requires {e}"),
            ),
            None => out.push(ViolationKind::Objects, format!("configuration lacks `{param}`")),
            _ => {}
        }
    }
}

fn check_grid(tpl: &StructuralTemplate, inst: &ProblemInstance, domain: &DomainSpec, side: u64, out: &mut ValidationReport) {
    let typ = &tpl.type_arg;
    let mut coords = HashMap::new();
    let mut taken = BTreeSet::new();
    for o in inst.objects_of(domain, typ) {
        match grid_coords(o, typ) {
            Some((r, c)) if r < side && c < side && taken.insert((r, c)) => {
                coords.insert(o, (r, c));
            }
            _ => out.push(
                ViolationKind::Objects,
                format!("`{o}` is not a distinct {typ}_<row>-<col> name on a {side}x{side} grid"),
            ),
        }
    }
    let adjacent = |pred: usize, (xr, xc): (u64, u64), (yr, yc): (u64, u64)| match pred {
        // up, down, left, right
        0 => xc == yc && xr + 1 == yr,
        1 => xc == yc && xr == yr + 1,
        2 => xr == yr && xc + 1 == yc,
        _ => xr == yr && xc == yc + 1,
    };
    let tiles: Vec<(&str, (u64, u64))> = {
        let mut v: Vec<_> = coords.iter().map(|(k, v)| (*k, *v)).collect();
        v.sort();
        v
    };
    for (d, pred) in tpl.predicate_args.iter().enumerate() {
        for &(x, cx) in &tiles {
            for &(y, cy) in &tiles {
                let atom = GroundAtom::new(pred.as_str(), [x, y]);
                let present = inst.init.contains(&atom);
                let expected = adjacent(d, cx, cy);
                if present != expected {
                    let what = if expected { "missing" } else { "unexpected" };
                    out.push(ViolationKind::Structural, format!("{what} {atom}"));
                }
            }
        }
    }
    // Mutual inverses, read off the atoms actually present.
    for (a, b) in [(0, 1), (2, 3)] {
        let (pa, pb) = (&tpl.predicate_args[a], &tpl.predicate_args[b]);
        for atom in &inst.init {
            let partner = if &atom.predicate == pa {
                pb
            } else if &atom.predicate == pb {
                pa
            } else {
                continue;
            };
            let inv = GroundAtom::new(partner.as_str(), [&atom.args[1], &atom.args[0]]);
            if !inst.init.contains(&inv) {
                out.push(ViolationKind::InverseCoherence, format!("{atom} without {inv}"));
            }
        }
    }
}

/// Checks `inst` against the domain's instance constraints. Without a
/// configuration the parameters are inferred from the objects.
pub fn validate_instance(
    domain: &DomainSpec,
    inst: &ProblemInstance,
    config: Option<&GeneratorConfig>,
) -> Result<ValidationReport, PlanError> {
    let spec = domain.validity.as_ref().ok_or(PlanError::NoValiditySpec)?;
    let mut out = ValidationReport::default();
    let inferred;
    let config = match config {
        Some(c) => c,
        None => match infer_config(domain, inst) {
            Some(c) => {
                inferred = c;
                &inferred
            }
            None => {
                out.push(ViolationKind::Objects, "grid objects do not form a square");
                return Ok(out);
            }
        },
    };
    check_objects(domain, spec, inst, config, &mut out);
    let checker = Checker { domain, inst };
    let mut env = HashMap::new();
    for c in &spec.constraints {
        checker.check(&c.body, c.scope, &mut env, &mut out);
    }
    for tpl in &spec.structures {
        let side = config.get(&tpl.aux_param).unwrap_or(0);
        check_grid(tpl, inst, domain, side, &mut out);
    }
    let int_max = config.int_max.unwrap_or(DEFAULT_INT_MAX);
    for f in &domain.functions {
        let (lo, hi) = spec.range_of(&f.name, int_max);
        for (atom, &v) in inst.numeric.iter().filter(|(a, _)| a.predicate == f.name) {
            if v < lo || v > hi {
                out.push(ViolationKind::Bound, format!("{atom} = {v} outside [{lo}, {hi}]"));
            }
        }
    }
    Ok(out)
}
