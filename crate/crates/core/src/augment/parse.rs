use std::collections::BTreeSet;

use super::{
    count_param, AugmentError, BoundKind, CardKind, CardinalityTerm, FluentPattern, FluentValue,
    Formula, IntBound, PatternArg, Scope, StructuralTemplate, TemplateKind, ValidityConstraint,
    ValiditySpec,
};
use crate::pddl::{is_identifier, is_variable, DomainSpec, TypedName, OBJECT};
use crate::sexpr::SExpr;

type Result<T> = std::result::Result<T, AugmentError>;

const GRID_KEYWORDS: [&str; 2] = ["islrudsquaregrid", "islrudquaregrid"];

fn syntax(e: &SExpr, msg: impl Into<String>) -> AugmentError {
    AugmentError::Syntax {
        pos: e.pos(),
        msg: msg.into(),
    }
}

/// Rewrites call-style forms `f(a, b)` (an atom immediately followed by a
/// list) into `(f a b)`.
fn normalize_calls(items: &[SExpr]) -> Vec<SExpr> {
    let mut out = Vec::with_capacity(items.len());
    let mut i = 0;
    while i < items.len() {
        match (&items[i], items.get(i + 1)) {
            (
                atom @ SExpr::Atom { .. },
                Some(SExpr::List {
                    items: args,
                    glued: true,
                    ..
                }),
            ) => {
                let mut call = vec![atom.clone()];
                call.extend(normalize_calls(args));
                out.push(SExpr::List {
                    items: call,
                    pos: atom.pos(),
                    glued: false,
                });
                i += 2;
            }
            (SExpr::List { items, pos, glued }, _) => {
                out.push(SExpr::List {
                    items: normalize_calls(items),
                    pos: *pos,
                    glued: *glued,
                });
                i += 1;
            }
            (atom, _) => {
                out.push(atom.clone());
                i += 1;
            }
        }
    }
    out
}

/// Analyzes an `(:instance-constraints ...)` section against the domain's
/// declarations.
pub fn parse_instance_constraints(section: &SExpr, domain: &DomainSpec) -> Result<ValiditySpec> {
    let items = section
        .as_list()
        .ok_or_else(|| syntax(section, "expected a section list"))?;
    let items = normalize_calls(items.get(1..).unwrap_or_default());
    let mut spec = ValiditySpec::default();
    for item in &items {
        let parts = item
            .as_list()
            .ok_or_else(|| syntax(item, format!("expected a constraint, found `{item}`")))?;
        let head = item
            .head_keyword()
            .ok_or_else(|| syntax(item, "constraint must start with a keyword"))?;
        match head.as_str() {
            "init" | "goal" => {
                let scope = if head == "init" { Scope::Init } else { Scope::Goal };
                if parts.len() < 2 {
                    return Err(syntax(item, format!("`{head}` needs a constraint")));
                }
                for body in &parts[1..] {
                    top_level(body, scope, domain, &mut spec)?;
                }
            }
            "min" | "max" => {
                let kind = if head == "min" { BoundKind::Min } else { BoundKind::Max };
                spec.bounds.push(parse_bound(item, parts, kind, domain)?);
            }
            other => return Err(AugmentError::UnknownKeyword(other.to_string())),
        }
    }
    check_bounds(&spec)?;
    spec.params = derive_params(&spec, domain)?;
    Ok(spec)
}

fn top_level(e: &SExpr, scope: Scope, domain: &DomainSpec, spec: &mut ValiditySpec) -> Result<()> {
    match e.head_keyword().as_deref() {
        Some("and") => {
            for child in &e.as_list().unwrap_or_default()[1..] {
                top_level(child, scope, domain, spec)?;
            }
            Ok(())
        }
        Some(k) if GRID_KEYWORDS.contains(&k) => {
            if scope != Scope::Init {
                return Err(AugmentError::MisplacedTemplate(k.to_string()));
            }
            let template = parse_grid(e, domain)?;
            if spec.template_for(&template.type_arg).is_some() {
                return Err(syntax(e, format!("second grid template over `{}`", template.type_arg)));
            }
            spec.structures.push(template);
            Ok(())
        }
        _ => {
            let body = parse_formula(e, scope, &mut Vec::new(), domain)?;
            spec.constraints
                .extend(split(body).into_iter().map(|body| ValidityConstraint { scope, body }));
            Ok(())
        }
    }
}

/// Distributes top-level conjunctions, also through quantifiers, so that
/// each resulting constraint carries a single body term.
fn split(f: Formula) -> Vec<Formula> {
    match f {
        Formula::And(xs) => xs.into_iter().flat_map(split).collect(),
        Formula::Forall(v, body) => split(*body)
            .into_iter()
            .map(|b| Formula::Forall(v.clone(), Box::new(b)))
            .collect(),
        other => vec![other],
    }
}

fn parse_formula(
    e: &SExpr,
    scope: Scope,
    env: &mut Vec<TypedName>,
    domain: &DomainSpec,
) -> Result<Formula> {
    let parts = e
        .as_list()
        .ok_or_else(|| syntax(e, format!("expected a formula, found `{e}`")))?;
    let head = e
        .head_keyword()
        .ok_or_else(|| syntax(e, "formula must start with a keyword"))?;
    let args = &parts[1..];
    match head.as_str() {
        "and" | "or" => {
            let xs = args
                .iter()
                .map(|a| parse_formula(a, scope, env, domain))
                .collect::<Result<_>>()?;
            Ok(if head == "and" { Formula::And(xs) } else { Formula::Or(xs) })
        }
        "not" => match args {
            [x] => Ok(Formula::Not(Box::new(parse_formula(x, scope, env, domain)?))),
            _ => Err(syntax(e, "`not` takes one operand")),
        },
        "xor" => match args {
            [a, b] => Ok(Formula::Xor(
                Box::new(parse_formula(a, scope, env, domain)?),
                Box::new(parse_formula(b, scope, env, domain)?),
            )),
            _ => Err(AugmentError::XorArity(args.len())),
        },
        "forall" => {
            let [vars, body] = args else {
                return Err(syntax(e, "expected `(forall (?v - type ...) body)`"));
            };
            let vars = parse_quantified(vars, domain)?;
            let n = vars.len();
            env.extend(vars.iter().cloned());
            let body = parse_formula(body, scope, env, domain);
            env.truncate(env.len() - n);
            let mut body = body?;
            for v in vars.into_iter().rev() {
                body = Formula::Forall(v, Box::new(body));
            }
            Ok(body)
        }
        "appear" => {
            if scope != Scope::Goal {
                return Err(AugmentError::AppearOutsideGoal);
            }
            match args {
                [p] => Ok(Formula::Appear(parse_pattern(p, env, domain, true)?)),
                _ => Err(syntax(e, "`appear` takes one fluent pattern")),
            }
        }
        "exactly-k" | "atleast-k" | "atmost-k" => {
            let kind = match head.as_str() {
                "exactly-k" => CardKind::ExactlyK,
                "atleast-k" => CardKind::AtLeastK,
                _ => CardKind::AtMostK,
            };
            let [p, k, value] = args else {
                return Err(syntax(e, format!("expected `({head} <pattern> <k> <value>)`")));
            };
            let is_fluent = p
                .as_list()
                .and_then(|l| l.first())
                .and_then(SExpr::as_atom)
                .is_some_and(|name| domain.function(name).is_some());
            let pattern = parse_pattern(p, env, domain, !is_fluent)?;
            let k = k
                .as_atom()
                .and_then(|k| k.parse::<u32>().ok())
                .ok_or_else(|| syntax(k, "k must be a nonnegative integer"))?;
            let value = parse_value(value, &pattern.predicate, is_fluent)?;
            if is_fluent && scope == Scope::Goal {
                return Err(syntax(e, "integer fluents cannot be constrained in the goal"));
            }
            Ok(Formula::Card(CardinalityTerm {
                kind,
                pattern,
                k,
                value,
            }))
        }
        k if GRID_KEYWORDS.contains(&k) => Err(AugmentError::MisplacedTemplate(k.to_string())),
        other => Err(AugmentError::UnknownKeyword(other.to_string())),
    }
}

fn parse_quantified(e: &SExpr, domain: &DomainSpec) -> Result<Vec<TypedName>> {
    let items = e
        .as_list()
        .ok_or_else(|| syntax(e, "expected quantified variable list"))?;
    let mut out = Vec::new();
    let mut pending = Vec::new();
    let mut i = 0;
    while i < items.len() {
        match items[i].as_atom() {
            Some("-") => {
                let typ = items
                    .get(i + 1)
                    .and_then(SExpr::as_atom)
                    .ok_or_else(|| syntax(&items[i], "missing type after `-`"))?;
                if !domain.has_type(typ) {
                    return Err(AugmentError::UndeclaredType(typ.to_string()));
                }
                out.extend(pending.drain(..).map(|v: String| TypedName::new(v, typ)));
                i += 2;
            }
            Some(v) if is_variable(v) => {
                pending.push(v.to_string());
                i += 1;
            }
            _ => return Err(syntax(&items[i], "expected quantified variable")),
        }
    }
    out.extend(pending.into_iter().map(|v| TypedName::new(v, OBJECT)));
    if out.is_empty() {
        return Err(syntax(e, "empty quantifier"));
    }
    Ok(out)
}

fn parse_pattern(
    e: &SExpr,
    env: &[TypedName],
    domain: &DomainSpec,
    want_predicate: bool,
) -> Result<FluentPattern> {
    let items = e
        .as_list()
        .ok_or_else(|| syntax(e, format!("expected a fluent pattern, found `{e}`")))?;
    let predicate = items
        .first()
        .and_then(SExpr::as_atom)
        .ok_or_else(|| syntax(e, "empty fluent pattern"))?
        .to_string();
    let sig = if want_predicate {
        domain.predicate(&predicate).map(|p| &p.params)
    } else {
        domain.function(&predicate).map(|f| &f.params)
    }
    .ok_or_else(|| AugmentError::UnknownPredicate(predicate.clone()))?;
    if sig.len() != items.len() - 1 {
        return Err(AugmentError::PatternArity {
            predicate,
            expected: sig.len(),
            found: items.len() - 1,
        });
    }
    let mut args = Vec::new();
    for (item, param) in items[1..].iter().zip(sig) {
        let text = item
            .as_atom()
            .ok_or_else(|| syntax(item, "pattern arguments must be atoms"))?;
        let arg = if text == "_" {
            PatternArg::Wildcard
        } else if is_variable(text) {
            let bound = env
                .iter()
                .rev()
                .find(|v| v.name == text)
                .ok_or_else(|| AugmentError::UnboundVariable(text.to_string()))?;
            if !domain.is_subtype(&bound.typ, &param.typ) {
                return Err(AugmentError::TypeMismatch {
                    predicate,
                    var: text.to_string(),
                    expected: param.typ.clone(),
                    found: bound.typ.clone(),
                });
            }
            PatternArg::Var(text.to_string())
        } else if is_identifier(text) {
            PatternArg::Const(text.to_string())
        } else {
            return Err(syntax(item, format!("bad pattern argument `{text}`")));
        };
        args.push(arg);
    }
    Ok(FluentPattern { predicate, args })
}

fn parse_value(e: &SExpr, predicate: &str, integer: bool) -> Result<FluentValue> {
    let text = e.as_atom().unwrap_or_default();
    let bad = || AugmentError::BadValue {
        predicate: predicate.to_string(),
        value: e.to_string(),
    };
    if integer {
        text.parse().map(FluentValue::Int).map_err(|_| bad())
    } else {
        match text.to_ascii_lowercase().as_str() {
            "true" => Ok(FluentValue::Bool(true)),
            "false" => Ok(FluentValue::Bool(false)),
            _ => Err(bad()),
        }
    }
}

fn parse_grid(e: &SExpr, domain: &DomainSpec) -> Result<StructuralTemplate> {
    let parts = e.as_list().unwrap_or_default();
    let names: Vec<&str> = parts[1..]
        .iter()
        .map(|p| p.as_atom().ok_or_else(|| syntax(p, "expected identifier")))
        .collect::<Result<_>>()?;
    if names.len() != 5 && names.len() != 6 {
        return Err(syntax(
            e,
            "expected `(isLRUDSquareGrid <type> <up> <down> <left> <right> [<size-param>])`",
        ));
    }
    let typ = names[0];
    if !domain.has_type(typ) {
        return Err(AugmentError::UndeclaredType(typ.to_string()));
    }
    for p in &names[1..5] {
        let decl = domain
            .predicate(p)
            .ok_or_else(|| AugmentError::UnknownPredicate(p.to_string()))?;
        let ok = decl.params.len() == 2
            && decl
                .params
                .iter()
                .all(|param| domain.is_subtype(typ, &param.typ));
        if !ok {
            return Err(AugmentError::TemplateSignature(p.to_string()));
        }
    }
    let aux = names
        .get(5)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("{typ}_size"));
    Ok(StructuralTemplate {
        kind: TemplateKind::LRUDSquareGrid,
        type_arg: typ.to_string(),
        predicate_args: [names[1], names[2], names[3], names[4]].map(str::to_string),
        aux_param: aux,
    })
}

fn parse_bound(e: &SExpr, parts: &[SExpr], kind: BoundKind, domain: &DomainSpec) -> Result<IntBound> {
    let [_, name, value] = parts else {
        return Err(syntax(e, "expected `(min|max <fluent> <int>)`"));
    };
    let fluent = name
        .as_atom()
        .ok_or_else(|| syntax(name, "expected fluent name"))?;
    if domain.function(fluent).is_none() {
        return Err(AugmentError::NotIntegerFluent(fluent.to_string()));
    }
    let value = value
        .as_atom()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| syntax(value, "expected integer bound"))?;
    Ok(IntBound {
        fluent: fluent.to_string(),
        kind,
        value,
    })
}

fn check_bounds(spec: &ValiditySpec) -> Result<()> {
    for b in &spec.bounds {
        if spec
            .bounds
            .iter()
            .filter(|o| o.fluent == b.fluent && o.kind == b.kind)
            .count()
            > 1
        {
            return Err(AugmentError::InvalidBounds {
                fluent: b.fluent.clone(),
                min: spec.range_of(&b.fluent, i64::MAX).0,
                max: spec.range_of(&b.fluent, i64::MAX).1,
            });
        }
        let (min, max) = spec.range_of(&b.fluent, i64::MAX);
        if min > max {
            return Err(AugmentError::InvalidBounds {
                fluent: b.fluent.clone(),
                min,
                max,
            });
        }
    }
    Ok(())
}

fn derive_params(spec: &ValiditySpec, domain: &DomainSpec) -> Result<BTreeSet<String>> {
    let mut params = BTreeSet::new();
    for typ in domain.leaf_types() {
        if spec.template_for(typ).is_none() {
            params.insert(count_param(typ));
        }
    }
    for s in &spec.structures {
        if !params.insert(s.aux_param.clone()) {
            return Err(AugmentError::DuplicateParam(s.aux_param.clone()));
        }
    }
    Ok(params)
}
