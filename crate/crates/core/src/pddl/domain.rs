use std::collections::HashSet;

use super::{
    is_identifier, is_variable, ActionSchema, AtomSchema, DomainSpec, FunctionDecl, Literal,
    PddlError, PredicateDecl, Result, TypeDecl, TypedName, OBJECT,
};
use crate::augment;
use crate::sexpr::{self, Pos, SExpr};

pub(super) fn syntax(pos: Pos, msg: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        pos,
        msg: msg.into(),
    }
}

pub(super) fn expect_list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr]> {
    e.as_list()
        .ok_or_else(|| syntax(e.pos(), format!("expected a list for {what}, found `{e}`")))
}

pub(super) fn expect_ident(e: &SExpr, what: &str) -> Result<String> {
    match e.as_atom() {
        Some(s) if is_identifier(s) => Ok(s.to_string()),
        _ => Err(syntax(e.pos(), format!("expected {what} identifier, found `{e}`"))),
    }
}

/// Parses `(define (<kind> <name>) ...)`, returning the name and the sections.
pub(super) fn parse_define<'a>(form: &'a SExpr, kind: &str) -> Result<(String, &'a [SExpr])> {
    let items = expect_list(form, "define")?;
    if form.head_keyword().as_deref() != Some("define") {
        return Err(syntax(form.pos(), "expected `(define ...)`"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| syntax(form.pos(), format!("missing `({kind} <name>)` header")))?;
    let hitems = expect_list(header, "header")?;
    if header.head_keyword().as_deref() != Some(kind) || hitems.len() != 2 {
        return Err(syntax(header.pos(), format!("expected `({kind} <name>)`")));
    }
    Ok((expect_ident(&hitems[1], kind)?, &items[2..]))
}

/// Parses `a b - t c - u d` style lists. Variables are required when
/// `variables` is set, plain identifiers otherwise.
pub(super) fn parse_typed_list(items: &[SExpr], variables: bool) -> Result<Vec<TypedName>> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        match item.as_atom() {
            Some("-") => {
                let typ = items
                    .get(i + 1)
                    .ok_or_else(|| syntax(item.pos(), "missing type after `-`"))?;
                if typ.head_keyword().as_deref() == Some("either") {
                    return Err(PddlError::Unsupported("`either` types".into()));
                }
                let typ = expect_ident(typ, "type")?;
                if pending.is_empty() {
                    return Err(syntax(item.pos(), "`-` without preceding names"));
                }
                out.extend(pending.drain(..).map(|n| TypedName::new(n, typ.clone())));
                i += 2;
            }
            Some(s) if variables && is_variable(s) => {
                pending.push(s.to_string());
                i += 1;
            }
            Some(s) if !variables && is_identifier(s) => {
                pending.push(s.to_string());
                i += 1;
            }
            _ => {
                let what = if variables { "variable" } else { "name" };
                return Err(syntax(item.pos(), format!("expected {what}, found `{item}`")));
            }
        }
    }
    out.extend(pending.into_iter().map(|n| TypedName::new(n, OBJECT)));
    Ok(out)
}

/// Parses a domain file. With `augmented` set, an `:instance-constraints`
/// section is analyzed into [`DomainSpec::validity`]; otherwise it is skipped.
pub fn parse_domain(text: &str, augmented: bool) -> Result<DomainSpec> {
    let form = sexpr::parse_one(text)?;
    let (name, sections) = parse_define(&form, "domain")?;
    let mut domain = DomainSpec {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        predicates: Vec::new(),
        functions: Vec::new(),
        actions: Vec::new(),
        validity: None,
    };
    let mut constraints_section = None;
    let mut actions = Vec::new();
    for section in sections {
        let items = expect_list(section, "section")?;
        let key = section
            .head_keyword()
            .ok_or_else(|| syntax(section.pos(), "section must start with a keyword"))?;
        match key.as_str() {
            ":requirements" => {
                for r in &items[1..] {
                    let r = r
                        .as_atom()
                        .filter(|r| r.starts_with(':'))
                        .ok_or_else(|| syntax(r.pos(), "expected requirement flag"))?;
                    domain.requirements.push(r.to_ascii_lowercase());
                }
            }
            ":types" => {
                for t in parse_typed_list(&items[1..], false)? {
                    if t.name == OBJECT {
                        continue;
                    }
                    if domain.types.iter().any(|d| d.name == t.name) {
                        return Err(PddlError::Duplicate {
                            kind: "type",
                            name: t.name,
                        });
                    }
                    domain.types.push(TypeDecl {
                        name: t.name,
                        parent: t.typ,
                    });
                }
            }
            ":predicates" => {
                for p in &items[1..] {
                    let decl = parse_signature(p)?;
                    if domain.predicates.iter().any(|q| q.name == decl.0) {
                        return Err(PddlError::Duplicate {
                            kind: "predicate",
                            name: decl.0,
                        });
                    }
                    domain.predicates.push(PredicateDecl {
                        name: decl.0,
                        params: decl.1,
                    });
                }
            }
            ":functions" => {
                let mut i = 1;
                while i < items.len() {
                    let f = &items[i];
                    let (name, params) = parse_signature(f)?;
                    i += 1;
                    if items.get(i).and_then(SExpr::as_atom) == Some("-") {
                        match items.get(i + 1).and_then(SExpr::as_atom) {
                            Some("number" | "int" | "integer") => i += 2,
                            _ => return Err(PddlError::Unsupported("non-numeric function type".into())),
                        }
                    }
                    if domain.functions.iter().any(|q| q.name == name)
                        || domain.predicates.iter().any(|q| q.name == name)
                    {
                        return Err(PddlError::Duplicate { kind: "function", name });
                    }
                    domain.functions.push(FunctionDecl { name, params });
                }
            }
            ":action" => actions.push(section),
            ":instance-constraints" => constraints_section = Some(section),
            other => return Err(PddlError::UnknownSection(other.to_string())),
        }
    }

    for t in &domain.types {
        if !domain.has_type(&t.parent) {
            return Err(PddlError::UndeclaredType(t.parent.clone()));
        }
    }
    for params in domain
        .predicates
        .iter()
        .map(|p| &p.params)
        .chain(domain.functions.iter().map(|f| &f.params))
    {
        for p in params {
            if !domain.has_type(&p.typ) {
                return Err(PddlError::UndeclaredType(p.typ.clone()));
            }
        }
    }
    for a in actions {
        let action = parse_action(a, &domain)?;
        if domain.action(&action.name).is_some() {
            return Err(PddlError::Duplicate {
                kind: "action",
                name: action.name,
            });
        }
        domain.actions.push(action);
    }
    if augmented {
        if let Some(section) = constraints_section {
            domain.validity = Some(augment::parse_instance_constraints(section, &domain)?);
        }
    }
    Ok(domain)
}

fn parse_signature(e: &SExpr) -> Result<(String, Vec<TypedName>)> {
    let items = expect_list(e, "declaration")?;
    let name = items
        .first()
        .ok_or_else(|| syntax(e.pos(), "empty declaration"))
        .and_then(|n| expect_ident(n, "predicate"))?;
    Ok((name, parse_typed_list(&items[1..], true)?))
}

fn parse_action(section: &SExpr, domain: &DomainSpec) -> Result<ActionSchema> {
    let items = expect_list(section, "action")?;
    let name = items
        .get(1)
        .ok_or_else(|| syntax(section.pos(), "action without a name"))
        .and_then(|n| expect_ident(n, "action"))?;
    let mut params = None;
    let mut pre = None;
    let mut eff = None;
    let mut i = 2;
    while i < items.len() {
        let key = items[i]
            .as_atom()
            .map(str::to_ascii_lowercase)
            .ok_or_else(|| syntax(items[i].pos(), "expected action keyword"))?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| syntax(items[i].pos(), format!("missing value for {key}")))?;
        let slot = match key.as_str() {
            ":parameters" => &mut params,
            ":precondition" => &mut pre,
            ":effect" => &mut eff,
            other => return Err(PddlError::Unsupported(format!("action key {other}"))),
        };
        if slot.replace(value).is_some() {
            return Err(syntax(items[i].pos(), format!("repeated {key}")));
        }
        i += 2;
    }
    let params = match params {
        Some(p) => parse_typed_list(expect_list(p, "parameters")?, true)?,
        None => Vec::new(),
    };
    let mut seen = HashSet::new();
    for p in &params {
        if !domain.has_type(&p.typ) {
            return Err(PddlError::UndeclaredType(p.typ.clone()));
        }
        if !seen.insert(p.name.as_str()) {
            return Err(PddlError::Duplicate {
                kind: "parameter",
                name: p.name.clone(),
            });
        }
    }

    let mut precondition = Vec::new();
    if let Some(pre) = pre {
        for lit in conjuncts(pre)? {
            precondition.push(parse_literal(lit)?);
        }
    }
    let mut add = Vec::new();
    let mut del = Vec::new();
    if let Some(eff) = eff {
        for lit in conjuncts(eff)? {
            let l = parse_literal(lit)?;
            if l.positive {
                add.push(l.atom);
            } else {
                del.push(l.atom);
            }
        }
    }

    let action = ActionSchema {
        name,
        params,
        precondition,
        add,
        del,
    };
    let atoms = action
        .precondition
        .iter()
        .map(|l| &l.atom)
        .chain(&action.add)
        .chain(&action.del);
    for atom in atoms {
        check_schema_atom(domain, &action, atom)?;
    }
    if let Some(a) = action.add.iter().find(|a| action.del.contains(a)) {
        return Err(PddlError::AddDeleteOverlap {
            action: action.name.clone(),
            atom: a.to_string(),
        });
    }
    Ok(action)
}

/// Flattens `(and ...)`; `()` is the empty conjunction.
fn conjuncts(e: &SExpr) -> Result<Vec<&SExpr>> {
    let items = expect_list(e, "formula")?;
    match e.head_keyword().as_deref() {
        None => Ok(Vec::new()),
        Some("and") => {
            let mut out = Vec::new();
            for item in &items[1..] {
                out.extend(conjuncts(item)?);
            }
            Ok(out)
        }
        _ => Ok(vec![e]),
    }
}

fn parse_literal(e: &SExpr) -> Result<Literal> {
    let items = expect_list(e, "literal")?;
    match e.head_keyword().as_deref() {
        Some("not") => {
            if items.len() != 2 {
                return Err(syntax(e.pos(), "`not` takes one argument"));
            }
            Ok(Literal {
                atom: parse_atom_schema(&items[1])?,
                positive: false,
            })
        }
        Some(
            k @ ("or" | "forall" | "exists" | "when" | "imply" | "=" | "increase" | "decrease"
            | "assign" | "scale-up" | "scale-down"),
        ) => Err(PddlError::Unsupported(format!("`{k}` in actions"))),
        _ => Ok(Literal {
            atom: parse_atom_schema(e)?,
            positive: true,
        }),
    }
}

fn parse_atom_schema(e: &SExpr) -> Result<AtomSchema> {
    let items = expect_list(e, "atom")?;
    let predicate = items
        .first()
        .ok_or_else(|| syntax(e.pos(), "empty atom"))
        .and_then(|p| expect_ident(p, "predicate"))?;
    let args = items[1..]
        .iter()
        .map(|a| match a.as_atom() {
            Some(s) if is_variable(s) => Ok(s.to_string()),
            Some(s) if is_identifier(s) => Err(PddlError::Unsupported(format!(
                "constant `{s}` in action schema"
            ))),
            _ => Err(syntax(a.pos(), format!("expected variable, found `{a}`"))),
        })
        .collect::<Result<_>>()?;
    Ok(AtomSchema { predicate, args })
}

fn check_schema_atom(domain: &DomainSpec, action: &ActionSchema, atom: &AtomSchema) -> Result<()> {
    let decl = domain
        .predicate(&atom.predicate)
        .ok_or_else(|| PddlError::UndeclaredPredicate(atom.predicate.clone()))?;
    if decl.params.len() != atom.args.len() {
        return Err(PddlError::Arity {
            predicate: atom.predicate.clone(),
            expected: decl.params.len(),
            found: atom.args.len(),
        });
    }
    for (arg, param) in atom.args.iter().zip(&decl.params) {
        let bound = action
            .params
            .iter()
            .find(|p| &p.name == arg)
            .ok_or_else(|| PddlError::UnboundVariable {
                var: arg.clone(),
                context: action.name.clone(),
            })?;
        if !domain.is_subtype(&bound.typ, &param.typ) {
            return Err(PddlError::TypeMismatch {
                predicate: atom.predicate.clone(),
                arg: arg.clone(),
                expected: param.typ.clone(),
                found: bound.typ.clone(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::fixtures::FLOOR_TILE;

    #[test]
    fn floor_tile_domain() {
        let d = parse_domain(FLOOR_TILE, false).unwrap();
        assert_eq!(d.name, "floor-tile");
        assert_eq!(d.predicates.len(), 10);
        let names: Vec<_> = d.predicates.iter().map(|p| p.name.as_str()).collect();
        for p in [
            "robot-at",
            "up",
            "down",
            "right",
            "left",
            "clear",
            "painted",
            "robot-has",
            "available-color",
        ] {
            assert!(names.contains(&p), "{p}");
        }
        let mv = d.action("move_up").unwrap();
        assert_eq!(mv.params.len(), 3);
        assert_eq!(mv.precondition.len(), 3);
        assert_eq!(mv.effect_count(), 4);
        assert_eq!(d.actions.len(), 7);
        assert!(d.validity.is_none());
    }

    #[test]
    fn empty_predicates_section() {
        let d = parse_domain("(define (domain e) (:predicates))", false).unwrap();
        assert!(d.predicates.is_empty());
    }

    #[test]
    fn undeclared_parameter_type() {
        let err = parse_domain(
            "(define (domain e) (:types bar) (:predicates (p ?x - bar))
               (:action a :parameters (?x - foo) :precondition (p ?x) :effect (not (p ?x))))",
            false,
        )
        .unwrap_err();
        assert_eq!(err, PddlError::UndeclaredType("foo".into()));
        assert!(err.to_string().contains("foo"));
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let d = parse_domain(
            "(DEFINE (DOMAIN Mixed) (:Types Thing) (:PREDICATES (On ?x - Thing))
               (:Action Flip :Parameters (?x - Thing) :Precondition (On ?x) :Effect (NOT (On ?x))))",
            false,
        )
        .unwrap();
        assert_eq!(d.name, "Mixed");
        assert_eq!(d.predicates[0].name, "On");
        assert_eq!(d.actions[0].del.len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            parse_domain("(define (domain e) (:derived (p) (q)))", false),
            Err(PddlError::UnknownSection(s)) if s == ":derived"
        ));
        assert!(matches!(
            parse_domain(
                "(define (domain e) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (p ?x ?x) :effect ()))",
                false
            ),
            Err(PddlError::Arity { expected: 1, found: 2, .. })
        ));
        assert!(matches!(
            parse_domain(
                "(define (domain e) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (q ?x) :effect ()))",
                false
            ),
            Err(PddlError::UndeclaredPredicate(p)) if p == "q"
        ));
        assert!(matches!(
            parse_domain(
                "(define (domain e) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (p ?y) :effect ()))",
                false
            ),
            Err(PddlError::UnboundVariable { .. })
        ));
        assert!(matches!(
            parse_domain(
                "(define (domain e) (:predicates (p ?x)) (:action a :parameters (?x) :effect (and (p ?x) (not (p ?x)))))",
                false
            ),
            Err(PddlError::AddDeleteOverlap { .. })
        ));
        assert!(matches!(
            parse_domain("(define (domain e) (:types a - (either b c)))", false),
            Err(PddlError::Unsupported(_))
        ));
        assert!(matches!(
            parse_domain("(define (domain e) (:predicates (p ?x - object) (p ?y)))", false),
            Err(PddlError::Duplicate { kind: "predicate", .. })
        ));
        assert!(matches!(
            parse_domain("(define (domain e) {)", false),
            Err(PddlError::Lex(_))
        ));
    }

    #[test]
    fn instance_constraints_only_when_augmented() {
        let plain = parse_domain(FLOOR_TILE, false).unwrap();
        assert!(plain.validity.is_none());
        let aug = parse_domain(FLOOR_TILE, true).unwrap();
        assert!(aug.validity.is_some());
    }
}
