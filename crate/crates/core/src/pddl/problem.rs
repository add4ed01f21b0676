use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::domain::{expect_ident, expect_list, parse_define, parse_typed_list, syntax};
use super::{check_ground, is_identifier, DomainSpec, GroundAtom, PddlError, ProblemInstance, Result};
use crate::sexpr::{self, SExpr};

/// Parses a problem file against an already-parsed domain.
pub fn parse_problem(text: &str, domain: &DomainSpec) -> Result<ProblemInstance> {
    let form = sexpr::parse_one(text)?;
    let (name, sections) = parse_define(&form, "problem")?;
    let mut domain_name = None;
    let mut objects = Vec::new();
    let mut init_section = None;
    let mut goal_section = None;
    for section in sections {
        let items = expect_list(section, "section")?;
        let key = section
            .head_keyword()
            .ok_or_else(|| syntax(section.pos(), "section must start with a keyword"))?;
        match key.as_str() {
            ":domain" => {
                let d = items
                    .get(1)
                    .ok_or_else(|| syntax(section.pos(), "missing domain name"))?;
                domain_name = Some(expect_ident(d, "domain")?);
            }
            ":requirements" => {}
            ":objects" => objects.extend(parse_typed_list(&items[1..], false)?),
            ":init" => init_section = Some(&items[1..]),
            ":goal" => goal_section = Some(section),
            other => return Err(PddlError::UnknownSection(other.to_string())),
        }
    }
    let domain_name = domain_name.ok_or(PddlError::MissingSection(":domain"))?;
    if domain_name != domain.name {
        return Err(PddlError::DomainMismatch {
            expected: domain.name.clone(),
            found: domain_name,
        });
    }

    let mut types: HashMap<&str, &str> = HashMap::new();
    for o in &objects {
        if !domain.has_type(&o.typ) {
            return Err(PddlError::UndeclaredType(o.typ.clone()));
        }
        if types.insert(&o.name, &o.typ).is_some() {
            return Err(PddlError::Duplicate {
                kind: "object",
                name: o.name.clone(),
            });
        }
    }
    let object_type = |n: &str| types.get(n).map(|t| t.to_string());

    let mut init = BTreeSet::new();
    let mut numeric = BTreeMap::new();
    for item in init_section.ok_or(PddlError::MissingSection(":init"))? {
        if item.head_keyword().as_deref() == Some("=") {
            let parts = expect_list(item, "fluent assignment")?;
            if parts.len() != 3 {
                return Err(syntax(item.pos(), "expected `(= (f ...) <int>)`"));
            }
            let term = parse_ground(&parts[1])?;
            if domain.function(&term.predicate).is_none() {
                return Err(PddlError::UndeclaredPredicate(term.predicate));
            }
            check_ground(domain, &term, object_type)?;
            let value = parts[2]
                .as_atom()
                .and_then(|v| v.parse::<i64>().ok())
                .ok_or_else(|| syntax(parts[2].pos(), "expected integer value"))?;
            numeric.insert(term, value);
        } else {
            let atom = parse_ground(item)?;
            if domain.predicate(&atom.predicate).is_none() {
                return Err(PddlError::UndeclaredPredicate(atom.predicate));
            }
            check_ground(domain, &atom, object_type)?;
            init.insert(atom);
        }
    }

    let goal_section = goal_section.ok_or(PddlError::MissingSection(":goal"))?;
    let goal_items = expect_list(goal_section, "goal")?;
    if goal_items.len() != 2 {
        return Err(syntax(goal_section.pos(), "`:goal` takes exactly one formula"));
    }
    let mut goal = BTreeSet::new();
    collect_goal(&goal_items[1], &mut goal)?;
    for atom in &goal {
        if domain.predicate(&atom.predicate).is_none() {
            return Err(PddlError::UndeclaredPredicate(atom.predicate.clone()));
        }
        check_ground(domain, atom, object_type)?;
    }
    if goal.is_empty() {
        return Err(PddlError::EmptyGoal);
    }
    Ok(ProblemInstance {
        name,
        domain_name: domain.name.clone(),
        objects,
        init,
        numeric,
        goal,
        provenance: None,
    })
}

fn collect_goal(e: &SExpr, out: &mut BTreeSet<GroundAtom>) -> Result<()> {
    match e.head_keyword().as_deref() {
        Some("and") => {
            for item in &e.as_list().unwrap_or_default()[1..] {
                collect_goal(item, out)?;
            }
            Ok(())
        }
        Some(k @ ("not" | "or" | "forall" | "exists" | "imply" | "=" | "<" | ">")) => {
            Err(PddlError::Unsupported(format!("`{k}` in goal")))
        }
        _ => {
            out.insert(parse_ground(e)?);
            Ok(())
        }
    }
}

fn parse_ground(e: &SExpr) -> Result<GroundAtom> {
    let items = expect_list(e, "atom")?;
    let predicate = items
        .first()
        .ok_or_else(|| syntax(e.pos(), "empty atom"))
        .and_then(|p| expect_ident(p, "predicate"))?;
    let args = items[1..]
        .iter()
        .map(|a| match a.as_atom() {
            Some(s) if is_identifier(s) => Ok(s.to_string()),
            _ => Err(syntax(a.pos(), format!("expected object name, found `{a}`"))),
        })
        .collect::<Result<_>>()?;
    Ok(GroundAtom { predicate, args })
}
