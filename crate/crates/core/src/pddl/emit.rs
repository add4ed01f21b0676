use std::fmt::Write;

use super::ProblemInstance;

/// Canonical PDDL text for a problem: objects grouped by type in order of
/// first appearance, one atom per line, atoms sorted by (predicate, args).
pub fn emit_problem(inst: &ProblemInstance) -> String {
    let mut out = String::new();
    // Writing to a String cannot fail.
    let _ = write_problem(&mut out, inst);
    out
}

fn write_problem(out: &mut String, inst: &ProblemInstance) -> std::fmt::Result {
    writeln!(out, "(define (problem {})", inst.name)?;
    writeln!(out, " (:domain {})", inst.domain_name)?;
    write!(out, " (:objects")?;
    let mut types: Vec<&str> = Vec::new();
    for o in &inst.objects {
        if !types.contains(&o.typ.as_str()) {
            types.push(&o.typ);
        }
    }
    for t in types {
        write!(out, "\n  ")?;
        for o in inst.objects.iter().filter(|o| o.typ == t) {
            write!(out, "{} ", o.name)?;
        }
        write!(out, "- {t}")?;
    }
    writeln!(out, ")")?;
    write!(out, " (:init")?;
    for atom in &inst.init {
        write!(out, "\n  {atom}")?;
    }
    for (term, value) in &inst.numeric {
        write!(out, "\n  (= {term} {value})")?;
    }
    writeln!(out, ")")?;
    write!(out, " (:goal (and")?;
    for atom in &inst.goal {
        write!(out, "\n  {atom}")?;
    }
    writeln!(out, ")))")
}
