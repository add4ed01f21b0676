use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::PlanError;
use crate::pddl::{AtomSchema, DomainSpec, GroundAtom, ProblemInstance};

/// Default cap on the number of ground actions.
pub const DEFAULT_ACTION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre: Vec<u32>,
    /// Negative preconditions.
    pub pre_neg: Vec<u32>,
    pub add: Vec<u32>,
    pub del: Vec<u32>,
}

impl std::fmt::Display for GroundAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Propositional task ⟨V, A, I, G⟩.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTask {
    pub atoms: Vec<GroundAtom>,
    pub index: HashMap<GroundAtom, u32>,
    pub actions: Vec<GroundAction>,
    pub init: Vec<bool>,
    pub goal: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundOptions {
    pub action_cap: usize,
    /// Drop actions whose static preconditions fail in the initial state.
    pub prune_static: bool,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions {
            action_cap: DEFAULT_ACTION_CAP,
            prune_static: true,
        }
    }
}

pub fn ground(domain: &DomainSpec, inst: &ProblemInstance) -> Result<GroundTask, PlanError> {
    ground_with(domain, inst, GroundOptions::default())
}

fn typed_objects<'a>(domain: &DomainSpec, inst: &'a ProblemInstance, typ: &str) -> Vec<&'a str> {
    inst.objects
        .iter()
        .filter(|o| domain.is_subtype(&o.typ, typ))
        .map(|o| o.name.as_str())
        .collect()
}

pub fn ground_with(
    domain: &DomainSpec,
    inst: &ProblemInstance,
    opts: GroundOptions,
) -> Result<GroundTask, PlanError> {
    let mut atoms = Vec::new();
    for p in &domain.predicates {
        let mut tuples: Vec<Vec<&str>> = vec![Vec::new()];
        for param in &p.params {
            let objs = typed_objects(domain, inst, &param.typ);
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    objs.iter().map(move |o| {
                        let mut t = t.clone();
                        t.push(o);
                        t
                    })
                })
                .collect();
        }
        atoms.extend(tuples.into_iter().map(|t| GroundAtom::new(p.name.clone(), t)));
    }
    let index: HashMap<GroundAtom, u32> = atoms.iter().enumerate().map(|(i, a)| (a.clone(), i as u32)).collect();
    let mut init = vec![false; atoms.len()];
    for a in &inst.init {
        let i = *index.get(a).ok_or_else(|| PlanError::UnknownAtom(a.to_string()))?;
        init[i as usize] = true;
    }
    let goal = inst
        .goal
        .iter()
        .map(|a| index.get(a).copied().ok_or_else(|| PlanError::UnknownAtom(a.to_string())))
        .collect::<Result<Vec<_>, _>>()?;

    let fluent: HashSet<&str> = domain
        .actions
        .iter()
        .flat_map(|a| a.add.iter().chain(&a.del))
        .map(|s| s.predicate.as_str())
        .collect();

    let mut actions = Vec::new();
    for schema in &domain.actions {
        let choices: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|p| typed_objects(domain, inst, &p.typ))
            .collect();
        if !opts.prune_static {
            let total = choices.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.len()));
            if total.is_none_or(|t| t + actions.len() > opts.action_cap) {
                return Err(PlanError::TooLarge { cap: opts.action_cap });
            }
        }
        let pos: HashMap<&str, usize> = schema
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.as_str(), i))
            .collect();
        // Static literals become checkable once their last argument is bound.
        let mut checks: Vec<Vec<(&AtomSchema, bool)>> = vec![Vec::new(); schema.params.len() + 1];
        if opts.prune_static {
            for lit in &schema.precondition {
                if !fluent.contains(lit.atom.predicate.as_str()) {
                    let depth = lit.atom.args.iter().map(|a| pos[a.as_str()] + 1).max().unwrap_or(0);
                    checks[depth].push((&lit.atom, lit.positive));
                }
            }
        }
        let instantiate = |s: &AtomSchema, binding: &[&str]| -> u32 {
            let atom = GroundAtom::new(
                s.predicate.clone(),
                s.args.iter().map(|a| binding[pos[a.as_str()]]),
            );
            index[&atom]
        };
        let holds = |binding: &[&str], depth: usize| {
            checks[depth]
                .iter()
                .all(|(s, positive)| init[instantiate(s, binding) as usize] == *positive)
        };
        let mut binding: Vec<&str> = Vec::with_capacity(choices.len());
        let mut cursor = vec![0usize; choices.len()];
        if !holds(&binding, 0) {
            continue;
        }
        // Iterative depth-first enumeration of parameter bindings.
        let mut depth = 0;
        loop {
            if depth == choices.len() {
                let mut pre = Vec::new();
                let mut pre_neg = Vec::new();
                for lit in &schema.precondition {
                    let i = instantiate(&lit.atom, &binding);
                    if lit.positive {
                        pre.push(i);
                    } else {
                        pre_neg.push(i);
                    }
                }
                let add: Vec<u32> = schema.add.iter().map(|s| instantiate(s, &binding)).collect();
                // Add wins when a grounding makes an atom both added and deleted.
                let del: Vec<u32> = schema
                    .del
                    .iter()
                    .map(|s| instantiate(s, &binding))
                    .filter(|d| !add.contains(d))
                    .collect();
                pre.sort_unstable();
                pre.dedup();
                pre_neg.sort_unstable();
                pre_neg.dedup();
                actions.push(GroundAction {
                    name: schema.name.clone(),
                    args: binding.iter().map(|s| s.to_string()).collect(),
                    pre,
                    pre_neg,
                    add,
                    del,
                });
                if actions.len() > opts.action_cap {
                    return Err(PlanError::TooLarge { cap: opts.action_cap });
                }
                if depth == 0 {
                    break;
                }
                depth -= 1;
                binding.pop();
                cursor[depth] += 1;
                continue;
            }
            if cursor[depth] >= choices[depth].len() {
                cursor[depth] = 0;
                if depth == 0 {
                    break;
                }
                depth -= 1;
                binding.pop();
                cursor[depth] += 1;
                continue;
            }
            binding.push(choices[depth][cursor[depth]]);
            if holds(&binding, depth + 1) {
                depth += 1;
            } else {
                binding.pop();
                cursor[depth] += 1;
            }
        }
    }
    Ok(GroundTask {
        atoms,
        index,
        actions,
        init,
        goal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::fixtures::{FIG3_PROBLEM, FLOOR_TILE};
    use crate::pddl::{parse_domain, parse_problem};

    fn fig3() -> (DomainSpec, ProblemInstance) {
        let d = parse_domain(FLOOR_TILE, false).unwrap();
        let p = parse_problem(FIG3_PROBLEM, &d).unwrap();
        (d, p)
    }

    #[test]
    fn fig3_atom_counts() {
        let (d, p) = fig3();
        let t = ground(&d, &p).unwrap();
        let robot_at = t.atoms.iter().filter(|a| a.predicate == "robot-at").count();
        assert_eq!(robot_at, 2 * 4);
        // 8 robot-at, 4x16 grid, 4 clear, 8 painted, 4 robot-has, 2 available, 2 free.
        assert_eq!(t.atoms.len(), 8 + 64 + 4 + 8 + 4 + 2 + 2);
        assert_eq!(t.init.iter().filter(|b| **b).count(), 16);
        assert_eq!(t.goal.len(), 2);
    }

    #[test]
    fn pruning_keeps_exactly_the_statically_possible_actions() {
        let (d, p) = fig3();
        let pruned = ground(&d, &p).unwrap();
        let full = ground_with(
            &d,
            &p,
            GroundOptions {
                prune_static: false,
                ..GroundOptions::default()
            },
        )
        .unwrap();
        // 4 moves x 2 robots x 16 + 2 paints x 2 x 16 x 2 + 2 x 2 x 2.
        assert_eq!(full.actions.len(), 128 + 128 + 8);
        let statics_ok = |a: &GroundAction| {
            a.pre
                .iter()
                .all(|&i| full.init[i as usize] || ["robot-at", "clear", "robot-has"].contains(&full.atoms[i as usize].predicate.as_str()))
        };
        let expected: Vec<&GroundAction> = full.actions.iter().filter(|a| statics_ok(a)).collect();
        assert_eq!(pruned.actions.iter().collect::<Vec<_>>(), expected);
        // Each direction has two edges on a 2x2 grid.
        let moves = pruned.actions.iter().filter(|a| a.name.starts_with("move")).count();
        assert_eq!(moves, 4 * 2 * 2);
    }

    #[test]
    fn action_cap_is_enforced() {
        let (d, p) = fig3();
        let opts = GroundOptions {
            action_cap: 10,
            prune_static: false,
        };
        assert_eq!(ground_with(&d, &p, opts), Err(PlanError::TooLarge { cap: 10 }));
        let pruned = GroundOptions {
            action_cap: 10,
            prune_static: true,
        };
        assert_eq!(ground_with(&d, &p, pruned), Err(PlanError::TooLarge { cap: 10 }));
    }

    #[test]
    fn no_objects_no_actions() {
        let d = parse_domain(FLOOR_TILE, false).unwrap();
        let p = ProblemInstance {
            name: "p".into(),
            domain_name: d.name.clone(),
            objects: vec![crate::pddl::TypedName::new("c", "color")],
            init: Default::default(),
            numeric: Default::default(),
            goal: [GroundAtom::new("available-color", ["c"])].into(),
            provenance: None,
        };
        let t = ground(&d, &p).unwrap();
        assert!(t.actions.is_empty());
    }
}
