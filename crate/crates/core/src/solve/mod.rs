//! Randomized backtracking search over constraint models, and decoding of
//! solutions into problem instances.

mod engine;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::Scope;
use crate::model::{ConstraintModel, GeneratorConfig, VarId, VarKind};
use crate::pddl::{DomainSpec, ProblemInstance, Provenance};
use engine::{Engine, SearchEnd};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("empty goal: the assignment makes no goal atom true")]
    EmptyGoal,
    #[error("assignment has {found} values for {expected} variables")]
    Shape { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SolveResult {
    #[default]
    Sat,
    Unsat,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub wall_time_ms: u64,
    pub result: SolveResult,
}

/// Total assignment, indexed by variable. Booleans are 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    /// Node budget of the first geometric restart; `None` disables restarts.
    pub restart_base: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub assignment: Option<Assignment>,
    pub stats: SolveStats,
}

fn stats_from(e: &Engine, start: Instant, result: SolveResult) -> SolveStats {
    SolveStats {
        nodes: e.counters.nodes,
        propagations: e.counters.propagations,
        restarts: e.counters.restarts,
        wall_time_ms: start.elapsed().as_millis() as u64,
        result,
    }
}

/// Samples one solution. Search and value order are functions of `seed`.
pub fn generate(m: &ConstraintModel, seed: u64, time_limit: Option<Duration>) -> SolveOutcome {
    generate_with(
        m,
        seed,
        &SolveOptions {
            time_limit,
            ..SolveOptions::default()
        },
    )
}

pub fn generate_with(m: &ConstraintModel, seed: u64, opts: &SolveOptions) -> SolveOutcome {
    let start = Instant::now();
    let deadline = opts.time_limit.map(|d| start + d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Engine::new(m);
    e.shuffle_order(&mut rng);
    match e.search(&mut rng, deadline, opts.restart_base, false) {
        SearchEnd::Solution => SolveOutcome {
            assignment: Some(Assignment { values: e.values() }),
            stats: stats_from(&e, start, SolveResult::Sat),
        },
        SearchEnd::Exhausted => SolveOutcome {
            assignment: None,
            stats: stats_from(&e, start, SolveResult::Unsat),
        },
        SearchEnd::Timeout => SolveOutcome {
            assignment: None,
            stats: stats_from(&e, start, SolveResult::Timeout),
        },
    }
}

/// Remaining domain of a variable after propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub lo: i64,
    pub hi: i64,
    pub holes: Vec<i64>,
}

impl Domain {
    pub fn fixed(&self) -> Option<i64> {
        (self.lo == self.hi).then_some(self.lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("conflict: no completion satisfies the constraints")]
pub struct Conflict;

/// Propagates the model under a partial assignment to fixpoint.
pub fn propagate(m: &ConstraintModel, partial: &[(VarId, i64)]) -> Result<Vec<Domain>, Conflict> {
    let mut e = Engine::new(m);
    if e.root_failed() {
        return Err(Conflict);
    }
    for &(v, x) in partial {
        if !e.assign(v, x) {
            return Err(Conflict);
        }
    }
    if !e.propagate() {
        return Err(Conflict);
    }
    Ok((0..m.variables.len() as VarId)
        .map(|v| {
            let (lo, hi, holes) = e.domain(v);
            Domain { lo, hi, holes }
        })
        .collect())
}

/// Variables that carry instance content (no reification auxiliaries).
fn projection(m: &ConstraintModel) -> Vec<VarId> {
    (0..m.variables.len() as VarId)
        .filter(|v| !matches!(m.variables[*v as usize], VarKind::Aux))
        .collect()
}

/// Every solution, by exhaustive depth-first enumeration. Stops after `limit`.
pub fn enumerate_all(m: &ConstraintModel, limit: usize) -> Vec<Assignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut e = Engine::new(m);
    e.shuffle_order(&mut rng);
    let mut out = Vec::new();
    let mut resume = false;
    while out.len() < limit {
        match e.search(&mut rng, None, None, resume) {
            SearchEnd::Solution => out.push(Assignment { values: e.values() }),
            _ => break,
        }
        resume = true;
    }
    out
}

/// Every solution, by repeated search with a clause blocking each solution
/// found (projected onto non-auxiliary variables). Stops after `limit`.
pub fn enumerate_blocking(m: &ConstraintModel, seed: u64, limit: usize) -> Vec<Assignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Engine::new(m);
    let vars: Vec<VarId> = projection(m).into_iter().filter(|v| !e.is_fixed(*v)).collect();
    let mut out = Vec::new();
    while out.len() < limit {
        e.shuffle_order(&mut rng);
        match e.search(&mut rng, None, None, false) {
            SearchEnd::Solution => {
                let values = e.values();
                let ok = e.block(&vars, &values);
                out.push(Assignment { values });
                if !ok {
                    break;
                }
            }
            _ => break,
        }
    }
    out
}

/// Builds the problem instance described by a satisfying assignment.
pub fn decode(
    m: &ConstraintModel,
    a: &Assignment,
    domain: &DomainSpec,
    config: &GeneratorConfig,
) -> Result<ProblemInstance, SolveError> {
    if a.values.len() != m.variables.len() {
        return Err(SolveError::Shape {
            expected: m.variables.len(),
            found: a.values.len(),
        });
    }
    let mut init = BTreeSet::new();
    let mut goal = BTreeSet::new();
    let mut numeric = std::collections::BTreeMap::new();
    for (kind, &value) in m.variables.iter().zip(&a.values) {
        match kind {
            VarKind::Bool { atom, scope } if value == 1 => {
                let atom = m.atom(atom);
                match scope {
                    Scope::Init => init.insert(atom),
                    Scope::Goal => goal.insert(atom),
                };
            }
            VarKind::Int { term, .. } => {
                numeric.insert(m.atom(term), value);
            }
            _ => {}
        }
    }
    if goal.is_empty() {
        return Err(SolveError::EmptyGoal);
    }
    Ok(ProblemInstance {
        name: format!("{}-{}", domain.name, config.seed),
        domain_name: domain.name.clone(),
        objects: m.objects.clone(),
        init,
        numeric,
        goal,
        provenance: Some(Provenance {
            config: config.clone(),
            seed: config.seed,
            stats: SolveStats::default(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::collections::HashSet;

    use super::*;
    use crate::model::{compile, Cmp, Constraint, Encoding, Lit};
    use crate::pddl::fixtures::{FLOOR_TILE, FLOOR_TILE_GEN};
    use crate::pddl::{parse_domain, GroundAtom};

    fn bare(n: usize, constraints: Vec<Constraint>) -> ConstraintModel {
        ConstraintModel {
            encoding: Encoding::Low,
            domain_name: "d".into(),
            config: GeneratorConfig::default(),
            symbols: vec![],
            objects: vec![],
            variables: vec![VarKind::Aux; n],
            constraints,
            fixed: BTreeMap::new(),
            total_functions: vec![],
            structural: 0..0,
            decisions: 0,
        }
    }

    fn lits(vs: &[VarId]) -> Vec<Lit> {
        vs.iter().map(|&v| Lit::is_true(v)).collect()
    }

    #[test]
    fn contradiction_is_unsat() {
        let m = bare(
            1,
            vec![
                Constraint::Cardinality { lits: lits(&[0]), cmp: Cmp::Eq, k: 1 },
                Constraint::Cardinality { lits: lits(&[0]), cmp: Cmp::Eq, k: 0 },
            ],
        );
        let out = generate(&m, 0, None);
        assert_eq!(out.stats.result, SolveResult::Unsat);
        assert!(out.assignment.is_none());
        assert!(out.stats.nodes >= 1);
    }

    #[test]
    fn unconstrained_is_sat() {
        let m = bare(3, vec![]);
        let out = generate(&m, 5, None);
        let a = out.assignment.unwrap();
        assert_eq!(a.values.len(), 3);
        assert!(a.values.iter().all(|v| *v == 0 || *v == 1));
        assert!(out.stats.nodes >= 1);
    }

    #[test]
    fn exactly_one_forces_rest_false() {
        let m = bare(3, vec![Constraint::Cardinality { lits: lits(&[0, 1, 2]), cmp: Cmp::Eq, k: 1 }]);
        let d = propagate(&m, &[(0, 1)]).unwrap();
        assert_eq!(d[1].fixed(), Some(0));
        assert_eq!(d[2].fixed(), Some(0));
    }

    #[test]
    fn xor_propagates() {
        let m = bare(2, vec![Constraint::Xor { a: Lit::is_true(0), b: Lit::is_true(1) }]);
        let d = propagate(&m, &[(0, 1)]).unwrap();
        assert_eq!(d[1].fixed(), Some(0));
    }

    #[test]
    fn atleast_conflict_matches_counting_oracle() {
        let c = Constraint::Cardinality { lits: lits(&[0, 1, 2]), cmp: Cmp::Ge, k: 3 };
        let m = bare(3, vec![c.clone()]);
        assert_eq!(propagate(&m, &[(0, 0)]), Err(Conflict));
        // Oracle: no completion with a = false satisfies the constraint.
        let completions = (0..4)
            .filter(|bits| c.satisfied(&[0, bits & 1, (bits >> 1) & 1]))
            .count();
        assert_eq!(completions, 0);
    }

    #[test]
    fn reified_and_implication_semantics() {
        // x <-> (a + b = 1), x forced true, a forced true: b must be false.
        let m = bare(
            4,
            vec![
                Constraint::ReifiedCardinality { indicator: 2, lits: lits(&[0, 1]), cmp: Cmp::Eq, k: 1 },
                Constraint::BiconditionalConst { a: 2, value: true },
                Constraint::Implies { a: Lit::is_true(0), b: Lit::is_true(3) },
            ],
        );
        let d = propagate(&m, &[(0, 1)]).unwrap();
        assert_eq!(d[1].fixed(), Some(0));
        assert_eq!(d[3].fixed(), Some(1));
        // Exhaustive enumeration agrees with brute force over all 16 assignments.
        let found: HashSet<Vec<i64>> = enumerate_all(&m, 100).into_iter().map(|a| a.values).collect();
        let brute: HashSet<Vec<i64>> = (0..16)
            .map(|b: i64| (0..4).map(|i| (b >> i) & 1).collect::<Vec<i64>>())
            .filter(|v| m.constraints.iter().all(|c| c.satisfied(v)))
            .collect();
        assert_eq!(found, brute);
    }

    #[test]
    fn integer_variables_branch_within_bounds() {
        let mut m = bare(0, vec![]);
        m.variables = vec![VarKind::Int {
            term: crate::model::AtomKey { symbol: 0, args: Box::new([]) },
            lo: 3,
            hi: 7,
        }];
        m.constraints = vec![Constraint::Cardinality {
            lits: vec![Lit { var: 0, value: 5, pos: false }],
            cmp: Cmp::Eq,
            k: 1,
        }];
        let found: BTreeSet<i64> = enumerate_all(&m, 100).into_iter().map(|a| a.values[0]).collect();
        assert_eq!(found, BTreeSet::from([3, 4, 6, 7]));
        for seed in 0..20 {
            let v = generate(&m, seed, None).assignment.unwrap().values[0];
            assert!((3..=7).contains(&v) && v != 5);
        }
    }

    #[test]
    fn floor_tile_low_seed_one() {
        let d = parse_domain(FLOOR_TILE_GEN, true).unwrap();
        let c = GeneratorConfig::new([("tile_size", 2), ("n_robot", 2), ("n_color", 2)], 1);
        let m = compile(&d, &c, Encoding::Low).unwrap();
        let out = generate(&m, 1, None);
        assert_eq!(out.stats.result, SolveResult::Sat);
        let a = out.assignment.unwrap();
        assert!(m.check(&a.values));
        let inst = decode(&m, &a, &d, &c).unwrap();
        let grid: BTreeSet<GroundAtom> = inst
            .init
            .iter()
            .filter(|a| ["up", "down", "left", "right"].contains(&a.predicate.as_str()))
            .cloned()
            .collect();
        let fig3 = crate::pddl::parse_problem(crate::pddl::fixtures::FIG3_PROBLEM, &d).unwrap();
        let fig3_grid: BTreeSet<GroundAtom> = fig3
            .init
            .iter()
            .filter(|a| ["up", "down", "left", "right"].contains(&a.predicate.as_str()))
            .cloned()
            .collect();
        assert_eq!(grid, fig3_grid);
        assert_eq!(decode(&m, &a, &d, &c).unwrap(), inst);
    }

    #[test]
    fn same_seed_same_assignment() {
        let d = parse_domain(FLOOR_TILE_GEN, true).unwrap();
        let c = GeneratorConfig::new([("tile_size", 3), ("n_robot", 2), ("n_color", 3)], 0);
        for enc in [Encoding::Low, Encoding::High] {
            let m = compile(&d, &c, enc).unwrap();
            let a = generate(&m, 42, None).assignment.unwrap();
            assert_eq!(generate(&m, 42, None).assignment.unwrap(), a);
            assert!(m.check(&a.values));
            let distinct: HashSet<Vec<i64>> = (0..10)
                .map(|s| generate(&m, s, None).assignment.unwrap().values)
                .collect();
            assert!(distinct.len() > 1);
        }
    }

    #[test]
    fn empty_goal_rejected() {
        let d = parse_domain(FLOOR_TILE, true).unwrap();
        let c = GeneratorConfig::new([("tile_size", 2), ("n_robot", 1), ("n_color", 1)], 0);
        let m = compile(&d, &c, Encoding::High).unwrap();
        let mut a = generate(&m, 3, None).assignment.unwrap();
        for (i, v) in m.variables.iter().enumerate() {
            if matches!(v, VarKind::Bool { scope: Scope::Goal, .. }) {
                a.values[i] = 0;
            }
        }
        assert_eq!(decode(&m, &a, &d, &c), Err(SolveError::EmptyGoal));
    }

    #[test]
    fn blocking_matches_exhaustive_and_brute_force() {
        let d = parse_domain(FLOOR_TILE_GEN, true).unwrap();
        let c = GeneratorConfig::new([("tile_size", 2), ("n_robot", 1), ("n_color", 1)], 0);
        for enc in [Encoding::Low, Encoding::High] {
            let m = compile(&d, &c, enc).unwrap();
            let project = |a: &Assignment| {
                projection(&m)
                    .into_iter()
                    .map(|v| a.values[v as usize])
                    .collect::<Vec<_>>()
            };
            let all: HashSet<Vec<i64>> = enumerate_all(&m, usize::MAX).iter().map(project).collect();
            let blocked: Vec<Vec<i64>> = enumerate_blocking(&m, 9, usize::MAX).iter().map(project).collect();
            assert_eq!(blocked.len(), all.len(), "blocking found duplicates");
            assert_eq!(blocked.into_iter().collect::<HashSet<_>>(), all);
            // 4 robot positions x (2^4 - 1) goal patterns of at most 4 tiles.
            assert_eq!(all.len(), 4 * 15);
        }
    }
}
