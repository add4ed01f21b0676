use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ground::ground;
use super::search::{solve_plan, Budget, PlanOutcome, Search};
use crate::pddl::{DomainSpec, ProblemInstance};

/// Tasks with at most this many ground atoms are graded with BFS.
pub const BFS_ATOM_LIMIT: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Solvable {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeReport {
    pub solvable: Solvable,
    pub plan_length: Option<usize>,
    pub expansions: u64,
    pub wall_time_ms: u64,
    pub search: Option<Search>,
}

/// Grades `inst` by planning for it. Grounding failures grade as unknown.
pub fn grade(domain: &DomainSpec, inst: &ProblemInstance, budget: Budget) -> GradeReport {
    let start = Instant::now();
    let task = match ground(domain, inst) {
        Ok(t) => t,
        Err(_) => {
            return GradeReport {
                solvable: Solvable::Unknown,
                plan_length: None,
                expansions: 0,
                wall_time_ms: start.elapsed().as_millis() as u64,
                search: None,
            }
        }
    };
    let search = if task.atoms.len() <= BFS_ATOM_LIMIT {
        Search::Bfs
    } else {
        Search::GreedyHAdd
    };
    let r = solve_plan(&task, search, budget);
    let (solvable, plan_length) = match r.outcome {
        PlanOutcome::Plan(p) => (Solvable::Yes, Some(p.len())),
        PlanOutcome::NoPlan => (Solvable::No, None),
        PlanOutcome::Unknown => (Solvable::Unknown, None),
    };
    GradeReport {
        solvable,
        plan_length,
        expansions: r.stats.expansions,
        wall_time_ms: start.elapsed().as_millis() as u64,
        search: Some(search),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::fixtures::{FIG3_PROBLEM, FLOOR_TILE};
    use crate::pddl::{parse_domain, parse_problem, GroundAtom};

    #[test]
    fn fig3_grades() {
        let d = parse_domain(FLOOR_TILE, false).unwrap();
        let mut p = parse_problem(FIG3_PROBLEM, &d).unwrap();
        let r = grade(&d, &p, Budget::default());
        assert_eq!((r.solvable, r.plan_length, r.search), (Solvable::No, None, Some(Search::Bfs)));
        p.goal.remove(&GroundAtom::new("painted", ["tile_1-0", "black"]));
        let r = grade(&d, &p, Budget::default());
        assert_eq!((r.solvable, r.plan_length), (Solvable::Yes, Some(3)));
        p.goal = p.init.iter().take(3).cloned().collect();
        let r = grade(&d, &p, Budget::default());
        assert_eq!((r.solvable, r.plan_length), (Solvable::Yes, Some(0)));
    }

    #[test]
    fn unknown_goal_atom_grades_unknown() {
        let d = parse_domain(FLOOR_TILE, false).unwrap();
        let mut p = parse_problem(FIG3_PROBLEM, &d).unwrap();
        p.goal.insert(GroundAtom::new("painted", ["tile_9-9", "white"]));
        let r = grade(&d, &p, Budget::default());
        assert_eq!((r.solvable, r.expansions), (Solvable::Unknown, 0));
    }
}
