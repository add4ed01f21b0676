//! Grounding, forward search and validity checks for problem instances.

mod grade;
mod ground;
mod search;
mod validate;

use thiserror::Error;

pub use grade::{grade, GradeReport, Solvable, BFS_ATOM_LIMIT};
pub use ground::{ground, ground_with, GroundAction, GroundOptions, GroundTask, DEFAULT_ACTION_CAP};
pub use search::{apply, count_reachable, is_goal, solve_plan, validate_plan, Budget, PlanOutcome, PlanResult, PlanStats, PlanValidity, Search};
pub use validate::{grid_coords, infer_config, validate_instance, ValidationReport, Violation, ViolationKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("grounding exceeds {cap} actions")]
    TooLarge { cap: usize },
    #[error("atom {0} is not over the declared objects")]
    UnknownAtom(String),
    #[error("domain has no instance constraints")]
    NoValiditySpec,
}
