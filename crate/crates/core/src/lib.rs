//! Valid planning-instance generation from augmented PDDL.
//!
//! A domain file carries an `:instance-constraints` section describing what
//! a well-formed problem looks like. The pipeline parses it ([`pddl`],
//! [`augment`]), compiles it to a finite-domain model ([`model`]), samples
//! solutions ([`solve`]), checks and grades the resulting problems
//! ([`plan`]) and tunes generator parameters ([`tune`]).

pub mod augment;
pub mod model;
pub mod pddl;
pub mod pipeline;
pub mod plan;
pub mod sexpr;
pub mod solve;
pub mod tune;
