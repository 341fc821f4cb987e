//! A laboratory for the Walksat algorithm on random k-CNF formulas.
//!
//! The crate has five parts:
//!
//! - [`formula`]: the fixed-width random formula model (ordered clauses,
//!   ordered literals, duplicates allowed), evaluation primitives, and the
//!   uniform generator; DIMACS I/O lives in [`dimacs`].
//! - [`walksat`]: the solver itself, with an incremental tracker of
//!   true-literal counts and the unsatisfied-clause set.
//! - [`revelation`]: an instrumented re-run of the walk that tracks exactly
//!   which parts of the formula the algorithm has examined, together with
//!   the counting potentials used to reason about termination.
//! - [`expansion`]: factor-graph machinery (l-fold matchings, overlap
//!   chains, occurrence closures) and rich partial assignments.
//! - [`trace`]: serializable run records.
//!
//! All randomness flows through [`rng::LabRng`], a seeded, versioned
//! generator, so every run is reproducible from its configuration.

pub mod audit;
pub mod dimacs;
pub mod expansion;
pub mod formula;
pub mod revelation;
pub mod rng;
pub mod trace;
pub mod walksat;

pub use formula::{Assignment, Clause, Formula, Literal, PartialAssignment, Var, VarSet};
pub use revelation::{Driver, ProcessParams, Revelation, ScriptChoice};
pub use trace::{StepRecord, Trace};
