//! Certifying presolve for 0-1 integer linear programs.
//!
//! The presolver rewrites an instance and streams a pseudo-Boolean proof
//! certificate for every reduction; the checker replays such certificates
//! against the original instance.

pub mod bench;
pub mod checker;
pub mod engine;
pub mod gen;
pub mod model;
pub mod opb;
pub mod presolve;
pub mod proof;

pub use checker::{check, CheckOptions, Verdict};
pub use model::{Constraint, Lit, Objective, Problem, Var};
pub use presolve::{presolve, PresolveOutput, RunConfig};
