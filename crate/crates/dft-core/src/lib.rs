//! Dynamic fault tree (DFT) analysis core.
//!
//! A DFT models system failure as an expression over component failure
//! times: gates (`and`, `or`, `pand`, spares, …) and temporal operators
//! (`before`, `simult`, `ibefore`) combine basic events into a structure
//! function whose value is the time at which the top event occurs. This
//! crate provides:
//!
//! * [`expr`] — the expression AST and its failure-time semantics,
//! * [`rewrite`] — algebraic simplification and sampling-based
//!   equivalence checking,
//! * [`dist`] — failure-time laws (exponential, Weibull) and conditional
//!   activation laws for spares,
//! * [`prob`] — analytic top-event probabilities via inclusion–exclusion
//!   and adaptive quadrature,
//! * [`mc`] — a seeded, worker-count-independent Monte-Carlo estimator.
//!
//! The crate is `no_std` (with `alloc`); IO, parsing and the CLI live in
//! the companion `dft-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dist;
pub mod expr;
pub mod mc;
pub mod model;
pub mod prob;
pub mod quad;
pub mod rewrite;
pub mod rng;
pub mod stats;
pub mod time;

pub use expr::{Assignment, EvalError, FailureExpr};
pub use model::DftModel;
pub use time::ExtTime;
