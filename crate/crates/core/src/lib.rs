//! Sparse least squares with an `L_p` quasi-norm penalty, `0 ≤ p < 1`.
//!
//! * [`model`]: instances, objective evaluation and optimality conditions.
//! * [`scalar`]: the one-dimensional subproblem and the separable prox.
//! * [`bounds`]: λ thresholds that guarantee sparsity of minimisers.
//! * [`solver`]: support enumeration, a local coordinate solver, and
//!   certification of candidates.
//! * [`reduction`]: partition and 3-partition gadget instances and their
//!   combinatorial oracles.
//! * [`asymptotics`]: the standardized-design regime.
//! * [`cli`]: the `lpreg` command-line front end.

pub mod error;
pub mod model;
pub mod numeric;
pub mod scalar;

pub use error::{Error, Result};
pub use model::{objective, parse_instance, Candidate, Instance};
pub mod bounds;
pub mod solver;
pub mod reduction;
pub mod asymptotics;
pub mod cli;
