//! Time-periodic breathers of `d_tt U + L U = Q |U|^{p-2} U` by the dual
//! variational method: spectral resolvents, the dual functional, critical
//! point solvers and post-hoc verification.

pub mod dual;
pub mod error;
pub mod grid;
pub mod resolvent;
pub mod snapshot;
pub mod solver;
pub mod symmetry;
pub mod time;
pub mod verify;

pub use dual::{mountain_pass_constants, DualProblem, Potential, ProblemParams};
pub use error::{Error, Result};
pub use grid::SpaceGrid;
pub use resolvent::{
    admissible_exponents, apply_resolvent, estimate_operator_norm, kernel_oracle, Boundary,
    OperatorSpec, Resolvent, ResolventParams,
};
pub use solver::{Scheme, Solution, SolverConfig};
pub use symmetry::{mode_set, SymmetryClass};
pub use time::{mixed_norm, Samples, TimeField, TimeGrid};
pub use verify::{Check, VerificationReport};
