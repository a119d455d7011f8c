//! A matrix-free cone solver.

mod admm;
mod cones;
mod operator;

pub use admm::{dual_residual, primal_residual, solve, solve_with, IterRecord, Solution, SolverOptions, Status, RHO};
pub use cones::{project_product, Cone, ConeKind};
pub use operator::{DagOperator, EmptyOperator, LinearOperator};
