//! Forward problem: coefficients, operator assembly, time stepping,
//! linearization of reaction terms and space-time norms.

pub mod coefficients;
pub mod convergence;
pub mod field;
pub mod linear;
pub mod linearize;
pub mod nonlinearity;
pub mod operator;
pub mod semilinear;

pub use coefficients::{ComponentCoefficients, Coupling, RingCondition, SystemCoefficients};
pub use convergence::{run_convergence_suite, ConvergenceConfig, ConvergenceTable, OrderRow, StudyAxis};
pub use field::{norm_l1_q, norm_l2_q, SourceField, SpaceTimeField, StateField};
pub use linear::{solve_forward_linear, ForwardSolver, Scheme};
pub use linearize::{linearize_semilinear, Linearization, LinearizationMode};
pub use nonlinearity::{check_probe, HypothesisCase, NonlinearityModel, Reaction};
pub use operator::{assemble_operator, ComponentOperator};
pub use semilinear::{solve_forward_semilinear, solve_forward_semilinear_with, NewtonOptions};
