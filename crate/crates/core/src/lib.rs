//! Numerical laboratory for weakly coupled parabolic systems on annular domains.
//!
//! The crate discretizes reaction-diffusion systems with Robin, Neumann or
//! Dirichlet closures on a polar tensor grid, builds the exponential Carleman
//! weights attached to a level function of the annulus, evaluates boundary
//! observations on the outer circle, and runs the empirical experiments that
//! probe positivity, the Carleman inequality and the Lipschitz source
//! stability estimate.
//!
//! Module map:
//!
//! * [`geometry`]: polar grid, level function ψ₀, weight fields.
//! * [`pde`]: coefficients, operator assembly, linear and semilinear solvers,
//!   linearization, space-time norms.
//! * [`observe`]: traces, conormal derivatives, observation operator.
//! * [`carleman`]: both sides of the weighted inequality and parameter scans.
//! * [`positivity`]: sign hypotheses and invariant-cone checks.
//! * [`stability`]: source sampling and stability-constant estimation.
//! * [`export`]: CSV and binary dumps shared by the modules above.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the stencils.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod carleman;
pub mod digest;
mod error;
pub mod export;
pub mod geometry;
pub mod linalg;
pub mod observe;
pub mod par;
pub mod pde;
pub mod positivity;
pub mod stability;
pub mod stencil;

pub use error::{Error, Result};
pub use geometry::grid::{Boundary, Orientation, PolarGrid};
pub use pde::field::{SourceField, SpaceTimeField, StateField};
