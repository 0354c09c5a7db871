//! Annular geometry and the auxiliary-function pipeline:
//! grid → level function ψ₀ → subharmonic exponentiation → shift K → weights.

pub mod grid;
pub mod psi0;
pub mod weights;

pub use grid::{Boundary, Orientation, PolarGrid, Ring};
pub use psi0::{construct_psi0_flow, construct_psi0_radial, exponentiate_for_subharmonicity, FlowOptions, Psi0Field, DEFAULT_MU_GRID};
pub use weights::{
    check_weight_time_bounds, choose_shift_k, choose_shift_k_with, eval_weights, TimeBoundReport, WeightFields, WeightParams,
};
