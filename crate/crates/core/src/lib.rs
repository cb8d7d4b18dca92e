//! Multi-symplectic Birkhoffian integration for dissipative first-order PDEs.
//!
//! A system is described by two one-form components `F` (time) and `G`
//! (space) and a Birkhoffian `B`. The skew structure matrices `M`, `K` are
//! the antisymmetrized z-Jacobians of `F` and `G`, and the system reads
//!
//! ```text
//! M z_t + K z_x = grad_z B + F_t + G_x
//! ```
//!
//! The crate assembles those structures and checks the variational
//! self-adjointness conditions ([`structure`]), advances the damped wave family
//! with a conformal box scheme ([`integrator`]), certifies the discrete
//! multi-symplectic dissipation law on tangent solutions ([`monitor`]) and ships
//! the damped wave problem with exact solutions ([`problems`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fd;
pub mod integrator;
pub mod monitor;
pub mod problems;
pub mod structure;
pub mod sum;

pub use error::{Error, Result};
pub use integrator::{
    assemble_step_system, run_simulation, step_box, step_leapfrog, BoxStepper, Grid, Node,
    Scheme, SchemeConfig, StateLevel,
};
pub use monitor::{
    discrete_dissipation_residual, propagate_tangents, staggered_forms, DissipationReport,
    StaggeredForms, TangentPair,
};
pub use problems::{DampedWaveProblem, DampedWaveSystem};
pub use structure::{
    assemble_structure, birkhoff_residual, check_self_adjointness, covariant_force,
    BirkhoffSystem, CovariantSystem, SelfAdjointnessReport, StructureMatrices,
};
