//! Heterogeneous follow-the-leader traffic and its macroscopic limit.
//!
//! Cars carry i.i.d. driver types `Z_i` drawn from a finite law. Car `i` moves
//! at `V_{Z_i}(U_{i+1} - U_i)`. Rescaled positions `eps * U_{x/eps}(t/eps)`
//! approach the solution of `u_t = F(u_x)`, where the effective velocity `F`
//! solves `E[V_{Z_0}^{-1}(F(p))] = p` above the mean jam headway. The density
//! pushed forward by `u` solves the LWR law `rho_t + (rho F(1/rho))_x = 0`.
//!
//! - [`velocity_models`]: velocity functions, type laws, assumption checks.
//! - [`micro_sim`]: the car-following integrator and its diagnostics.
//! - [`effective_flux`]: construction and evaluation of `F`.
//! - [`macro_solvers`]: Hamilton–Jacobi and Godunov solvers, the push-forward.
//! - [`convergence`]: rescaling experiments and fundamental-diagram studies.
//!
//! The `book/` directory of the repository walks through each piece; its code
//! listings are compiled and run as doctests of this crate.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod effective_flux;
mod error;
pub mod macro_solvers;
pub mod micro_sim;
pub mod rng;
pub mod velocity_models;

pub use error::{Error, Result};

pub use convergence::{
    convergence_study, convergence_study_with, fundamental_diagram_study, lwr_bridge, ConvergenceReport, DiagramRow,
    InitialProfile, Scenario, Verdict,
};
pub use effective_flux::{build_flux, effective_speed, expected_inverse, EffectiveFlux};
pub use macro_solvers::{
    invert_profile, pushforward_density, solve_hj, solve_lwr_godunov, Boundary, FieldKind, Grid1D, GridField,
};
pub use micro_sim::{
    asymptotic_speed, check_comparison, corrector_sequence, integrate, localization_bound_check, LeaderClosure,
    MicroState, MicroTrajectory, SpeedProbe, StepConfig,
};
pub use velocity_models::{
    sample_types, validate_assumptions, Assumption, OvfFamily, TypeDistribution, ValidationReport, VehicleTypeSpec,
};

// Book chapters, compiled as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/velocity-models.md")]
    mod velocity_models {}
    #[doc = include_str!("../../../book/src/micro-simulation.md")]
    mod micro_simulation {}
    #[doc = include_str!("../../../book/src/effective-flux.md")]
    mod effective_flux {}
    #[doc = include_str!("../../../book/src/macro-solvers.md")]
    mod macro_solvers {}
    #[doc = include_str!("../../../book/src/convergence.md")]
    mod convergence {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
