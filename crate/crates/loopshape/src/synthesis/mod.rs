//! Riccati-based robust synthesis: CARE solver, H-infinity norm, normalized
//! coprime factorization margins, and the central loop-shaping controller.

pub mod care;
pub mod hinf;
pub mod ncf;

pub use care::{care_residual, care_residual_scale, solve_care, solve_lyapunov, CareProblem};
pub use hinf::{hinf_norm, sigma_at, HinfNorm};
pub use ncf::{
    achieved_margin, central_controller, central_controller_with, is_internally_stable, ncf,
    FixedStructureController, NcfData, STABILITY_THRESHOLD,
};
