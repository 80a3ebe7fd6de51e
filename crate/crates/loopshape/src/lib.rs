//! Robust autopilot synthesis toolkit.
//!
//! Builds a family of linearized pitch-axis plants over a flight envelope,
//! selects a nominal plant by the nu-gap metric, designs a coprime-factor
//! loop-shaping controller (weights tuned either by a minimum-phase magnitude
//! fit or by particle swarm optimization of the stability margin), and
//! verifies envelope-wide closed-loop stability plus step performance.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`lti`]: polynomials, transfer functions, state-space realizations.
//! - [`synthesis`]: Riccati solver, H-infinity norm, normalized coprime
//!   factorization, central controller, achieved stability margin.
//! - [`vgap`]: nu-gap metric with winding-number validity test, pairwise
//!   gap matrix, min-max nominal selection.
//! - [`missile`]: actuator and airframe transfer functions, dimensional
//!   derivatives, open-loop plant assembly, envelope ingestion.
//! - [`shaping`]: weight templates, frequency bounds, bound compliance,
//!   roll-off check, minimum-phase magnitude fit.
//! - [`pso`]: particle swarm optimizer and the margin-maximizing design cost.
//! - [`sim`]: exact zero-order-hold step response and step metrics.
//! - [`report`]: design report assembly, envelope certification, CSV/JSON
//!   emission.
//!
//! Data-parallel inner loops (gap matrix assembly, swarm evaluation,
//! per-point verification) run on rayon when the default `parallel` feature
//! is enabled and fall back to sequential iteration when it is not. Results
//! are bit-identical either way.

pub mod error;
pub(crate) mod par;
pub mod grid;
pub mod lti;
pub mod synthesis;
pub mod vgap;
pub mod missile;
pub mod shaping;
pub mod pso;
pub mod sim;
pub mod report;

pub use error::{Error, Result};
