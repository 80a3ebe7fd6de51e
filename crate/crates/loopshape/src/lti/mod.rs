//! Linear time-invariant system algebra: polynomials, SISO transfer
//! functions, state-space realizations, interconnections, and frequency
//! evaluation.
//!
//! All types are immutable values after construction and every operation is
//! a pure function, so they are safe to use from parallel code.

pub mod poly;
pub mod ss;
pub mod tf;

pub use poly::Polynomial;
pub use ss::{expm, ss_to_tf, tf_to_ss, StateSpace};
pub use tf::{feedback_unity, series, to_db, FreqSample, TransferFunction};
