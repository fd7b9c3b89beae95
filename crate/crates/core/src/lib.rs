//! Identification of non-causal linear state-space systems driven by two
//! independent i.i.d. switching sequences.
//!
//! The model is
//!
//! ```text
//! x_c(t) = A_c(s_c(t)) x_c(t-1) + v_c(t)
//! x_a(t) = A_a(s_a(t)) x_a(t+1) + v_a(t)
//! y(t)   = C_c(s_c(t)) x_c(t) + C_a(s_a(t)) x_a(t) + v_m(t)
//! ```
//!
//! with the causal state running forward from a known `x_c(0)` and the
//! anticausal state running backward from a known `x_a(T+1)`. Parameters are
//! estimated with a hard-assignment EM: the E-step assigns modes and runs a
//! bidirectional Kalman filter, the M-step solves switching least squares.

pub mod acceptance;
pub mod em;
mod error;
pub mod estep;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod mstep;
pub mod oracle;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{Dims, ModelParams, SwitchingSequence};
pub use simulate::Trajectory;
