//! Self-similar blowup profiles of the supercritical focusing wave equation
//! `u_tt - Δu = u^p` in three dimensions.
//!
//! The crate computes the discrete family of smooth profiles `u_n` on
//! `[0, 1]` by shooting from the center and the light cone, together with
//! the asymptotic predictions for large `n` and the diagnostics that go with
//! them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod integrate;
pub mod model;
pub mod odecore;
pub mod shoot;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use odecore::ProfileState;
