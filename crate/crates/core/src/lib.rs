//! Calibration of local-stochastic volatility models through the nonlinear,
//! nonlocal forward equation for the joint density of spot and volatility
//! factor.
//!
//! The leverage function `a(t, S)` is recovered from the density `p` as
//! `a^2 = sigma_D^2 int p dy / int b^2 p dy`, and `p` is computed as the fixed
//! point of a map that freezes the nonlocal ratio and solves a linear
//! parabolic problem ([`fixed_point`]).

pub mod app;
pub mod error;
pub mod fixed_point;
pub mod grid;
pub mod holder;
pub mod interp;
pub mod linpde;
pub mod market;
pub mod model;
pub mod nonlocal;
pub mod par;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{Field3, GridSpec};
pub use par::Exec;
