//! 2D Rayleigh-Benard convection in vorticity-streamfunction form, with a
//! continuous (nudging) data-assimilation algorithm driven by coarse vorticity
//! or local-circulation observations, and the diagnostics needed to measure
//! synchronization rates against rigorous bounds.
//!
//! Module map:
//!
//! * [`spectral`] - Fourier x Chebyshev transforms and operators.
//! * [`elliptic`] - streamfunction Poisson solver and velocity reconstruction.
//! * [`benard`] - the reference system: tendencies, RK4 stepping, diagnostics.
//! * [`assimilation`] - interpolant observables, the nudged system, twin runs.
//! * [`theory`] - evaluators for the rigorous sufficiency conditions.
//! * [`diagnostics`] - error norms, decay-rate fits, checkpoint/time-series IO.

pub mod assimilation;
pub mod benard;
pub mod diagnostics;
pub mod elliptic;
mod error;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
