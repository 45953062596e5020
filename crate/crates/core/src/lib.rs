//! Numerical laboratory for the stochastic heat equation with seed bank.
//!
//! * [`grid`]: lattices, fields, edge functionals, Gaussian utilities.
//! * [`spde`]: Euler–Maruyama solver for the coupled active/dormant SPDE and
//!   the delay (memory) reconstruction of the dormant field.
//! * [`dual`]: on/off coalescing random walks and on/off Brownian paths.
//! * [`pfde`]: the forced delay PDE in local and memory form, plus the
//!   supersolution, comparison-bound and envelope checks.
//! * [`feynman_kac`]: path-space Monte Carlo for the delay PDE.
//! * [`experiments`]: duality, interface, tail and symmetry experiments.
//! * [`config`], [`report`], [`battery`]: configuration, output and the
//!   acceptance battery.

pub mod battery;
pub mod config;
pub mod dual;
pub mod error;
pub mod experiments;
pub mod feynman_kac;
pub mod grid;
pub mod pfde;
pub mod report;
pub mod spde;
pub mod stats;

pub use dual::{DualRates, DualState, FrontIndicator, Marker, OnOffPath, Walker};
pub use error::{Error, Result};
pub use grid::{EdgeReport, Grid1D, LatticeField, MINUS_INF, PLUS_INF};
pub use pfde::{PfdeConfig, PfdeSolution};
pub use spde::{SimConfig, SpdeState, SpdeTrajectory};
pub use stats::McEstimate;
