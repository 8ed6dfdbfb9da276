//! Simulated tempering Langevin dynamics at finite switching frequency, its
//! infinite-switching limit (integrated tempering sampling, ITS), and the
//! estimators and large-deviation diagnostics used to compare them.
//!
//! Index 0 of every [`TemperatureLadder`] is the *physical* temperature. All
//! weighting factors `n_k` are carried as `ln n_k`.
//!
//! The crate is organised bottom-up:
//!
//! - [`potential`]: energy/force models (D-dimensional double well, WCA dimer
//!   in a periodic box, harmonic oscillator).
//! - [`ladder`]: mixture weights, acceptance probabilities, effective
//!   potential and force scaling.
//! - [`dynamics`]: Euler–Maruyama and BAOAB integrators with the temperature
//!   jump process, plus trajectory recording.
//! - [`adapt`]: iterative estimation of `ln Z_k`.
//! - [`estimators`]: reweighted averages, batch asymptotic variance,
//!   histograms, free-energy profiles and quadrature references.
//! - [`ldp`]: rate functionals `J0`, `J1` and `I^ν` on a grid.
//! - [`config`] and [`runner`]: the experiment file format and the
//!   `run | adapt | ldp | reference` commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod ladder;
pub mod ldp;
pub mod potential;
pub mod runner;

pub use error::{Error, Result};
pub use ladder::{TemperatureLadder, WeightVector};
pub use potential::{DimerInSolvent, DoubleWell, Harmonic, Model, Potential};
