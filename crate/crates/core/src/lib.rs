//! Mileage-aware wind power smoothing.
//!
//! A wind farm trades harvested energy against the regulation mileage its
//! fluctuations impose on AGC units. Every control cycle a receding-horizon
//! optimizer ([`mpc`]) plans rotor-speed and pitch trajectories, and a
//! cascade controller ([`cascade`]) tracks the first-step power command
//! using rotor inertia before resorting to pitch. [`sim`] closes the loop
//! over a scenario and compares against free-running MPPT.

// `!(x > 0.0)` is used on purpose throughout validation: it rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod cp;
pub mod error;
pub mod market;
pub mod mpc;
pub mod signal;
pub mod sim;
pub mod turbine;

pub use cp::{cp_eval, fit_cp, CpCoefficients, CpFit, CpGrid};
pub use error::{Error, Result};
pub use market::{AgcUnit, DispatchResult, MeritOrder};
pub use turbine::{TurbineParams, TurbineState};
