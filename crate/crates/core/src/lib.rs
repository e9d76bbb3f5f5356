//! Outage probability and transmission capacity for a two-tier
//! macrocell/femtocell downlink.
//!
//! Every fading ratio that shows up in a signal-to-interference expression
//! (Rayleigh over Rayleigh, log-normal over Rayleigh, and their reciprocals)
//! is replaced by a fitted log-normal surrogate. Interference-to-signal sums
//! are then collapsed to a single log-normal with the Fenton-Wilkinson moment
//! match, which gives outage as a Gaussian tail probability.
//!
//! The [`simulation`] module is an independent Monte Carlo oracle that
//! evaluates the same quantities straight from the channel model, without any
//! surrogate, and is used to validate the analytic path.

// Guards of the form `!(x > 0.0)` intentionally reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod error;
pub mod lognormal_algebra;
pub mod network_model;
pub mod outage_analysis;
pub mod ratio_approx;
pub mod simulation;

pub use error::{Error, Result};
