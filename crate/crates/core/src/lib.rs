//! Co-design simulator for analog non-volatile-memory neuromorphic crossbars.
//!
//! The crate couples a stochastic RRAM conductance model ([`device`]), a
//! two-cell differential synapse with refresh ([`synapse`]), device-in-the-loop
//! RBM training ([`nn`]) and array-level electrical analyses: wire and
//! programming energy ([`energy`]), IR drop and read inaccuracy ([`crossbar`]),
//! and corelet partitioning ([`partition`]).

// Negated float comparisons are used to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod crossbar;
pub mod data;
pub mod device;
pub mod energy;
pub mod error;
pub mod nn;
pub mod partition;
pub mod rng;
pub mod synapse;

pub use error::{Error, Result};
