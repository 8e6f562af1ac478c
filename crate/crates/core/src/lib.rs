//! Unrelated-machine weighted completion time via the configuration LP and
//! randomized iterative rounding, plus a checker for the approximation-ratio
//! certificate of the rounding.
//!
//! Pipeline: [`Instance::swap`] to machine-independent sizes, solve the
//! configuration LP ([`config_lp`]), draw a random shift and build the marked
//! edge graph ([`partition`]), then round each size class
//! ([`rounding`]). [`analysis`] holds the LP-cost rewrite, the conditional
//! cost bound and the Monte-Carlo harness; [`certificate`] verifies the
//! per-interval Lagrangian parameters.

pub mod analysis;
pub mod certificate;
pub mod config_lp;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod instance;
pub mod partition;
pub mod rng;
pub mod rounding;
pub mod simplex;
pub mod stats;

pub use error::{Error, Result};
pub use instance::{Assignment, Instance};
