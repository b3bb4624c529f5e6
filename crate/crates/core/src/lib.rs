//! Generalized lambda models (GLaM): surrogates of stochastic simulators.
//!
//! The response distribution at an input `x` is a generalized lambda
//! distribution whose four parameters are polynomial chaos expansions of `x`.
//! The expansions are fitted by maximum conditional likelihood from data with
//! a single simulator run per design point.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod doe;
pub mod error;
pub mod glam;
pub mod gld;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod pce;
pub mod regression;
pub mod seed;
pub mod simulators;

pub use error::{Error, Result};
pub use gld::{LambdaVector, SupportInterval};
