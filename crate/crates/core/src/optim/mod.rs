//! Derivative-based and derivative-free minimizers used by the GLaM fit.

pub mod cmaes;
pub mod trust_region;

pub use cmaes::{cmaes_constrained_minimize, CmaesOptions, CmaesResult};
pub use trust_region::{trust_region_minimize, TrustRegionOptions, TrustRegionResult};
