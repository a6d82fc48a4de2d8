//! Availability, coverage and rate analysis of K-tier cellular networks whose
//! base stations run solely on harvested energy.
//!
//! * [`model`]: scenario types and validation.
//! * [`analytic`]: service areas, energy utilization, the availability fixed point.
//! * [`markov`]: the per-BS birth-death energy chain and ON/OFF policies.
//! * [`region`]: the set of jointly achievable availabilities.
//! * [`coverage`]: SIR coverage and rate distribution.
//! * [`sim`]: spatial Monte Carlo oracles.
//! * [`validation`]: analytic-versus-oracle checks.

pub mod analytic;
pub mod coverage;
pub mod error;
pub mod markov;
pub mod model;
mod quad;
pub mod region;
pub mod sim;
pub mod validation;

pub use error::{Error, Result};

/// Standard normal quantile for a two-sided 99% interval.
pub(crate) const Z99: f64 = 2.575_829_303_549_069;
