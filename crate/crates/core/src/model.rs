//! Scenario description types shared by every other module.
//!
//! All quantities are in linear scale except the shadowing parameters, which
//! follow the usual convention of a Gaussian in dB. Energy is normalized so
//! that one served user drains one unit per second.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lognormal shadowing: the power gain is `10^(X/10)` with `X ~ N(mean_db, std_db^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowingSpec {
    pub mean_db: f64,
    pub std_db: f64,
}

impl ShadowingSpec {
    /// No shadowing (the constant gain 1).
    pub const NONE: ShadowingSpec = ShadowingSpec {
        mean_db: 0.0,
        std_db: 0.0,
    };

    pub fn lognormal(mean_db: f64, std_db: f64) -> Self {
        ShadowingSpec { mean_db, std_db }
    }

    pub fn is_degenerate(&self) -> bool {
        self.std_db == 0.0 && self.mean_db == 0.0
    }
}

impl Default for ShadowingSpec {
    fn default() -> Self {
        ShadowingSpec::NONE
    }
}

/// Physical parameters of one tier of base stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    /// BSs per unit area.
    pub density: f64,
    /// Transmit power per resource block.
    pub tx_power: f64,
    /// Energy units harvested per second.
    pub harvest_rate: f64,
    /// Battery capacity in energy units.
    pub battery: u32,
    #[serde(default)]
    pub shadowing: ShadowingSpec,
}

/// A complete K-tier scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub tiers: Vec<TierParams>,
    pub user_density: f64,
    pub path_loss_exp: f64,
    /// SIR threshold, linear scale.
    pub sir_target: f64,
}

impl NetworkScenario {
    pub fn num_tiers(&self) -> usize {
        self.tiers.len()
    }

    pub fn tier(&self, k: usize) -> Result<&TierParams> {
        self.tiers.get(k).ok_or(Error::TierIndex {
            index: k,
            tiers: self.tiers.len(),
        })
    }

    /// Total harvested energy per unit area and time, `sum_k lambda_k mu_k`.
    pub fn total_harvest(&self) -> f64 {
        self.tiers.iter().map(|t| t.density * t.harvest_rate).sum()
    }

    /// Checks every positivity and range constraint, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        validate(self)
    }
}

fn positive(value: f64, field: &'static str, tier: Option<usize>) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, tier, format!("{field} must be positive and finite, got {value}")))
    }
}

/// Validates a scenario; the error names the offending field and tier index.
pub fn validate(scenario: &NetworkScenario) -> Result<()> {
    if scenario.tiers.is_empty() {
        return Err(Error::invalid("tiers", None, "at least one tier is required"));
    }
    for (k, tier) in scenario.tiers.iter().enumerate() {
        positive(tier.density, "density", Some(k))?;
        positive(tier.tx_power, "tx_power", Some(k))?;
        positive(tier.harvest_rate, "harvest_rate", Some(k))?;
        if tier.battery < 1 {
            return Err(Error::invalid("battery", Some(k), "battery must be at least 1"));
        }
        let sh = tier.shadowing;
        if !sh.mean_db.is_finite() {
            return Err(Error::invalid("shadowing.mean_db", Some(k), "mean_db must be finite"));
        }
        if !(sh.std_db.is_finite() && sh.std_db >= 0.0) {
            return Err(Error::invalid(
                "shadowing.std_db",
                Some(k),
                format!("std_db must be finite and non-negative, got {}", sh.std_db),
            ));
        }
    }
    positive(scenario.user_density, "user_density", None)?;
    let alpha = scenario.path_loss_exp;
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(Error::invalid(
            "path_loss_exp",
            None,
            format!("path_loss_exp must exceed 2, got {alpha}"),
        ));
    }
    positive(scenario.sir_target, "sir_target", None)?;
    Ok(())
}

/// Per-tier availabilities, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AvailabilityVector(Vec<f64>);

impl AvailabilityVector {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        for (k, &r) in rho.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid("rho", Some(k), format!("availability must lie in [0, 1], got {r}")));
            }
        }
        Ok(AvailabilityVector(rho))
    }

    pub fn ones(k: usize) -> Self {
        AvailabilityVector(vec![1.0; k])
    }

    pub fn zeros(k: usize) -> Self {
        AvailabilityVector(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for AvailabilityVector {
    type Error = Error;

    fn try_from(rho: Vec<f64>) -> Result<Self> {
        AvailabilityVector::new(rho)
    }
}

impl From<AvailabilityVector> for Vec<f64> {
    fn from(v: AvailabilityVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for AvailabilityVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Decibel to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
