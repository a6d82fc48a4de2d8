//! JSON scenario files.
//!
//! A file mirrors `NetworkScenario`, with two conveniences: the user density may
//! be replaced by an over-provisioning factor, and the SIR target may be given
//! in dB. Optional sections carry per-tier cutoffs, an availability vector for
//! coverage and rate evaluation, simulation settings and a sweep.

use std::path::Path;

use anyhow::{bail, Context, Result};
use hetnet_core::analytic::user_density_for_gamma;
use hetnet_core::markov::PolicySpec;
use hetnet_core::model::{db_to_linear, AvailabilityVector, NetworkScenario, ShadowingSpec, TierParams};
use hetnet_core::sim::{BoundaryMode, SimConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierEntry {
    pub density: f64,
    pub tx_power: f64,
    pub harvest_rate: f64,
    pub battery: u32,
    #[serde(default)]
    pub shadowing: ShadowingSpec,
    /// Energy level at which an OFF BS turns back ON; 1 when absent.
    #[serde(default)]
    pub cutoff: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub window_side: Option<f64>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub probes: Option<usize>,
    pub guard_margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Rate threshold `T`.
    RateTarget,
    /// Both availabilities of a two-tier network over the same grid.
    Availability,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub tiers: Vec<TierEntry>,
    pub path_loss_exp: f64,
    #[serde(default)]
    pub user_density: Option<f64>,
    /// Over-provisioning factor; fixes the user density from the harvest totals.
    #[serde(default)]
    pub over_provisioning: Option<f64>,
    #[serde(default)]
    pub sir_target: Option<f64>,
    #[serde(default)]
    pub sir_target_db: Option<f64>,
    #[serde(default)]
    pub availability: Option<Vec<f64>>,
    #[serde(default)]
    pub rate_target: Option<f64>,
    #[serde(default)]
    pub simulation: Option<SimSection>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

/// Command-line overrides applied on top of a file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sir_target_db: Option<f64>,
    pub shadow_std_db: Option<f64>,
}

/// A parsed, validated scenario with its extras.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub name: String,
    pub scenario: NetworkScenario,
    pub policies: Vec<PolicySpec>,
    pub availability: Option<AvailabilityVector>,
    pub rate_target: Option<f64>,
    pub simulation: Option<SimSection>,
    pub sweep: Option<Sweep>,
}

impl Loaded {
    /// Simulation settings: file values, then flags, then defaults sized to `rho`.
    pub fn sim_config(&self, rho: &AvailabilityVector, seed: Option<u64>, replicates: Option<usize>) -> SimConfig {
        let section = self.simulation.clone().unwrap_or(SimSection {
            window_side: None,
            replicates: None,
            seed: None,
            probes: None,
            guard_margin: None,
        });
        let side = section
            .window_side
            .unwrap_or_else(|| SimConfig::suggested_window(&self.scenario, rho, 100.0));
        let mut config = SimConfig::new(
            side,
            replicates.or(section.replicates).unwrap_or(20),
            seed.or(section.seed).unwrap_or(1),
        );
        if let Some(p) = section.probes {
            config.probes = p;
        }
        if let Some(margin) = section.guard_margin {
            config.boundary = BoundaryMode::Guard { margin };
        }
        config
    }
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ScenarioFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    resolve(file, overrides).with_context(|| format!("in {}", path.display()))
}

pub fn resolve(file: ScenarioFile, overrides: &Overrides) -> Result<Loaded> {
    let sir_target = match (overrides.sir_target_db, file.sir_target_db, file.sir_target) {
        (Some(db), _, _) => db_to_linear(db),
        (None, Some(_), Some(_)) => bail!("give either sir_target or sir_target_db, not both"),
        (None, Some(db), None) => db_to_linear(db),
        (None, None, Some(lin)) => lin,
        (None, None, None) => bail!("missing sir_target (or sir_target_db)"),
    };
    let tiers: Vec<TierParams> = file
        .tiers
        .iter()
        .map(|t| {
            let mut shadowing = t.shadowing;
            if let Some(std) = overrides.shadow_std_db {
                shadowing.std_db = std;
            }
            TierParams {
                density: t.density,
                tx_power: t.tx_power,
                harvest_rate: t.harvest_rate,
                battery: t.battery,
                shadowing,
            }
        })
        .collect();
    let mut scenario = NetworkScenario {
        tiers,
        user_density: 1.0,
        path_loss_exp: file.path_loss_exp,
        sir_target,
    };
    scenario.user_density = match (file.user_density, file.over_provisioning) {
        (Some(_), Some(_)) => bail!("give either user_density or over_provisioning, not both"),
        (Some(d), None) => d,
        (None, Some(gamma)) => user_density_for_gamma(&scenario, gamma)?,
        (None, None) => bail!("missing user_density (or over_provisioning)"),
    };
    scenario.validate()?;

    let policies = file
        .tiers
        .iter()
        .map(|t| PolicySpec::new(t.cutoff.unwrap_or(PolicySpec::MIN_CUTOFF.cutoff), t.battery))
        .collect::<hetnet_core::Result<Vec<_>>>()?;
    let availability = match file.availability {
        Some(v) => {
            if v.len() != scenario.num_tiers() {
                bail!("availability has {} entries for {} tiers", v.len(), scenario.num_tiers());
            }
            Some(AvailabilityVector::new(v)?)
        }
        None => None,
    };
    if let Some(t) = file.rate_target {
        if !(t >= 0.0) {
            bail!("rate_target must be non-negative");
        }
    }
    if let Some(s) = &file.sweep {
        if s.steps == 0 || !s.start.is_finite() || !s.stop.is_finite() {
            bail!("sweep needs finite bounds and at least one step");
        }
        if s.axis == SweepAxis::Availability && !(s.start.min(s.stop) >= 0.0 && s.start.max(s.stop) <= 1.0) {
            bail!("availability sweep must stay within [0, 1]");
        }
    }
    Ok(Loaded {
        name: file.name.unwrap_or_else(|| "scenario".into()),
        scenario,
        policies,
        availability,
        rate_target: file.rate_target,
        simulation: file.simulation,
        sweep: file.sweep,
    })
}
