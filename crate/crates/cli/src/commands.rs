use std::io::Write;

use anyhow::{bail, Result};
use hetnet_core::analytic::{EnergyModel, FixedPointResult, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use hetnet_core::coverage::{coverage_prob, tier_association_prob, RateCcdf, RateQuery};
use hetnet_core::markov::PolicySpec;
use hetnet_core::model::{linear_to_db, AvailabilityVector};
use hetnet_core::region::Region;
use hetnet_core::sim;
use hetnet_core::validation::{validate_scenario, ValidationOptions};

use crate::scenario::{self, Loaded, Overrides, SweepAxis};
use crate::Common;

/// Rate threshold used when neither the flags nor the file give one.
const DEFAULT_RATE_TARGET: f64 = 0.1;

fn load(common: &Common) -> Result<Loaded> {
    let overrides = Overrides {
        sir_target_db: common.sir_target_db,
        shadow_std_db: common.shadow_std_db,
    };
    let mut loaded = scenario::load(&common.scenario, &overrides)?;
    for &k in &common.policy2 {
        let Some(tier) = loaded.scenario.tiers.get(k) else {
            bail!("--policy2 names tier {} but the scenario has {}", k + 1, loaded.scenario.num_tiers());
        };
        loaded.policies[k] = PolicySpec::full_charge(tier.battery);
    }
    Ok(loaded)
}

fn solve(loaded: &Loaded, common: &Common) -> Result<(EnergyModel, FixedPointResult)> {
    let model = EnergyModel::new(&loaded.scenario)?;
    let fixed = model.solve(&loaded.policies, common.tol.unwrap_or(DEFAULT_TOLERANCE), DEFAULT_MAX_ITER)?;
    Ok((model, fixed))
}

/// The file's availability vector, else the solved one, else all ones.
fn operating_point(loaded: &Loaded, common: &Common) -> Result<AvailabilityVector> {
    if let Some(rho) = &loaded.availability {
        return Ok(rho.clone());
    }
    let (_, fixed) = solve(loaded, common)?;
    if fixed.rho.as_slice().iter().all(|&r| r > 0.0) {
        Ok(fixed.rho)
    } else {
        Ok(AvailabilityVector::ones(loaded.scenario.num_tiers()))
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::Writer::from_writer(out)
}

/// Shortest round-trip form, switching to exponent notation for tiny or huge magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn policy_label(policy: PolicySpec) -> String {
    format!("S({})", policy.cutoff)
}

/// Writes the fixed-point table; returns whether the scenario is feasible.
pub fn availability<W: Write>(common: &Common, out: W) -> Result<bool> {
    let loaded = load(common)?;
    let (model, fixed) = solve(&loaded, common)?;
    let gamma = model.gamma();
    let mut w = csv_writer(out);
    w.write_record(["tier", "policy", "rho", "gamma", "feasible", "iterations", "residual"])?;
    for (k, &policy) in loaded.policies.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            policy_label(policy),
            num(fixed.rho[k]),
            num(gamma),
            fixed.feasible.to_string(),
            fixed.iterations.to_string(),
            num(fixed.residual),
        ])?;
    }
    w.flush()?;
    Ok(fixed.feasible)
}

pub fn region<W: Write>(common: &Common, grid: usize, constrain: &[usize], out: W) -> Result<()> {
    let loaded = load(common)?;
    if loaded.scenario.num_tiers() != 2 {
        bail!("region needs a two-tier scenario, got {} tiers", loaded.scenario.num_tiers());
    }
    let mut constraints = [None, None];
    for &k in constrain {
        if k > 1 {
            bail!("--constrain names tier {} of a two-tier scenario", k + 1);
        }
        constraints[k] = Some(PolicySpec::full_charge(loaded.scenario.tiers[k].battery));
    }
    let region = Region::new(&loaded.scenario)?;
    // Tier 2's boundary is swept against tier 1 and vice versa.
    let second = region.sweep_boundary(1, grid, None)?;
    let first = region.sweep_boundary(0, grid, None)?;
    let constrained = if constrain.is_empty() {
        None
    } else {
        Some((
            region.sweep_boundary(1, grid, constraints[1])?,
            region.sweep_boundary(0, grid, constraints[0])?,
        ))
    };

    let mut w = csv_writer(out);
    let mut header = vec!["grid", "rho2_star_given_rho1", "rho1_star_given_rho2"];
    if constrained.is_some() {
        header.extend(["rho2_star_constrained", "rho1_star_constrained"]);
    }
    w.write_record(&header)?;
    for i in 0..grid {
        let mut row = vec![num(second.grid[i].0), num(second.grid[i].1), num(first.grid[i].1)];
        if let Some((c2, c1)) = &constrained {
            row.push(num(c2.grid[i].1));
            row.push(num(c1.grid[i].1));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn coverage<W: Write>(common: &Common, out: W) -> Result<()> {
    let loaded = load(common)?;
    let s = &loaded.scenario;
    let mut w = csv_writer(out);
    w.write_record(["sir_target_db", "path_loss_exp", "coverage"])?;
    w.write_record([
        num(linear_to_db(s.sir_target)),
        num(s.path_loss_exp),
        num(coverage_prob(s)?),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn rate<W: Write>(common: &Common, thresholds: &[f64], out: W) -> Result<()> {
    let loaded = load(common)?;
    let s = &loaded.scenario;
    let mut ccdf = RateCcdf::new(s.path_loss_exp, RateQuery::default())?;
    let mut w = csv_writer(out);
    let single = loaded.rate_target.unwrap_or(DEFAULT_RATE_TARGET);

    let availability_sweep = loaded.sweep.as_ref().filter(|sw| sw.axis == SweepAxis::Availability);
    if thresholds.is_empty() {
        if let Some(sweep) = availability_sweep {
            if s.num_tiers() != 2 {
                bail!("availability sweeps need a two-tier scenario");
            }
            w.write_record(["rho1", "rho2", "rate_target", "ccdf"])?;
            let points = sweep.points();
            ccdf.set_rate_target(single)?;
            for &r1 in &points {
                for &r2 in &points {
                    let rho = AvailabilityVector::new(vec![r1, r2])?;
                    let p = ccdf.evaluate(s, &rho)?;
                    w.write_record([num(r1), num(r2), num(single), num(p)])?;
                }
            }
            w.flush()?;
            return Ok(());
        }
    }

    let targets: Vec<f64> = if !thresholds.is_empty() {
        thresholds.to_vec()
    } else {
        match &loaded.sweep {
            Some(sweep) if sweep.axis == SweepAxis::RateTarget => sweep.points(),
            _ => vec![single],
        }
    };
    let rho = operating_point(&loaded, common)?;
    let mut header: Vec<String> = (1..=s.num_tiers()).map(|k| format!("rho{k}")).collect();
    header.extend(["rate_target".into(), "ccdf".into()]);
    w.write_record(&header)?;
    for t in targets {
        ccdf.set_rate_target(t)?;
        let p = ccdf.evaluate(s, &rho)?;
        let mut row: Vec<String> = rho.as_slice().iter().map(|&r| num(r)).collect();
        row.extend([num(t), num(p)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn simulate<W: Write>(common: &Common, rate_target: Option<f64>, out: W) -> Result<()> {
    let loaded = load(common)?;
    let s = &loaded.scenario;
    let rho = operating_point(&loaded, common)?;
    let config = loaded.sim_config(&rho, common.seed, common.replicates);
    let model = EnergyModel::new(s)?;
    let mut w = csv_writer(out);
    w.write_record(["quantity", "tier", "analytic", "mc_mean", "ci_halfwidth_99", "samples", "seed"])?;
    let mut row = |quantity: &str, tier: Option<usize>, analytic: f64, est: &sim::SimEstimate| {
        w.write_record([
            quantity.to_string(),
            tier.map(|k| (k + 1).to_string()).unwrap_or_default(),
            num(analytic),
            num(est.mean),
            num(est.ci_halfwidth_99),
            est.samples.to_string(),
            est.seed.to_string(),
        ])
    };

    let shares = sim::association_mc(s, &rho, &config)?;
    for k in 0..s.num_tiers() {
        if rho[k] * s.tiers[k].density <= 0.0 {
            continue;
        }
        let (area, _) = sim::service_area_mc(s, &rho, k, &config)?;
        row("service_area", Some(k), model.mean_service_area(rho.as_slice(), k)?, &area)?;
        row("association", Some(k), tier_association_prob(s, &rho, k)?, &shares[k])?;
    }
    row("coverage", None, coverage_prob(s)?, &sim::coverage_mc(s, &rho, &config)?)?;
    if let Some(t) = rate_target.or(loaded.rate_target) {
        let mut ccdf = RateCcdf::new(s.path_loss_exp, RateQuery::new(t))?;
        row("rate_ccdf", None, ccdf.evaluate(s, &rho)?, &sim::rate_mc(s, &rho, t, &config)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Prints one line per check; returns whether all passed.
pub fn validate<W: Write>(common: &Common, mut out: W) -> Result<bool> {
    let loaded = load(common)?;
    let mut options = ValidationOptions {
        rate_target: Some(loaded.rate_target.unwrap_or(DEFAULT_RATE_TARGET)),
        ..ValidationOptions::default()
    };
    if let Some(seed) = common.seed {
        options.seed = seed;
    }
    if let Some(r) = common.replicates {
        options.replicates = r;
    }
    if let Some(tol) = common.tol {
        options.solver_tolerance = tol;
    }
    let report = validate_scenario(&loaded.scenario, &loaded.policies, loaded.availability.as_ref(), &options)?;
    writeln!(out, "scenario: {}", loaded.name)?;
    for c in &report.checks {
        let seed = c.seed.map(|s| format!(" seed={s}")).unwrap_or_default();
        writeln!(
            out,
            "{} {}: analytic={} oracle={} tolerance={}{seed}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            num(c.analytic),
            num(c.oracle),
            num(c.tolerance),
        )?;
    }
    for s in &report.skipped {
        writeln!(out, "SKIP {s}")?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} checks, {} failed", report.checks.len(), failed)?;
    Ok(report.all_passed())
}
