//! SIR coverage probability and downlink rate distribution.

use serde::{Deserialize, Serialize};

use crate::analytic::association_weight;
use crate::error::{Error, Result};
use crate::model::{validate, AvailabilityVector, NetworkScenario};
use crate::quad;

const QUAD_ABS_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-13;

/// Shape of the cell-load approximation (the "3.5" law).
const LOAD_SHAPE: f64 = 3.5;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(Error::invalid("path_loss_exp", None, format!("path_loss_exp must exceed 2, got {alpha}")));
    }
    Ok(())
}

/// `2F1(1, b; b+1; -beta)` for `0 < b < 1`, from its Euler integral.
///
/// With `c - b = 1` the Euler kernel is `b t^(b-1) / (1 + beta t)`; the change of
/// variable `u = t^b` removes the endpoint singularity, leaving
/// `int_0^1 du / (1 + beta u^(1/b))`.
pub fn hyp2f1_unit_shift(b: f64, beta: f64) -> f64 {
    let p = 1.0 / b;
    let f = |u: f64| 1.0 / (1.0 + beta * u.powf(p));
    // Split at the knee of the integrand so the adaptive rule sees both scales.
    let knee = beta.powf(-b);
    if knee > 0.0 && knee < 1.0 {
        quad::integrate(f, 0.0, knee, QUAD_ABS_TOL, QUAD_REL_TOL) + quad::integrate(f, knee, 1.0, QUAD_ABS_TOL, QUAD_REL_TOL)
    } else {
        quad::integrate(f, 0.0, 1.0, QUAD_ABS_TOL, QUAD_REL_TOL)
    }
}

/// `F(beta, alpha) = 2 beta / (alpha - 2) * 2F1(1, 1 - 2/alpha; 2 - 2/alpha; -beta)`.
pub fn hyper_f(beta: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(beta >= 0.0) || beta.is_nan() {
        return Err(Error::invalid("sir_target", None, format!("threshold must be non-negative, got {beta}")));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    if beta.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * beta / (alpha - 2.0) * hyp2f1_unit_shift(1.0 - 2.0 / alpha, beta))
}

/// Coverage at threshold `beta`, `1 / (1 + F(beta, alpha))`.
pub fn coverage_at(beta: f64, alpha: f64) -> Result<f64> {
    Ok(1.0 / (1.0 + hyper_f(beta, alpha)?))
}

/// Probability that the typical user's SIR exceeds the target.
///
/// Depends only on `(sir_target, path_loss_exp)`: densities, powers, shadowing
/// and availabilities all drop out in the interference-limited regime.
pub fn coverage_prob(scenario: &NetworkScenario) -> Result<f64> {
    validate(scenario)?;
    coverage_at(scenario.sir_target, scenario.path_loss_exp)
}

fn association_terms(scenario: &NetworkScenario, rho: &AvailabilityVector) -> Result<Vec<f64>> {
    if rho.len() != scenario.num_tiers() {
        return Err(Error::invalid(
            "rho",
            None,
            format!("expected {} availabilities, got {}", scenario.num_tiers(), rho.len()),
        ));
    }
    scenario
        .tiers
        .iter()
        .zip(rho.as_slice())
        .map(|(t, r)| Ok(r * t.density * association_weight(t, scenario.path_loss_exp)?))
        .collect()
}

/// Probability that the typical user is served by tier `k`.
pub fn tier_association_prob(scenario: &NetworkScenario, rho: &AvailabilityVector, k: usize) -> Result<f64> {
    validate(scenario)?;
    scenario.tier(k)?;
    let terms = association_terms(scenario, rho)?;
    let total: f64 = terms.iter().sum();
    if total <= 0.0 {
        return Err(Error::NoBsAvailable);
    }
    Ok(terms[k] / total)
}

/// Iterator over the approximate pmf of the number of *other* users sharing the
/// tagged user's BS, for mean cell load `x` (users per BS).
///
/// `p(n) = 3.5^3.5 / n! * Gamma(n + 4.5) / Gamma(3.5) * x^n * (3.5 + x)^-(n + 4.5)`,
/// evaluated through its log-space ratio `p(n+1) / p(n)` so large `n` never
/// touches the Gamma function directly.
#[derive(Debug, Clone)]
pub struct LoadPmf {
    n: u64,
    ln_p: f64,
    ln_step: f64,
}

impl LoadPmf {
    pub fn new(x: f64) -> Self {
        let ln_base = (LOAD_SHAPE / (LOAD_SHAPE + x)).ln();
        LoadPmf {
            n: 0,
            ln_p: (LOAD_SHAPE + 1.0) * ln_base,
            ln_step: (x / (LOAD_SHAPE + x)).ln(),
        }
    }
}

impl Iterator for LoadPmf {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let p = self.ln_p.exp();
        let n = self.n as f64;
        self.ln_p += ((n + LOAD_SHAPE + 1.0) / (n + 1.0)).ln() + self.ln_step;
        self.n += 1;
        Some(p)
    }
}

/// Rate target and series controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateQuery {
    /// Rate threshold in bps/Hz.
    pub rate_target: f64,
    pub series_tolerance: f64,
    pub max_terms: usize,
}

impl RateQuery {
    pub fn new(rate_target: f64) -> Self {
        RateQuery {
            rate_target,
            ..RateQuery::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.rate_target >= 0.0) {
            return Err(Error::invalid("rate_target", None, format!("must be non-negative, got {}", self.rate_target)));
        }
        if !(self.series_tolerance > 0.0) {
            return Err(Error::invalid("series_tolerance", None, "must be positive"));
        }
        if self.max_terms < 1 {
            return Err(Error::invalid("max_terms", None, "must be at least 1"));
        }
        Ok(())
    }
}

impl Default for RateQuery {
    fn default() -> Self {
        RateQuery {
            rate_target: 0.0,
            series_tolerance: 1e-8,
            max_terms: 500,
        }
    }
}

/// Evaluates rate coverage for a fixed `(T, alpha)` and caches the per-term
/// coverage factors, which do not depend on the availabilities.
#[derive(Debug, Clone)]
pub struct RateCcdf {
    query: RateQuery,
    alpha: f64,
    factors: Vec<f64>,
}

impl RateCcdf {
    pub fn new(alpha: f64, query: RateQuery) -> Result<Self> {
        check_alpha(alpha)?;
        query.check()?;
        Ok(RateCcdf {
            query,
            alpha,
            factors: Vec::new(),
        })
    }

    pub fn rate_target(&self) -> f64 {
        self.query.rate_target
    }

    /// Switches the threshold, dropping the cached factors if it changed.
    pub fn set_rate_target(&mut self, rate_target: f64) -> Result<()> {
        RateQuery { rate_target, ..self.query }.check()?;
        if rate_target != self.query.rate_target {
            self.query.rate_target = rate_target;
            self.factors.clear();
        }
        Ok(())
    }

    /// `1 / (1 + F(2^(T(n+1)) - 1, alpha))`.
    fn factor(&mut self, n: usize) -> f64 {
        while self.factors.len() <= n {
            let m = self.factors.len() as f64;
            let beta = (self.query.rate_target * (m + 1.0) * std::f64::consts::LN_2).exp_m1();
            let c = coverage_at(beta, self.alpha).expect("alpha checked");
            self.factors.push(c);
        }
        self.factors[n]
    }

    /// `P(R > T)` at availabilities `rho`.
    pub fn evaluate(&mut self, scenario: &NetworkScenario, rho: &AvailabilityVector) -> Result<f64> {
        validate(scenario)?;
        if scenario.path_loss_exp != self.alpha {
            return Err(Error::invalid("path_loss_exp", None, "scenario does not match evaluator"));
        }
        let terms = association_terms(scenario, rho)?;
        let total: f64 = terms.iter().sum();
        if total <= 0.0 {
            return Err(Error::NoBsAvailable);
        }
        if self.query.rate_target == 0.0 {
            return Ok(1.0);
        }
        let effective_users = coverage_prob(scenario)? * scenario.user_density;
        // (association probability, mean number of other users in the cell)
        let tiers: Vec<(f64, f64)> = terms
            .iter()
            .zip(&scenario.tiers)
            .zip(rho.as_slice())
            .filter(|((&a, _), _)| a > 0.0)
            .map(|((&a, t), &r)| (a / total, effective_users * (a / total) / (r * t.density)))
            .collect();
        let last_mode = tiers.iter().map(|&(_, x)| x.floor() as usize).max().unwrap_or(0);
        let mut pmfs: Vec<LoadPmf> = tiers.iter().map(|&(_, x)| LoadPmf::new(x)).collect();

        let tol = self.query.series_tolerance;
        let mut sum = 0.0;
        let mut mass = 0.0;
        let mut term = 0.0;
        for n in 0..self.query.max_terms {
            let load: f64 = tiers
                .iter()
                .zip(pmfs.iter_mut())
                .map(|(&(p, _), pmf)| p * pmf.next().expect("infinite"))
                .sum();
            mass += load;
            term = self.factor(n) * load;
            sum += term;
            // Past every pmf mode both factors decrease, so the terms do too.
            if term < tol && n >= last_mode {
                return Ok(sum.min(1.0));
            }
        }
        let n = self.query.max_terms;
        let tail_bound = self.factor(n) * (1.0 - mass).max(0.0);
        if term < tol && tail_bound < tol {
            return Ok(sum.min(1.0));
        }
        Err(Error::Truncation {
            terms: n,
            partial_sum: sum,
            last_term: term,
            tail_bound,
        })
    }
}

/// Rate coverage `P(R > T)` with `R = log2(1 + SIR) / (cell load)`.
pub fn rate_ccdf(scenario: &NetworkScenario, rho: &AvailabilityVector, query: RateQuery) -> Result<f64> {
    RateCcdf::new(scenario.path_loss_exp, query)?.evaluate(scenario, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ShadowingSpec, TierParams};
    use proptest::prelude::*;

    fn tier(density: f64, tx_power: f64) -> TierParams {
        TierParams {
            density,
            tx_power,
            harvest_rate: 1.0,
            battery: 5,
            shadowing: ShadowingSpec::NONE,
        }
    }

    fn scenario(tiers: Vec<TierParams>, user_density: f64) -> NetworkScenario {
        NetworkScenario {
            tiers,
            user_density,
            path_loss_exp: 4.0,
            sir_target: 1.0,
        }
    }

    /// `2F1(1, b; b+1; -beta) = sum_n b / (b + n) (-beta)^n` for `beta < 1`.
    fn series_2f1(b: f64, beta: f64) -> f64 {
        let mut sum = 0.0;
        let mut pow = 1.0;
        for n in 0..2000 {
            sum += b / (b + n as f64) * pow;
            pow *= -beta;
        }
        sum
    }

    #[test]
    fn zero_threshold() {
        assert_eq!(hyper_f(0.0, 4.0).unwrap(), 0.0);
        assert_eq!(coverage_at(0.0, 3.0).unwrap(), 1.0);
        assert!(hyper_f(-1.0, 4.0).is_err());
        assert!(hyper_f(1.0, 2.0).is_err());
    }

    #[test]
    fn arctan_reduction_at_alpha_four() {
        // 2F1(1, 1/2; 3/2; -beta) = atan(sqrt beta) / sqrt beta
        for beta in [1e-4f64, 0.3, 1.0, 7.0, 1e3, 1e8] {
            let s: f64 = beta.sqrt();
            let exact = s * s.atan();
            let got = hyper_f(beta, 4.0).unwrap();
            assert!((got - exact).abs() <= 1e-11 * exact.max(1.0), "beta {beta}: {got} vs {exact}");
        }
        assert!((hyper_f(1.0, 4.0).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn matches_power_series_inside_unit_disc() {
        for alpha in [2.3, 3.0, 3.7, 5.0, 8.0] {
            let b = 1.0 - 2.0 / alpha;
            for beta in [0.01, 0.2, 0.5] {
                let got = hyp2f1_unit_shift(b, beta);
                assert!((got - series_2f1(b, beta)).abs() < 1e-12, "alpha {alpha} beta {beta}");
            }
        }
    }

    #[test]
    fn matches_reference_values() {
        // F(beta, alpha) from an arbitrary-precision hypergeometric evaluation.
        let table = [
            (2.5, 1.0, 3.553_254_290_607_154_6),
            (2.5, 1e4, 6_775.745_518_392_731),
            (3.0, 3.16, 4.313_951_009_113_141_8),
            (3.7, 100.0, 19.637_854_359_867_174),
            (5.0, 10.0, 2.345_985_618_480_541_2),
            (6.0, 0.1, 0.048_116_569_153_610_958),
            (6.0, 1e4, 25.051_440_138_998_016),
        ];
        for (alpha, beta, exact) in table {
            let got = hyper_f(beta, alpha).unwrap();
            assert!(((got - exact) / exact).abs() < 1e-10, "alpha {alpha} beta {beta}: {got} vs {exact}");
        }
    }

    #[test]
    fn coverage_constant_at_zero_db() {
        let s = scenario(vec![tier(1.0, 1.0)], 5.0);
        let pc = coverage_prob(&s).unwrap();
        assert!((pc - 1.0 / (1.0 + std::f64::consts::FRAC_PI_4)).abs() < 1e-12);
        let mut hard = s.clone();
        hard.sir_target = 1e12;
        assert!(coverage_prob(&hard).unwrap() < 1e-5);
    }

    #[test]
    fn association_probabilities() {
        let one = scenario(vec![tier(3.0, 2.0)], 5.0);
        let rho = AvailabilityVector::new(vec![0.4]).unwrap();
        assert!((tier_association_prob(&one, &rho, 0).unwrap() - 1.0).abs() < 1e-15);

        let two = scenario(vec![tier(1.0, 1.0), tier(10.0, 1.0)], 5.0);
        let ones = AvailabilityVector::ones(2);
        assert!((tier_association_prob(&two, &ones, 0).unwrap() - 1.0 / 11.0).abs() < 1e-15);
        assert!((tier_association_prob(&two, &ones, 1).unwrap() - 10.0 / 11.0).abs() < 1e-15);
        assert_eq!(
            tier_association_prob(&two, &AvailabilityVector::zeros(2), 0),
            Err(Error::NoBsAvailable)
        );
    }

    #[test]
    fn rate_at_zero_target_is_one() {
        let s = scenario(vec![tier(1.0, 1.0), tier(2.0, 0.01)], 100.0);
        let rho = AvailabilityVector::new(vec![0.3, 0.8]).unwrap();
        assert_eq!(rate_ccdf(&s, &rho, RateQuery::new(0.0)).unwrap(), 1.0);
    }

    #[test]
    fn rate_vanishes_for_large_target() {
        let s = scenario(vec![tier(1.0, 1.0), tier(2.0, 0.01)], 100.0);
        let v = rate_ccdf(&s, &AvailabilityVector::ones(2), RateQuery::new(60.0)).unwrap();
        assert!(v < 1e-8, "{v}");
    }

    #[test]
    fn rate_truncation_reported() {
        let s = scenario(vec![tier(1.0, 1.0)], 1000.0);
        let query = RateQuery {
            rate_target: 0.001,
            series_tolerance: 1e-8,
            max_terms: 50,
        };
        match rate_ccdf(&s, &AvailabilityVector::ones(1), query) {
            Err(Error::Truncation { terms, tail_bound, .. }) => {
                assert_eq!(terms, 50);
                assert!(tail_bound > 1e-8);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn load_pmf_sums_to_one() {
        for x in [1e-3, 0.5, 3.5, 40.0, 400.0] {
            let total: f64 = LoadPmf::new(x).take(20_000).sum();
            assert!((total - 1.0).abs() < 1e-10, "x {x}: {total}");
        }
    }

    proptest! {
        #[test]
        fn load_pmf_matches_gamma_form(x in 0.01f64..200.0, n in 0usize..300) {
            use statrs::function::gamma::ln_gamma;
            let nf = n as f64;
            let ln_direct = 3.5 * 3.5f64.ln() - ln_gamma(nf + 1.0) + ln_gamma(nf + 4.5) - ln_gamma(3.5)
                + nf * x.ln() - (nf + 4.5) * (3.5 + x).ln();
            let got = LoadPmf::new(x).nth(n).unwrap();
            prop_assert!((got - ln_direct.exp()).abs() <= 1e-10 * ln_direct.exp().max(1e-300));
        }

        #[test]
        fn coverage_ignores_densities_and_shadowing(
            d1 in 0.1f64..10.0, d2 in 0.1f64..100.0, p2 in 0.001f64..1.0,
            m in -5.0f64..5.0, sd in 0.0f64..10.0,
        ) {
            let base = scenario(vec![tier(1.0, 1.0), tier(1.0, 1.0)], 5.0);
            let mut t2 = tier(d2, p2);
            t2.shadowing = ShadowingSpec::lognormal(m, sd);
            let other = scenario(vec![tier(d1, 1.0), t2], 5.0);
            prop_assert_eq!(coverage_prob(&base).unwrap(), coverage_prob(&other).unwrap());
        }

        #[test]
        fn hyper_f_increasing(alpha in 2.2f64..7.0, beta in 1e-3f64..1e3, step in 1.001f64..3.0) {
            prop_assert!(hyper_f(beta * step, alpha).unwrap() > hyper_f(beta, alpha).unwrap());
        }
    }
}
