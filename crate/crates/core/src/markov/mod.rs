//! Birth-death model of a single BS's energy buffer.
//!
//! Energy levels `0..=N` form a CTMC with birth rate `mu` (harvesting) and
//! death rate `nu` (serving users). A BS following policy `S(c)` serves until
//! the buffer empties, then stays OFF until it has harvested `c` units.
//!
//! Internally everything is expressed through the ratio `r = mu / nu` so that
//! powers stay bounded for batteries up to about a thousand units.

mod gillespie;

pub use gillespie::{simulate_on_off, OnOffEstimate};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this distance from `r = 1` the `(1 - r)` closed forms lose accuracy and
/// are replaced by direct summation.
const NEAR_UNIT_RATIO: f64 = 1e-6;

/// `(mu, nu, N)` for one BS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathSpec {
    pub harvest_rate: f64,
    pub utilization_rate: f64,
    pub battery: u32,
}

impl BirthDeathSpec {
    pub fn new(harvest_rate: f64, utilization_rate: f64, battery: u32) -> Result<Self> {
        if !(harvest_rate.is_finite() && harvest_rate > 0.0) {
            return Err(Error::invalid("harvest_rate", None, format!("must be positive, got {harvest_rate}")));
        }
        if !(utilization_rate.is_finite() && utilization_rate > 0.0) {
            return Err(Error::invalid(
                "utilization_rate",
                None,
                format!("must be positive, got {utilization_rate}"),
            ));
        }
        if battery < 1 {
            return Err(Error::invalid("battery", None, "battery must be at least 1"));
        }
        Ok(BirthDeathSpec {
            harvest_rate,
            utilization_rate,
            battery,
        })
    }

    /// `r = mu / nu`.
    pub fn ratio(&self) -> f64 {
        self.harvest_rate / self.utilization_rate
    }
}

/// Recharge target of an `S(c)` policy: OFF at level 0, back ON once `c` units are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicySpec {
    pub cutoff: u32,
}

impl PolicySpec {
    /// `S(1)`: back ON after a single harvested unit.
    pub const MIN_CUTOFF: PolicySpec = PolicySpec { cutoff: 1 };

    pub fn new(cutoff: u32, battery: u32) -> Result<Self> {
        let p = PolicySpec { cutoff };
        p.check(battery)?;
        Ok(p)
    }

    /// `S(N)`: wait for a full battery.
    pub fn full_charge(battery: u32) -> Self {
        PolicySpec { cutoff: battery }
    }

    pub fn check(&self, battery: u32) -> Result<()> {
        if self.cutoff < 1 || self.cutoff > battery {
            return Err(Error::invalid(
                "cutoff",
                None,
                format!("cutoff must lie in [1, {battery}], got {}", self.cutoff),
            ));
        }
        Ok(())
    }
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::MIN_CUTOFF
    }
}

/// `sum_{i=0}^{m-1} r^i`.
pub(crate) fn geometric_sum(r: f64, m: u32) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if (r - 1.0).abs() < NEAR_UNIT_RATIO {
        // Horner on the truncated polynomial; exact up to rounding.
        return (0..m).fold(0.0, |acc, _| acc * r + 1.0);
    }
    // (1 - r^m) / (1 - r) with the power taken through expm1 to avoid cancellation.
    let ln_r = r.ln();
    let num = -(m as f64 * ln_r).exp_m1();
    num / (1.0 - r)
}

/// Stationary probability of the empty state, `(1 - r) / (1 - r^(N+1))`.
///
/// Continuous at `r = 1` with limit `1 / (N + 1)`; for `r > 1` the expression is
/// rewritten in `1/r` so that it underflows gracefully instead of overflowing.
pub fn empty_probability(r: f64, battery: u32) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    if r.is_infinite() {
        return 0.0;
    }
    let n = battery;
    if (r - 1.0).abs() < NEAR_UNIT_RATIO {
        return 1.0 / geometric_sum(r, n + 1);
    }
    if r < 1.0 {
        1.0 / geometric_sum(r, n + 1)
    } else {
        let s = 1.0 / r;
        // s^N (1 - s) / (1 - s^(N+1))
        (n as f64 * s.ln()).exp() / geometric_sum(s, n + 1)
    }
}

/// Generator matrix over levels `0..=N` in ascending order.
pub fn generator(spec: &BirthDeathSpec) -> DMatrix<f64> {
    let n = spec.battery as usize;
    let (mu, nu) = (spec.harvest_rate, spec.utilization_rate);
    let mut q = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        if i < n {
            q[(i, i + 1)] = mu;
        }
        if i > 0 {
            q[(i, i - 1)] = nu;
        }
        let out: f64 = if i < n { mu } else { 0.0 } + if i > 0 { nu } else { 0.0 };
        q[(i, i)] = -out;
    }
    q
}

/// Stationary distribution, `pi_i` proportional to `r^i`.
pub fn stationary(spec: &BirthDeathSpec) -> Vec<f64> {
    let n = spec.battery as usize;
    let ln_r = spec.ratio().ln();
    // Normalize in log space against the largest weight.
    let top = if ln_r > 0.0 { n as f64 * ln_r } else { 0.0 };
    let weights: Vec<f64> = (0..=n).map(|i| (i as f64 * ln_r - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Availability of an `S(1)` BS, `1 - pi_0`.
pub fn stationary_availability(spec: &BirthDeathSpec) -> f64 {
    1.0 - empty_probability(spec.ratio(), spec.battery)
}

/// Closed-form entry `(i, j)` (1-based) of `(-B)^-1`, where `B` is the generator
/// restricted to levels `1..=N`.
pub fn neg_b_inverse_entry(spec: &BirthDeathSpec, i: usize, j: usize) -> Result<f64> {
    let n = spec.battery as usize;
    if i < 1 || j < 1 || i > n || j > n {
        return Err(Error::StateIndex {
            i,
            j,
            battery: spec.battery,
        });
    }
    let r = spec.ratio();
    let m = i.min(j);
    // nu^-j sum_{n=1}^{m} mu^(j-n) nu^(n-1) = r^(j-m) * sum_{l<m} r^l / nu
    Ok(r.powi((j - m) as i32) * geometric_sum(r, m as u32) / spec.utilization_rate)
}

/// The whole of `(-B)^-1` from the closed form.
pub fn neg_b_inverse(spec: &BirthDeathSpec) -> DMatrix<f64> {
    let n = spec.battery as usize;
    DMatrix::from_fn(n, n, |i, j| {
        neg_b_inverse_entry(spec, i + 1, j + 1).expect("indices in range")
    })
}

/// `-B`: the negated generator with the level-0 row and column removed.
pub fn neg_b(spec: &BirthDeathSpec) -> DMatrix<f64> {
    let q = generator(spec);
    let n = spec.battery as usize;
    -q.view((1, 1), (n, n)).into_owned()
}

/// `(-B)^-1` by dense LU factorization.
pub fn neg_b_inverse_dense(spec: &BirthDeathSpec) -> Option<DMatrix<f64>> {
    neg_b(spec).lu().try_inverse()
}

/// `(-B)^-1` by tridiagonal LU without pivoting, read off the generator.
///
/// Pivots are rebuilt from row sums (the exit rates to level 0) instead of
/// subtracting from the diagonal, so every step adds nonnegative numbers and
/// the inverse stays accurate entry by entry even when `r^N` exceeds `1 / eps`,
/// where [`neg_b_inverse_dense`] breaks down.
pub fn neg_b_inverse_lu(spec: &BirthDeathSpec) -> DMatrix<f64> {
    let q = generator(spec);
    let n = spec.battery as usize;
    // Level i + 1 sits at generator row i + 1.
    let up = |i: usize| if i + 1 < n { q[(i + 1, i + 2)] } else { 0.0 };
    let down = |i: usize| q[(i + 1, i)];
    let exit = |i: usize| if i == 0 { q[(1, 0)] } else { 0.0 };

    let mut pivot = vec![0.0; n];
    let mut mult = vec![0.0; n];
    let mut sum = exit(0);
    pivot[0] = sum + up(0);
    for i in 1..n {
        mult[i] = down(i) / pivot[i - 1];
        sum = exit(i) + mult[i] * sum;
        pivot[i] = sum + up(i);
    }

    // (-B)^-1 = U^-1 L^-1, both factors entrywise nonnegative.
    let mut l_inv = DMatrix::zeros(n, n);
    for j in 0..n {
        l_inv[(j, j)] = 1.0;
        for i in j + 1..n {
            l_inv[(i, j)] = l_inv[(i - 1, j)] * mult[i];
        }
    }
    let mut u_inv = DMatrix::zeros(n, n);
    for j in 0..n {
        u_inv[(j, j)] = 1.0 / pivot[j];
        for i in (0..j).rev() {
            u_inv[(i, j)] = u_inv[(i + 1, j)] * up(i) / pivot[i];
        }
    }
    u_inv * l_inv
}

/// Mean time to deplete the buffer starting from `start_level`, `((-B)^-1 1)(i)`.
pub fn mean_on_time(spec: &BirthDeathSpec, start_level: u32) -> Result<f64> {
    let n = spec.battery;
    if start_level < 1 || start_level > n {
        return Err(Error::StateIndex {
            i: start_level as usize,
            j: 1,
            battery: n,
        });
    }
    let r = spec.ratio();
    let nu = spec.utilization_rate;
    let i = start_level;
    if (r - 1.0).abs() < NEAR_UNIT_RATIO {
        let (profile, ln_scale) = hitting_profile(r, n);
        return Ok(profile[(i - 1) as usize] * ln_scale.exp() / nu);
    }
    // sum_{n=1}^{i} G(N-n+1) = (i - r^(N-i+1) G(i)) / (1 - r)
    let tail = ((n - i + 1) as f64 * r.ln()).exp() * geometric_sum(r, i);
    Ok((i as f64 - tail) / (1.0 - r) / nu)
}

/// `nu * E[J(i)] / exp(ln_scale)` for every start level `i = 1..=N`, built from
/// positive terms only. The scale keeps values finite when `r >> 1`.
pub(crate) fn hitting_profile(r: f64, battery: u32) -> (Vec<f64>, f64) {
    let n = battery as usize;
    let (base, ln_scale) = if r <= 1.0 { (r, 0.0) } else { (1.0 / r, (n as f64 - 1.0) * r.ln()) };
    // partial[L] = sum_{l<L} base^l for L = 0..=n
    let mut partial = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    let mut pow = 1.0;
    partial.push(0.0);
    for _ in 0..n {
        acc += pow;
        pow *= base;
        partial.push(acc);
    }
    let mut profile = Vec::with_capacity(n);
    let mut running = 0.0;
    let mut decay = 1.0;
    for k in 1..=n {
        let term = if r <= 1.0 {
            partial[n - k + 1]
        } else {
            let t = decay * partial[n - k + 1];
            decay *= base;
            t
        };
        running += term;
        profile.push(running);
    }
    (profile, ln_scale)
}

/// Long-run ON fraction under `S(cutoff)`: `1 / (1 + c / (mu E[J(c)]))`.
pub fn policy_availability(spec: &BirthDeathSpec, policy: PolicySpec) -> Result<f64> {
    policy.check(spec.battery)?;
    let on = mean_on_time(spec, policy.cutoff)?;
    let off = policy.cutoff as f64 / spec.harvest_rate;
    if on.is_infinite() {
        return Ok(1.0);
    }
    Ok(on / (on + off))
}

/// `argmax_{1 <= i <= N} E[J(i)] / i` (1-based).
///
/// For `r < 1` the ratios differ from `1 / (nu (1 - r))` only by
/// `D_i = r^(N-i+1) G(i) / i / (nu (1 - r))`, which is compared in log space so
/// that differences far below machine precision still order correctly.
pub fn verify_s1_optimal(spec: &BirthDeathSpec) -> usize {
    let r = spec.ratio();
    let n = spec.battery;
    let argmax = |values: &mut dyn Iterator<Item = (usize, f64)>| {
        values.fold((1, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best }).0
    };
    if r < 1.0 - NEAR_UNIT_RATIO {
        let ln_r = r.ln();
        // maximize -ln D_i
        return argmax(&mut (1..=n).map(|i| {
            let ln_deficit = (n - i + 1) as f64 * ln_r + (geometric_sum(r, i) / i as f64).ln();
            (i as usize, -ln_deficit)
        }));
    }
    let (profile, _) = hitting_profile(r, n);
    argmax(&mut profile.iter().enumerate().map(|(idx, &m)| (idx + 1, m / (idx + 1) as f64)))
}
