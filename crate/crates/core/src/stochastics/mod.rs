//! Probability mass functions on the non-negative integers.
//!
//! Demand is Poisson, processing capacity is a discretized Beta on
//! `{0, ..., n}`; both are represented as a dense [`Pmf`] whose mass sums to
//! one up to rounding.

mod beta;

pub use beta::{discretized_beta, regularized_incomplete_beta, BetaDiscretization, CapacityFit, CapacitySpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail mass tolerated when truncating Poisson supports inside transition kernels.
pub const KERNEL_TAIL_EPS: f64 = 1e-15;

const SUM_TOL: f64 = 1e-12;

/// Probability mass function with support `{0, ..., support_max}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    mass: Vec<f64>,
}

impl Pmf {
    /// Validates non-negativity and unit total mass (within 1e-12).
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::param("pmf must have at least one support point"));
        }
        if let Some((i, p)) = mass
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(Error::param(format!("pmf mass[{i}] = {p} is not in [0, 1]")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::param(format!("pmf mass sums to {total}, expected 1")));
        }
        Ok(Pmf { mass })
    }

    /// Normalizes arbitrary non-negative weights into a pmf.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param("pmf weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::param("pmf weights must have positive total"));
        }
        Pmf::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn point_mass(at: usize) -> Self {
        let mut mass = vec![0.0; at + 1];
        mass[at] = 1.0;
        Pmf { mass }
    }

    pub fn support_max(&self) -> usize {
        self.mass.len() - 1
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, k: usize) -> f64 {
        self.mass.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.mass
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - m).powi(2) * p)
            .sum()
    }

    /// Squared coefficient of variation; zero for a point mass at zero.
    pub fn scv(&self) -> f64 {
        let m = self.mean();
        if m == 0.0 {
            0.0
        } else {
            self.variance() / (m * m)
        }
    }

    pub fn cdf(&self, k: usize) -> f64 {
        self.mass.iter().take(k + 1).sum::<f64>().min(1.0)
    }

    /// Distribution of the sum of two independent variables.
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        let mut out = vec![0.0; self.mass.len() + other.mass.len() - 1];
        for (i, p) in self.mass.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for (j, q) in other.mass.iter().enumerate() {
                out[i + j] += p * q;
            }
        }
        Pmf { mass: out }
    }

    fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = Error;

    fn try_from(mass: Vec<f64>) -> Result<Self> {
        Pmf::new(mass)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(pmf: Pmf) -> Self {
        pmf.mass
    }
}

/// Poisson pmf truncated at the smallest `n` with `P(X <= n) >= 1 - tail_eps`.
/// The remaining tail is folded onto `n`, so the returned mass sums to one.
pub fn poisson_pmf(rate: f64, tail_eps: f64) -> Result<Pmf> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::param(format!(
            "poisson rate must be finite and >= 0, got {rate}"
        )));
    }
    if !(tail_eps > 0.0 && tail_eps <= 1e-6) {
        return Err(Error::param(format!("tail_eps must lie in (0, 1e-6], got {tail_eps}")));
    }
    if rate == 0.0 {
        return Ok(Pmf::point_mass(0));
    }

    // Evaluate terms far enough out that the neglected remainder is below
    // f64 resolution, then locate the cut from accurate suffix sums.
    let horizon = (rate + 40.0 * rate.sqrt() + 60.0).ceil() as usize;
    let ln_rate = rate.ln();
    let mut terms = Vec::with_capacity(horizon + 1);
    let mut ln_p = -rate;
    for k in 0..=horizon {
        if k > 0 {
            ln_p += ln_rate - (k as f64).ln();
        }
        terms.push(ln_p.exp());
    }
    let mut suffix = vec![0.0; horizon + 2];
    for k in (0..=horizon).rev() {
        suffix[k] = suffix[k + 1] + terms[k];
    }
    let cut = (0..=horizon).find(|&n| suffix[n + 1] <= tail_eps).unwrap_or(horizon);

    let mut mass = terms[..=cut].to_vec();
    let head: f64 = mass.iter().sum();
    if head < 1.0 {
        mass[cut] += 1.0 - head;
    } else {
        // accumulated rounding in the log recursion can push the head past one
        mass.iter_mut().for_each(|p| *p /= head);
    }
    let pmf = Pmf { mass };
    debug_assert!((pmf.total() - 1.0).abs() < SUM_TOL);
    Ok(pmf)
}

/// Exact distribution of `(base + I - C)^+` for independent `I ~ income`, `C ~ capacity`.
pub fn surplus_pmf(base: usize, income: &Pmf, capacity: &Pmf) -> Pmf {
    let top = base + income.support_max();
    let mut mass = vec![0.0; top + 1];
    for (i, p) in income.mass().iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let level = base + i;
        for (c, q) in capacity.mass().iter().enumerate() {
            mass[level.saturating_sub(c)] += p * q;
        }
    }
    Pmf { mass }
}
