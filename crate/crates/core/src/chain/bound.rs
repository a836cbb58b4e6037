use serde::{Deserialize, Serialize};

use super::kernel::TruncatedKernel;
use super::scenario::Scenario;
use super::stationary::{stationary, StationaryOptions};
use crate::error::{Error, Result};
use crate::measures::rejection_probability;
use crate::policy::FeeStructure;

pub const DEFAULT_HARD_CAP: usize = 2000;

/// Outcome of a truncation bound search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSearch {
    pub bound: usize,
    pub rejection_probability: f64,
    /// Rejection probability one below the returned bound (absent at bound 1).
    pub rejection_below: Option<f64>,
    /// Every `(bound, J)` probe in evaluation order.
    pub probes: Vec<(usize, f64)>,
    /// True when a non-monotone probe forced the linear scan.
    pub linear_fallback: bool,
}

/// Stationary rejection probability at a given bound.
pub fn rejection_at(scenario: &Scenario, fees: &FeeStructure, bound: usize) -> Result<f64> {
    let kernel = TruncatedKernel::build(scenario, fees.fees(), bound)?;
    let pi = stationary(&kernel, None, StationaryOptions::default())?;
    Ok(rejection_probability(&pi))
}

/// Smallest bound in `[1, DEFAULT_HARD_CAP]` with `J <= scenario.rejection_threshold`.
pub fn find_bound(scenario: &Scenario, fees: &FeeStructure) -> Result<BoundSearch> {
    find_bound_with_cap(scenario, fees, DEFAULT_HARD_CAP)
}

pub fn find_bound_with_cap(scenario: &Scenario, fees: &FeeStructure, hard_cap: usize) -> Result<BoundSearch> {
    find_bound_by(scenario.rejection_threshold, hard_cap, |b| {
        rejection_at(scenario, fees, b)
    })
}

/// Bound search over an arbitrary rejection curve `j`.
///
/// Probes 1, 2, 4, ... until the threshold is met, then bisects. Every probe
/// is checked against the assumption that `j` is nonincreasing; a violation
/// switches to a linear scan from 1.
pub fn find_bound_by(threshold: f64, hard_cap: usize, mut j: impl FnMut(usize) -> Result<f64>) -> Result<BoundSearch> {
    if hard_cap == 0 {
        return Err(Error::param("hard cap must be at least 1"));
    }
    let mut probes: Vec<(usize, f64)> = Vec::new();
    let mut eval = |b: usize, probes: &mut Vec<(usize, f64)>| -> Result<f64> {
        if let Some((_, v)) = probes.iter().find(|(x, _)| *x == b) {
            return Ok(*v);
        }
        let v = j(b)?;
        probes.push((b, v));
        Ok(v)
    };
    let monotone = |probes: &[(usize, f64)]| {
        let mut sorted = probes.to_vec();
        sorted.sort_by_key(|p| p.0);
        sorted.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12)
    };

    // Exponential probing for an upper end.
    let mut lo = 0usize; // largest bound known to exceed the threshold (0 = none)
    let mut hi = 1usize;
    loop {
        let v = eval(hi, &mut probes)?;
        if v <= threshold {
            break;
        }
        if hi >= hard_cap {
            return Err(Error::CapacityInfeasible {
                hard_cap,
                threshold,
                achieved: v,
            });
        }
        lo = hi;
        hi = (hi * 2).min(hard_cap);
    }

    let mut linear_fallback = !monotone(&probes);
    if !linear_fallback {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if eval(mid, &mut probes)? <= threshold {
                hi = mid;
            } else {
                lo = mid;
            }
            if !monotone(&probes) {
                linear_fallback = true;
                break;
            }
        }
    }
    if linear_fallback {
        hi = (1..=hard_cap)
            .find_map(|b| match eval(b, &mut probes) {
                Ok(v) if v <= threshold => Some(Ok(b)),
                Ok(_) => None,
                Err(e) => Some(Err(e)),
            })
            .transpose()?
            .expect("the probed upper end satisfies the threshold");
    }

    let bound = hi;
    let rejection_probability = eval(bound, &mut probes)?;
    let rejection_below = if bound > 1 {
        Some(eval(bound - 1, &mut probes)?)
    } else {
        None
    };
    Ok(BoundSearch {
        bound,
        rejection_probability,
        rejection_below,
        probes,
        linear_fallback,
    })
}
