//! Per-age transition operators of the truncated backlog chain.
//!
//! In period `t` with age `tau`, express orders `E`, regular orders `R` and
//! capacity `B` are drawn independently. Capacity serves due orders and new
//! express orders first. If accepting everything would push the total backlog
//! above the bound by `O` orders, regular arrivals are rejected first and
//! express arrivals only after all regular ones:
//!
//! ```text
//! O  = (total + E + R - B - bound)^+
//! R' = (R - O)^+
//! E' = (E - (O - R)^+)^+
//! total' = (total + E' + R' - B)^+
//! due'   = (due + E' - B)^+      if tau < T-1
//!        = total'                if tau = T-1   (deadline: everything left becomes due)
//! ```
//!
//! [`TruncatedKernel::transitions`] applies these formulas literally per
//! state. [`TruncatedKernel::step_into`] pushes a whole distribution through
//! in three convolution stages, using the equivalent closed form
//! `due' = min((due + E - B)^+, bound - (total - due))` and
//! `total' = min(bound, (total + E + R - B)^+)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use super::state::StateSpace;
use crate::error::{Error, Result};
use crate::stochastics::{poisson_pmf, Pmf, KERNEL_TAIL_EPS};

/// Thinned arrival distributions at one age.
#[derive(Debug, Clone)]
pub struct AgeIncome {
    /// Express fee at this age; `+inf` when express is not offered.
    pub fee: f64,
    pub express_rate: f64,
    pub regular_rate: f64,
    pub express: Arc<Pmf>,
    pub regular: Arc<Pmf>,
}

impl AgeIncome {
    pub fn new(scenario: &Scenario, fee: f64) -> Result<Self> {
        let (express_rate, regular_rate) = scenario.choice.split_rates(scenario.lambda, fee);
        Ok(AgeIncome {
            fee,
            express_rate,
            regular_rate,
            express: Arc::new(poisson_pmf(express_rate, KERNEL_TAIL_EPS)?),
            regular: Arc::new(poisson_pmf(regular_rate, KERNEL_TAIL_EPS)?),
        })
    }
}

/// Expected flows during one period, weighted by the source distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AgeFlows {
    /// Total probability mass pushed through the step.
    pub mass: f64,
    /// `E[(due + E' - B)^+]`; at the last age these are the cycle's backorders.
    pub backorders: f64,
    /// `E[(due + E - B)^+]` with unadjusted express income.
    pub backorders_raw: f64,
    /// Probability that some arriving order is rejected.
    pub overflow_probability: f64,
    /// Expected rejected orders `E[O]`.
    pub rejected_orders: f64,
    /// Expected rejected express orders `E[(O - R)^+]`.
    pub rejected_express: f64,
    /// Expected accepted express orders `E[E']`.
    pub accepted_express: f64,
}

/// Reusable buffers for [`TruncatedKernel::step_into`].
#[derive(Debug, Default)]
pub struct StepScratch {
    after_express: Vec<f64>,
    after_capacity: Vec<f64>,
}

/// Transition operators for every age over the states with `total <= bound`.
#[derive(Debug, Clone)]
pub struct TruncatedKernel {
    space: StateSpace,
    capacity: Arc<Pmf>,
    ages: Vec<AgeIncome>,
}

impl TruncatedKernel {
    /// Kernel for per-age fees `fees` (`+inf` = express not offered).
    pub fn build(scenario: &Scenario, fees: &[f64], bound: usize) -> Result<Self> {
        if fees.len() != scenario.period_length {
            return Err(Error::param(format!(
                "fee vector has {} ages, scenario period length is {}",
                fees.len(),
                scenario.period_length
            )));
        }
        let ages = fees
            .iter()
            .map(|f| AgeIncome::new(scenario, *f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_incomes(bound, scenario.capacity.clone(), ages))
    }

    pub fn from_incomes(bound: usize, capacity: Arc<Pmf>, ages: Vec<AgeIncome>) -> Self {
        TruncatedKernel {
            space: StateSpace::new(bound),
            capacity,
            ages,
        }
    }

    pub fn bound(&self) -> usize {
        self.space.bound()
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn period_length(&self) -> usize {
        self.ages.len()
    }

    pub fn incomes(&self) -> &[AgeIncome] {
        &self.ages
    }

    pub fn capacity(&self) -> &Pmf {
        &self.capacity
    }

    /// Row of the transition matrix at `age` from `(due_now, total)`, obtained by
    /// enumerating every `(E, R, B)` outcome. Destinations are state indices.
    pub fn transitions(&self, age: usize, due_now: usize, total: usize) -> Vec<(usize, f64)> {
        let bound = self.bound() as i64;
        let last = age + 1 == self.period_length();
        let income = &self.ages[age];
        let mut row = BTreeMap::new();
        let (x_c, x_s) = (due_now as i64, total as i64);
        for (e, pe) in income.express.mass().iter().enumerate() {
            for (r, pr) in income.regular.mass().iter().enumerate() {
                let per = pe * pr;
                if per == 0.0 {
                    continue;
                }
                for (b, pb) in self.capacity.mass().iter().enumerate() {
                    if *pb == 0.0 {
                        continue;
                    }
                    let (e, r, b) = (e as i64, r as i64, b as i64);
                    let overflow = (x_s + e + r - b - bound).max(0);
                    let r_acc = (r - overflow).max(0);
                    let e_acc = (e - (overflow - r).max(0)).max(0);
                    let next_total = (x_s + e_acc + r_acc - b).max(0);
                    let next_due = if last { next_total } else { (x_c + e_acc - b).max(0) };
                    let idx = self.space.index(next_due as usize, next_total as usize);
                    *row.entry(idx).or_insert(0.0) += per * pb;
                }
            }
        }
        row.into_iter().collect()
    }

    /// Sum of the transition row from `(due_now, total)` at `age`.
    pub fn row_sum(&self, age: usize, due_now: usize, total: usize) -> f64 {
        self.transitions(age, due_now, total).iter().map(|(_, p)| p).sum()
    }

    /// Dense transition matrix at `age`; intended for small bounds only.
    pub fn dense(&self, age: usize) -> Vec<Vec<f64>> {
        let n = self.space.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, (due, total)) in self.space.pairs().enumerate() {
            for (j, p) in self.transitions(age, due, total) {
                m[i][j] += p;
            }
        }
        m
    }

    /// `P(total + E + R - B > bound)` from a state with the given total at `age`.
    pub fn overflow_probability(&self, age: usize, total: usize) -> f64 {
        let demand = self.ages[age].express.convolve(&self.ages[age].regular);
        let bound = self.bound();
        let mut p = 0.0;
        for (d, pd) in demand.mass().iter().enumerate() {
            for (b, pb) in self.capacity.mass().iter().enumerate() {
                if total + d > bound + b {
                    p += pd * pb;
                }
            }
        }
        p
    }

    /// Pushes `src` (a distribution at `age`) one period forward into `dst`.
    pub fn step_into(&self, age: usize, src: &[f64], dst: &mut [f64], scratch: &mut StepScratch) -> AgeFlows {
        let space = self.space;
        let bound = space.bound();
        let income = &self.ages[age];
        let pe = income.express.mass();
        let pr = income.regular.mass();
        let pc = self.capacity.mass();
        let e_max = pe.len() - 1;
        let c_max = pc.len() - 1;
        let last = age + 1 == self.period_length();
        debug_assert_eq!(src.len(), space.len());
        debug_assert_eq!(dst.len(), space.len());

        let mut flows = AgeFlows::default();

        // Stage 1: add express income. Index by (g = total - due, u = due + E).
        let u_len = bound + e_max + 1;
        let stage1 = &mut scratch.after_express;
        stage1.clear();
        stage1.resize((bound + 1) * u_len, 0.0);
        for total in 0..=bound {
            let base = total * (total + 1) / 2;
            for due in 0..=total {
                let p = src[base + due];
                if p == 0.0 {
                    continue;
                }
                flows.mass += p;
                let g = total - due;
                let row = &mut stage1[g * u_len + due..g * u_len + due + pe.len()];
                for (slot, q) in row.iter_mut().zip(pe) {
                    *slot += p * q;
                }
            }
        }

        // Stage 2: capacity. Track (due', y = total + E - B) with y >= -c_max.
        let y_len = bound + e_max + c_max + 1;
        let stage2 = &mut scratch.after_capacity;
        stage2.clear();
        stage2.resize((bound + 1) * y_len, 0.0);
        for g in 0..=bound {
            let due_cap = bound - g;
            let row = &stage1[g * u_len..(g + 1) * u_len];
            for (u, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let s = u + g;
                for (c, q) in pc.iter().enumerate() {
                    let w = p * q;
                    if w == 0.0 {
                        continue;
                    }
                    let raw = u.saturating_sub(c);
                    let due = raw.min(due_cap);
                    flows.backorders += w * due as f64;
                    flows.backorders_raw += w * raw as f64;
                    if s > c + bound {
                        flows.rejected_express += w * (s - c - bound) as f64;
                    }
                    stage2[due * y_len + s + c_max - c] += w;
                }
            }
        }

        // Stage 3: regular income, clamping the total to [0, bound].
        dst.iter_mut().for_each(|v| *v = 0.0);
        let bound_i = bound as isize;
        for due in 0..=bound {
            let row = &stage2[due * y_len..(due + 1) * y_len];
            for (yi, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let y = yi as isize - c_max as isize;
                for (r, q) in pr.iter().enumerate() {
                    let w = p * q;
                    let v = y + r as isize;
                    if v > bound_i {
                        flows.overflow_probability += w;
                        flows.rejected_orders += w * (v - bound_i) as f64;
                    }
                    let total = v.clamp(0, bound_i) as usize;
                    let next_due = if last { total } else { due };
                    debug_assert!(next_due <= total);
                    dst[space.index(next_due, total)] += w;
                }
            }
        }

        flows.accepted_express = flows.mass * income.express.mean() - flows.rejected_express;
        flows
    }

    /// Allocating convenience wrapper around [`TruncatedKernel::step_into`].
    pub fn step(&self, age: usize, src: &[f64]) -> (Vec<f64>, AgeFlows) {
        let mut dst = vec![0.0; self.space.len()];
        let flows = self.step_into(age, src, &mut dst, &mut StepScratch::default());
        (dst, flows)
    }
}
