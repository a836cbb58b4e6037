//! Steady-state performance measures and batch policy evaluation.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chain::{
    find_bound, l1_distance, stationary, workload_stationary, AgeFlows, AgeIncome, Scenario, StationaryDistribution,
    StationaryOptions, StepScratch, TruncatedKernel,
};
use crate::error::{Error, Result};
use crate::policy::{FeeStructure, ShipmentPolicy};
use crate::stochastics::{poisson_pmf, KERNEL_TAIL_EPS};

/// Long-run measures per operating cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub fees: FeeStructure,
    pub bound: usize,
    /// `E[M]`, with express income adjusted for rejections.
    pub expected_backorders: f64,
    /// `E[M]` computed with the unadjusted express income at the deadline age.
    pub expected_backorders_raw: f64,
    /// `sum_tau f_tau * lambda * w(p + f_tau)`.
    pub express_revenue: f64,
    /// Fee revenue from accepted express orders only.
    pub express_revenue_accepted: f64,
    /// `E[G^V]` = express revenue - penalty * `E[M]`.
    pub variable_profit: f64,
    /// Variable profit from accepted express revenue.
    pub variable_profit_accepted: f64,
    pub fixed_profit: f64,
    /// Long-run share of periods in which some order is rejected.
    pub rejection_probability: f64,
    pub expected_rejected_orders: f64,
    /// `E[M] / lambda` in operating cycles; absent when `lambda = 0`.
    pub mean_delay: Option<f64>,
    pub per_age_express_rate: Vec<f64>,
    pub per_age_accepted_express: Vec<f64>,
    pub utilization: f64,
    pub stationary_residual: f64,
}

impl PerformanceReport {
    pub fn from_flows(
        scenario: &Scenario,
        fees: &FeeStructure,
        bound: usize,
        flows: &[AgeFlows],
        residual: f64,
    ) -> Result<Self> {
        Self::assemble(scenario, fees, fees.fees(), bound, flows, residual)
    }

    /// Report for per-age fees `age_fees` (`+inf` allowed), labelled with `fees`.
    fn assemble(
        scenario: &Scenario,
        fees: &FeeStructure,
        age_fees: &[f64],
        bound: usize,
        flows: &[AgeFlows],
        residual: f64,
    ) -> Result<Self> {
        let t = scenario.period_length;
        if age_fees.len() != t || flows.len() != t {
            return Err(Error::param(format!(
                "period length mismatch: scenario {t}, fees {}, distribution {}",
                age_fees.len(),
                flows.len()
            )));
        }
        let per_age_express_rate: Vec<f64> = age_fees
            .iter()
            .map(|f| scenario.choice.split_rates(scenario.lambda, *f).0)
            .collect();
        let express_revenue = revenue(age_fees, &per_age_express_rate);
        let per_age_accepted_express: Vec<f64> = flows.iter().map(|f| f.accepted_express).collect();
        let express_revenue_accepted = revenue(age_fees, &per_age_accepted_express);
        let last = &flows[t - 1];
        let expected_backorders = last.backorders;
        Ok(PerformanceReport {
            fees: fees.clone(),
            bound,
            expected_backorders,
            expected_backorders_raw: last.backorders_raw,
            express_revenue,
            express_revenue_accepted,
            variable_profit: express_revenue - scenario.penalty * expected_backorders,
            variable_profit_accepted: express_revenue_accepted - scenario.penalty * expected_backorders,
            fixed_profit: scenario.fixed_profit(),
            rejection_probability: flows.iter().map(|f| f.overflow_probability).sum::<f64>() / t as f64,
            expected_rejected_orders: flows.iter().map(|f| f.rejected_orders).sum(),
            mean_delay: mean_delay(expected_backorders, scenario.lambda).ok(),
            per_age_express_rate,
            per_age_accepted_express,
            utilization: scenario.utilization(),
            stationary_residual: residual,
        })
    }

    /// Largest absolute difference over the numeric measures of two reports.
    pub fn max_difference(&self, other: &Self) -> f64 {
        let scalars = [
            (self.expected_backorders, other.expected_backorders),
            (self.expected_backorders_raw, other.expected_backorders_raw),
            (self.express_revenue, other.express_revenue),
            (self.express_revenue_accepted, other.express_revenue_accepted),
            (self.variable_profit, other.variable_profit),
            (self.variable_profit_accepted, other.variable_profit_accepted),
            (self.fixed_profit, other.fixed_profit),
            (self.rejection_probability, other.rejection_probability),
            (self.expected_rejected_orders, other.expected_rejected_orders),
            (self.mean_delay.unwrap_or(0.0), other.mean_delay.unwrap_or(0.0)),
        ];
        let vectors = self
            .per_age_express_rate
            .iter()
            .zip(&other.per_age_express_rate)
            .chain(
                self.per_age_accepted_express
                    .iter()
                    .zip(&other.per_age_accepted_express),
            )
            .map(|(a, b)| (*a, *b));
        scalars
            .into_iter()
            .chain(vectors)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest gap between the ideal and accepted-order revenue conventions.
    pub fn convention_gap(&self) -> f64 {
        (self.variable_profit - self.variable_profit_accepted).abs()
    }
}

fn revenue(fees: &[f64], rates: &[f64]) -> f64 {
    fees.iter()
        .zip(rates)
        .filter(|(_, r)| **r > 0.0)
        .map(|(f, r)| f * r)
        .sum()
}

fn check_ages(pi: &StationaryDistribution, scenario: &Scenario) -> Result<()> {
    if pi.period_length() != scenario.period_length {
        return Err(Error::param(format!(
            "distribution has {} ages, scenario period length is {}",
            pi.period_length(),
            scenario.period_length
        )));
    }
    Ok(())
}

/// `E[M]`: expected due orders left over at the deadline.
pub fn expected_backorders(pi: &StationaryDistribution, scenario: &Scenario) -> Result<f64> {
    check_ages(pi, scenario)?;
    Ok(pi.flows[pi.period_length() - 1].backorders)
}

/// `E[G^V]` for the fee vector that generated `pi`.
pub fn variable_profit(pi: &StationaryDistribution, scenario: &Scenario, fees: &FeeStructure) -> Result<f64> {
    Ok(PerformanceReport::from_flows(scenario, fees, pi.bound, &pi.flows, pi.residual)?.variable_profit)
}

/// Long-run average over ages of the probability that an order is rejected.
pub fn rejection_probability(pi: &StationaryDistribution) -> f64 {
    pi.flows.iter().map(|f| f.overflow_probability).sum::<f64>() / pi.period_length() as f64
}

/// Expected rejected orders per operating cycle.
pub fn expected_rejected_orders(pi: &StationaryDistribution) -> f64 {
    pi.flows.iter().map(|f| f.rejected_orders).sum()
}

/// Average customer delay `E[M] / lambda` in operating cycles.
pub fn mean_delay(expected_backorders: f64, lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::param("mean delay is undefined for lambda = 0"));
    }
    Ok(expected_backorders / lambda)
}

pub fn report(pi: &StationaryDistribution, scenario: &Scenario, fees: &FeeStructure) -> Result<PerformanceReport> {
    check_ages(pi, scenario)?;
    PerformanceReport::from_flows(scenario, fees, pi.bound, &pi.flows, pi.residual)
}

/// Evaluates fee structures for one scenario at a fixed truncation bound.
///
/// The total backlog does not depend on fees, so its stationary law placed on
/// the diagonal is the stationary distribution at age 0 for every policy.
/// Each evaluation is one pass around the cycle from that start, with a
/// residual check and power iteration as fallback.
#[derive(Debug, Clone)]
pub struct Evaluator {
    scenario: Scenario,
    bound: usize,
    start: Vec<f64>,
    options: StationaryOptions,
}

impl Evaluator {
    /// Uses the scenario's pinned bound, or searches one with a revenue-maximizing CSP.
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let bound = match scenario.truncation_bound {
            Some(b) => b,
            None => {
                let t = scenario.period_length;
                let csp = FeeStructure::new(vec![scenario.choice.revenue_max_fee(); t], &scenario.choice)?;
                find_bound(scenario, &csp)?.bound
            }
        };
        Self::with_bound(scenario, bound)
    }

    pub fn with_bound(scenario: &Scenario, bound: usize) -> Result<Self> {
        scenario.validate()?;
        let demand = poisson_pmf(scenario.lambda, KERNEL_TAIL_EPS)?;
        let workload = workload_stationary(&demand, &scenario.capacity, bound);
        let start = crate::chain::StateSpace::new(bound).diagonal(&workload);
        Ok(Evaluator {
            scenario: scenario.clone(),
            bound,
            start,
            options: StationaryOptions::default(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    /// Stationary law of the total backlog at the evaluator's bound.
    pub fn workload(&self) -> Vec<f64> {
        crate::chain::StateSpace::new(self.bound).total_marginal(&self.start)
    }

    pub fn kernel(&self, fees: &FeeStructure) -> Result<TruncatedKernel> {
        self.check(fees)?;
        TruncatedKernel::build(&self.scenario, fees.fees(), self.bound)
    }

    fn check(&self, fees: &FeeStructure) -> Result<()> {
        if fees.period_length() != self.scenario.period_length {
            return Err(Error::param(format!(
                "fee vector has {} ages, scenario period length is {}",
                fees.period_length(),
                self.scenario.period_length
            )));
        }
        Ok(())
    }

    pub fn stationary(&self, fees: &FeeStructure) -> Result<StationaryDistribution> {
        stationary(&self.kernel(fees)?, Some(&self.start), self.options)
    }

    pub fn evaluate(&self, fees: &FeeStructure) -> Result<PerformanceReport> {
        report(&self.stationary(fees)?, &self.scenario, fees)
    }

    /// Evaluates a policy in cutoff form, with express switched off after the cutoff.
    pub fn evaluate_cutoff_form(&self, policy: &ShipmentPolicy) -> Result<PerformanceReport> {
        let t = self.scenario.period_length;
        let canonical = policy.canonical(t, &self.scenario.choice)?;
        let age_fees = policy.age_fees(t);
        let kernel = TruncatedKernel::build(&self.scenario, &age_fees, self.bound)?;
        let pi = stationary(&kernel, Some(&self.start), self.options)?;
        PerformanceReport::assemble(&self.scenario, &canonical, &age_fees, pi.bound, &pi.flows, pi.residual)
    }

    /// Evaluates many fee structures, reusing per-age distributions across
    /// candidates that share leading fees. Results follow the input order.
    pub fn evaluate_batch(&self, candidates: &[FeeStructure]) -> Vec<Result<PerformanceReport>> {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|a, b| candidates[*a].lex_cmp(&candidates[*b]));
        let chunks = chunk_ranges(order.len());

        #[cfg(feature = "parallel")]
        let pieces: Vec<Vec<(usize, Result<PerformanceReport>)>> = {
            use rayon::prelude::*;
            chunks
                .par_iter()
                .map(|r| self.sweep(candidates, &order[r.clone()]))
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let pieces: Vec<Vec<(usize, Result<PerformanceReport>)>> = chunks
            .iter()
            .map(|r| self.sweep(candidates, &order[r.clone()]))
            .collect();

        let mut out: Vec<Option<Result<PerformanceReport>>> = (0..candidates.len()).map(|_| None).collect();
        for (i, r) in pieces.into_iter().flatten() {
            out[i] = Some(r);
        }
        out.into_iter().map(|r| r.expect("every candidate evaluated")).collect()
    }

    fn sweep(&self, candidates: &[FeeStructure], order: &[usize]) -> Vec<(usize, Result<PerformanceReport>)> {
        let t = self.scenario.period_length;
        let mut incomes: HashMap<u64, AgeIncome> = HashMap::new();
        let mut scratch = StepScratch::default();
        let mut dists: Vec<Vec<f64>> = vec![self.start.clone(); t + 1];
        let mut flows: Vec<AgeFlows> = vec![AgeFlows::default(); t];
        let mut prev: Option<&FeeStructure> = None;
        let mut results = Vec::with_capacity(order.len());
        for &i in order {
            let fees = &candidates[i];
            let result = (|| {
                self.check(fees)?;
                let mut ages = Vec::with_capacity(t);
                for f in fees.fees() {
                    let key = f.to_bits();
                    if let Entry::Vacant(slot) = incomes.entry(key) {
                        slot.insert(AgeIncome::new(&self.scenario, *f)?);
                    }
                    ages.push(incomes[&key].clone());
                }
                let kernel = TruncatedKernel::from_incomes(self.bound, self.scenario.capacity.clone(), ages);
                let shared = match prev {
                    Some(p) => p
                        .fees()
                        .iter()
                        .zip(fees.fees())
                        .take_while(|(a, b)| a.to_bits() == b.to_bits())
                        .count(),
                    None => 0,
                };
                for age in shared..t {
                    let (head, tail) = dists.split_at_mut(age + 1);
                    flows[age] = kernel.step_into(age, &head[age], &mut tail[0], &mut scratch);
                }
                prev = Some(fees);
                let residual = l1_distance(&dists[t], &dists[0]);
                if residual <= self.options.tolerance {
                    return PerformanceReport::from_flows(&self.scenario, fees, self.bound, &flows, residual);
                }
                prev = None;
                let pi = stationary(&kernel, Some(&dists[t]), self.options)?;
                report(&pi, &self.scenario, fees)
            })();
            if result.is_err() {
                prev = None;
            }
            results.push((i, result));
        }
        results
    }
}

fn chunk_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    #[cfg(feature = "parallel")]
    let workers = rayon::current_num_threads().max(1);
    #[cfg(not(feature = "parallel"))]
    let workers = 1usize;
    let pieces = if workers == 1 { 1 } else { workers * 4 };
    let size = n.div_ceil(pieces).max(1);
    (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect()
}
