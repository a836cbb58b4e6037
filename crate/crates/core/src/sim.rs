//! Monte Carlo simulation of the truncated backlog dynamics.
//!
//! Draws arrivals and capacity period by period and applies the overflow and
//! deadline rules directly, as an independent check on the exact evaluation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::chain::Scenario;
use crate::error::{Error, Result};
use crate::policy::FeeStructure;

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Cycles per replication, warm-up included.
    pub cycles: u64,
    #[serde(default = "default_warmup")]
    pub warmup_cycles: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Truncation bound; must match the exact evaluation being checked. The
    /// CLI overrides it with the scenario's bound.
    #[serde(default)]
    pub bound: usize,
    #[serde(default = "default_replications")]
    pub replications: u32,
    /// Batches per replication for the batch-means halfwidths.
    #[serde(default = "default_batches")]
    pub batches: u32,
}

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20240601;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_warmup() -> u64 {
    1000
}

fn default_replications() -> u32 {
    1
}

fn default_batches() -> u32 {
    50
}

impl SimConfig {
    pub fn new(measured_cycles: u64, seed: u64, bound: usize) -> Self {
        SimConfig {
            cycles: measured_cycles + default_warmup(),
            warmup_cycles: default_warmup(),
            seed,
            bound,
            replications: 1,
            batches: default_batches(),
        }
    }

    pub fn measured_cycles(&self) -> u64 {
        self.cycles.saturating_sub(self.warmup_cycles)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cycles <= self.warmup_cycles {
            return Err(Error::param(format!(
                "no measured cycles: cycles ({}) must exceed warmup_cycles ({})",
                self.cycles, self.warmup_cycles
            )));
        }
        if self.replications == 0 || self.batches == 0 {
            return Err(Error::param("replications and batches must be positive"));
        }
        if self.measured_cycles() < self.batches as u64 {
            return Err(Error::param(format!(
                "{} measured cycles cannot fill {} batches",
                self.measured_cycles(),
                self.batches
            )));
        }
        Ok(())
    }
}

/// Sample mean with a 95% confidence halfwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub halfwidth: f64,
}

impl Estimate {
    fn from_batches(means: &[f64]) -> Self {
        let n = means.len() as f64;
        let mean = pairwise_sum(means) / n;
        if means.len() < 2 {
            return Estimate {
                mean,
                halfwidth: f64::INFINITY,
            };
        }
        let dev: Vec<f64> = means.iter().map(|m| (m - mean).powi(2)).collect();
        let var = pairwise_sum(&dev) / (n - 1.0);
        Estimate {
            mean,
            halfwidth: Z95 * (var / n).sqrt(),
        }
    }

    /// Whether `value` lies within `k` halfwidths of the estimate.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.halfwidth
    }
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Per-cycle estimates from simulated trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub expected_backorders: Estimate,
    pub variable_profit: Estimate,
    pub express_revenue: Estimate,
    /// Share of periods with a rejection.
    pub rejection_probability: Estimate,
    pub expected_rejected_orders: Estimate,
    pub measured_cycles: u64,
    pub seed: u64,
    pub bound: usize,
}

#[derive(Default, Clone, Copy)]
struct CycleTotals {
    backorders: f64,
    revenue: f64,
    overflow_periods: f64,
    rejected: f64,
}

enum Arrivals {
    None,
    Poisson(Poisson<f64>),
}

impl Arrivals {
    fn new(rate: f64) -> Result<Self> {
        if rate == 0.0 {
            Ok(Arrivals::None)
        } else {
            Poisson::new(rate)
                .map(Arrivals::Poisson)
                .map_err(|e| Error::param(format!("Poisson rate {rate}: {e}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> i64 {
        match self {
            Arrivals::None => 0,
            Arrivals::Poisson(p) => p.sample(rng) as i64,
        }
    }
}

/// Simulates `config.replications` independent trajectories.
///
/// Replication `i` uses the ChaCha8 stream `i` of `config.seed`, so results
/// do not depend on how replications are scheduled.
pub fn simulate(scenario: &Scenario, fees: &FeeStructure, config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    scenario.validate()?;
    if fees.period_length() != scenario.period_length {
        return Err(Error::param(format!(
            "fee vector has {} ages, scenario period length is {}",
            fees.period_length(),
            scenario.period_length
        )));
    }
    let run = |i: u32| run_replication(scenario, fees, config, i);

    #[cfg(feature = "parallel")]
    let batches: Vec<Vec<CycleTotals>> = {
        use rayon::prelude::*;
        (0..config.replications)
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let batches: Vec<Vec<CycleTotals>> = (0..config.replications).map(run).collect::<Result<_>>()?;

    let all: Vec<CycleTotals> = batches.into_iter().flatten().collect();
    let est = |f: &dyn Fn(&CycleTotals) -> f64| Estimate::from_batches(&all.iter().map(f).collect::<Vec<_>>());
    let t = scenario.period_length as f64;
    let c = scenario.penalty;
    Ok(SimReport {
        expected_backorders: est(&|b| b.backorders),
        variable_profit: est(&|b| b.revenue - c * b.backorders),
        express_revenue: est(&|b| b.revenue),
        rejection_probability: est(&|b| b.overflow_periods / t),
        expected_rejected_orders: est(&|b| b.rejected),
        measured_cycles: config.measured_cycles() * config.replications as u64,
        seed: config.seed,
        bound: config.bound,
    })
}

/// Runs one trajectory and returns per-batch means of the cycle totals.
fn run_replication(
    scenario: &Scenario,
    fees: &FeeStructure,
    config: &SimConfig,
    index: u32,
) -> Result<Vec<CycleTotals>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let t = scenario.period_length;
    let mut express = Vec::with_capacity(t);
    let mut regular = Vec::with_capacity(t);
    for f in fees.fees() {
        let (e, r) = scenario.choice.split_rates(scenario.lambda, *f);
        express.push(Arrivals::new(e)?);
        regular.push(Arrivals::new(r)?);
    }
    let capacity =
        WeightedIndex::new(scenario.capacity.mass()).map_err(|e| Error::param(format!("capacity pmf: {e}")))?;
    let bound = config.bound as i64;
    let (mut due, mut total) = (0i64, 0i64);

    let measured = config.measured_cycles();
    let per_batch = measured / config.batches as u64;
    let mut out = Vec::with_capacity(config.batches as usize);
    let mut acc = CycleTotals::default();
    let mut in_batch = 0u64;

    for cycle in 0..config.cycles {
        let mut ct = CycleTotals::default();
        for age in 0..t {
            let e = express[age].sample(&mut rng);
            let r = regular[age].sample(&mut rng);
            let b = capacity.sample(&mut rng) as i64;
            let overflow = (total + e + r - b - bound).max(0);
            let r_acc = (r - overflow).max(0);
            let e_acc = (e - (overflow - r).max(0)).max(0);
            if e > 0 {
                ct.revenue += fees.fees()[age] * e as f64;
            }
            if overflow > 0 {
                ct.overflow_periods += 1.0;
                ct.rejected += overflow as f64;
            }
            let next_due = (due + e_acc - b).max(0);
            total = (total + e_acc + r_acc - b).max(0);
            if age + 1 == t {
                ct.backorders = next_due as f64;
                due = total;
            } else {
                due = next_due;
            }
        }
        if cycle < config.warmup_cycles {
            continue;
        }
        acc.backorders += ct.backorders;
        acc.revenue += ct.revenue;
        acc.overflow_periods += ct.overflow_periods;
        acc.rejected += ct.rejected;
        in_batch += 1;
        let last_batch = out.len() + 1 == config.batches as usize;
        let done = cycle + 1 == config.cycles;
        if (!last_batch && in_batch == per_batch) || done {
            let n = in_batch as f64;
            out.push(CycleTotals {
                backorders: acc.backorders / n,
                revenue: acc.revenue / n,
                overflow_periods: acc.overflow_periods / n,
                rejected: acc.rejected / n,
            });
            acc = CycleTotals::default();
            in_batch = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::ChoiceModel;
    use crate::stochastics::Pmf;

    #[test]
    fn idle_system_is_exact() {
        let choice = ChoiceModel::new(4.0, 0.0, 4.0).unwrap();
        let s = Scenario::new(3, 0.0, Pmf::point_mass(2), choice, 5.0).unwrap();
        let fees = FeeStructure::new(vec![2.0; 3], &choice).unwrap();
        let r = simulate(&s, &fees, &SimConfig::new(500, 1, 10)).unwrap();
        assert_eq!(r.expected_backorders.mean, 0.0);
        assert_eq!(r.expected_backorders.halfwidth, 0.0);
        assert_eq!(r.variable_profit.mean, 0.0);
        assert_eq!(r.rejection_probability.mean, 0.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let choice = ChoiceModel::new(4.0, 0.0, 4.0).unwrap();
        let s = Scenario::new(4, 1.0, Pmf::new(vec![0.2, 0.3, 0.5]).unwrap(), choice, 5.0).unwrap();
        let fees = FeeStructure::new(vec![1.0, 2.0, 3.0, 4.0], &choice).unwrap();
        let mut cfg = SimConfig::new(5_000, 42, 8);
        cfg.replications = 3;
        let a = simulate(&s, &fees, &cfg).unwrap();
        let b = simulate(&s, &fees, &cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 43;
        assert_ne!(simulate(&s, &fees, &cfg).unwrap(), a);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(10, 0, 5);
        cfg.cycles = cfg.warmup_cycles;
        assert!(cfg.validate().is_err());
        let cfg = SimConfig::new(10, 0, 5);
        assert!(cfg.validate().is_err(), "10 cycles cannot fill 50 batches");
    }
}
