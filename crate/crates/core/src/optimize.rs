//! Grid search over the benchmark policy families, exhaustive fee-vector
//! search for short cycles, and the front-loading dominance comparison.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::choice::ChoiceModel;
use crate::error::{Error, Result};
use crate::measures::{Evaluator, PerformanceReport};
use crate::policy::{FeeStructure, PolicySpec, SimpleTspParams};

/// Profits closer than this are treated as tied.
pub const PROFIT_TIE_TOL: f64 = 1e-9;

/// Maximum number of fee vectors enumerated by [`exhaustive_fee_vector_search`].
pub const ENUMERATION_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub fee_values: Vec<f64>,
    /// Inclusive range of cutoff ages.
    pub cutoff_min: usize,
    pub cutoff_max: usize,
}

impl SearchGrid {
    /// Fees `0.2, 0.4, ..., 3.8` and cutoffs `1..=T-1`.
    pub fn standard(period_length: usize) -> Self {
        SearchGrid {
            fee_values: (1..=19).map(|k| k as f64 / 5.0).collect(),
            cutoff_min: 1,
            cutoff_max: period_length.saturating_sub(1),
        }
    }

    pub fn with_cutoffs(mut self, min: usize, max: usize) -> Self {
        self.cutoff_min = min;
        self.cutoff_max = max;
        self
    }

    pub fn validate(&self, period_length: usize, choice: &ChoiceModel) -> Result<()> {
        if self.fee_values.is_empty() {
            return Err(Error::param("search grid has no fee values"));
        }
        if !self.fee_values.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::param("grid fee values must be strictly increasing"));
        }
        if let Some(f) = self
            .fee_values
            .iter()
            .find(|f| !(**f >= choice.u_min && **f <= choice.u_max))
        {
            return Err(Error::param(format!(
                "grid fee {f} outside [{}, {}]",
                choice.u_min, choice.u_max
            )));
        }
        if self.cutoff_min > self.cutoff_max || self.cutoff_max >= period_length {
            return Err(Error::param(format!(
                "cutoff range {}..={} must be nonempty and below T = {period_length}",
                self.cutoff_min, self.cutoff_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Revenue-maximizing constant fee at every age.
    Csp,
    /// Revenue-maximizing fee with an optimized cutoff.
    TspCf,
    /// Optimized constant fee and cutoff.
    TspCfStar,
    /// Optimized express fee, last-minute fee, switch and cutoff.
    Tsp,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Csp => "CSP",
            Family::TspCf => "TSP-CF",
            Family::TspCfStar => "TSP-CF*",
            Family::Tsp => "TSP",
        }
    }

    pub const ALL: [Family; 4] = [Family::Csp, Family::TspCf, Family::TspCfStar, Family::Tsp];
}

/// Parameter sets of a family on a grid.
pub fn family_candidates(
    family: Family,
    grid: &SearchGrid,
    period_length: usize,
    choice: &ChoiceModel,
) -> Result<Vec<PolicySpec>> {
    grid.validate(period_length, choice)?;
    let rm = choice.revenue_max_fee();
    let cutoffs = grid.cutoff_min..=grid.cutoff_max;
    let out: Vec<PolicySpec> = match family {
        Family::Csp => vec![PolicySpec::Csp { fee: rm }],
        Family::TspCf => cutoffs.map(|c| PolicySpec::TspCf { fee: rm, cutoff_age: c }).collect(),
        Family::TspCfStar => grid
            .fee_values
            .iter()
            .flat_map(|f| {
                cutoffs
                    .clone()
                    .map(move |c| PolicySpec::TspCf { fee: *f, cutoff_age: c })
            })
            .collect(),
        Family::Tsp => {
            let mut v = Vec::new();
            for (i, fe) in grid.fee_values.iter().enumerate() {
                for fle in &grid.fee_values[i + 1..] {
                    for c in cutoffs.clone() {
                        for s in 0..c {
                            v.push(PolicySpec::Tsp(SimpleTspParams {
                                express_fee: *fe,
                                lastminute_fee: *fle,
                                switch_age: s,
                                cutoff_age: c,
                            }));
                        }
                    }
                }
            }
            v
        }
    };
    if out.is_empty() {
        return Err(Error::param(format!("grid yields no {} candidates", family.label())));
    }
    Ok(out)
}

/// Tie-break order: later cutoff, later switch, lower express fee, lower last-minute fee.
fn tie_cmp(a: &PolicySpec, b: &PolicySpec) -> Ordering {
    let key = |p: &PolicySpec| -> (usize, usize, f64, f64) {
        match p {
            PolicySpec::Csp { fee } => (usize::MAX, usize::MAX, *fee, *fee),
            PolicySpec::TspCf { fee, cutoff_age } => (*cutoff_age, *cutoff_age, *fee, *fee),
            PolicySpec::Tsp(t) => (t.cutoff_age, t.switch_age, t.express_fee, t.lastminute_fee),
            PolicySpec::Fees { fees } => (0, 0, fees.first().copied().unwrap_or(0.0), 0.0),
        }
    };
    let (ka, kb) = (key(a), key(b));
    kb.0.cmp(&ka.0)
        .then(kb.1.cmp(&ka.1))
        .then(ka.2.total_cmp(&kb.2))
        .then(ka.3.total_cmp(&kb.3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub family: Family,
    pub best: PolicySpec,
    pub report: PerformanceReport,
    pub evaluations: usize,
    /// Profit of the best minus the best profit outside the tie set (0 if none).
    pub runner_up_gap: f64,
    /// Other candidates within [`PROFIT_TIE_TOL`] of the best profit.
    pub tied_with: Vec<PolicySpec>,
}

impl Optimum {
    /// Whether the tie-break rule decided the optimum.
    pub fn tie_binds(&self) -> bool {
        !self.tied_with.is_empty()
    }
}

/// Evaluates every candidate of `family` on `grid` and returns the best one.
pub fn optimize_family(evaluator: &Evaluator, family: Family, grid: &SearchGrid) -> Result<Optimum> {
    let s = evaluator.scenario();
    let specs = family_candidates(family, grid, s.period_length, &s.choice)?;
    let fees = specs
        .iter()
        .map(|p| p.build(s.period_length, &s.choice))
        .collect::<Result<Vec<_>>>()?;
    let reports = evaluator
        .evaluate_batch(&fees)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    select(family, specs, reports)
}

fn select(family: Family, specs: Vec<PolicySpec>, reports: Vec<PerformanceReport>) -> Result<Optimum> {
    let evaluations = reports.len();
    let max = reports
        .iter()
        .map(|r| r.variable_profit)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical {
            message: "no finite profit among candidates".into(),
            residual: f64::NAN,
        });
    }
    let mut tied: Vec<usize> = (0..evaluations)
        .filter(|i| reports[*i].variable_profit >= max - PROFIT_TIE_TOL)
        .collect();
    tied.sort_by(|a, b| tie_cmp(&specs[*a], &specs[*b]));
    let best = tied[0];
    let runner_up = (0..evaluations)
        .filter(|i| !tied.contains(i))
        .map(|i| reports[i].variable_profit)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_profit = reports[best].variable_profit;
    Ok(Optimum {
        family,
        best: specs[best].clone(),
        tied_with: tied[1..].iter().map(|i| specs[*i].clone()).collect(),
        report: reports.into_iter().nth(best).expect("index in range"),
        evaluations,
        runner_up_gap: if runner_up.is_finite() {
            best_profit - runner_up
        } else {
            0.0
        },
    })
}

/// The four benchmark policies of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub csp: Optimum,
    pub tsp_cf: Optimum,
    pub tsp_cf_star: Optimum,
    pub tsp: Optimum,
}

impl Benchmark {
    pub fn run(evaluator: &Evaluator, grid: &SearchGrid) -> Result<Self> {
        Ok(Benchmark {
            csp: optimize_family(evaluator, Family::Csp, grid)?,
            tsp_cf: optimize_family(evaluator, Family::TspCf, grid)?,
            tsp_cf_star: optimize_family(evaluator, Family::TspCfStar, grid)?,
            tsp: optimize_family(evaluator, Family::Tsp, grid)?,
        })
    }

    pub fn get(&self, family: Family) -> &Optimum {
        match family {
            Family::Csp => &self.csp,
            Family::TspCf => &self.tsp_cf,
            Family::TspCfStar => &self.tsp_cf_star,
            Family::Tsp => &self.tsp,
        }
    }
}

/// Relative profit improvement `(a - b) / |b|`.
pub fn benefit(a: f64, b: f64) -> f64 {
    (a - b) / b.abs()
}

/// All fee vectors attaining the maximal profit in a full grid enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxSet {
    pub max_profit: f64,
    pub members: Vec<FeeStructure>,
    pub evaluations: usize,
}

impl ArgmaxSet {
    pub fn contains_weakly_monotone(&self) -> bool {
        self.members.iter().any(FeeStructure::is_weakly_monotone)
    }
}

/// Profit of every vector in `fee_values^T`; returns the argmax set.
pub fn exhaustive_fee_vector_search(evaluator: &Evaluator, fee_values: &[f64]) -> Result<ArgmaxSet> {
    let s = evaluator.scenario();
    let t = s.period_length;
    let n = fee_values.len();
    if n == 0 {
        return Err(Error::param("fee grid is empty"));
    }
    let count = (0..t).try_fold(1usize, |acc, _| acc.checked_mul(n).filter(|c| *c <= ENUMERATION_BUDGET));
    let Some(count) = count else {
        return Err(Error::param(format!(
            "{n}^{t} fee vectors exceed the enumeration budget of {ENUMERATION_BUDGET}; use a smaller grid or shorter cycle"
        )));
    };
    let mut candidates = Vec::with_capacity(count);
    let mut idx = vec![0usize; t];
    for _ in 0..count {
        candidates.push(FeeStructure::new(
            idx.iter().map(|i| fee_values[*i]).collect(),
            &s.choice,
        )?);
        for pos in (0..t).rev() {
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
    let reports = evaluator
        .evaluate_batch(&candidates)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let max_profit = reports
        .iter()
        .map(|r| r.variable_profit)
        .fold(f64::NEG_INFINITY, f64::max);
    let members = candidates
        .into_iter()
        .zip(&reports)
        .filter(|(_, r)| r.variable_profit >= max_profit - PROFIT_TIE_TOL)
        .map(|(c, _)| c)
        .collect();
    Ok(ArgmaxSet {
        max_profit,
        members,
        evaluations: count,
    })
}

/// Expected backorders of a front-loaded fee structure `f` against `f_prime`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRecord {
    pub f: FeeStructure,
    pub f_prime: FeeStructure,
    pub backorders_f: f64,
    pub backorders_f_prime: f64,
    /// `E[M^f] <= E[M^f'] + 1e-9`.
    pub holds: bool,
}

/// Compares `E[M]` of two fee structures whose cumulative express profiles
/// satisfy `C^f >= C^f'` componentwise with equal totals.
pub fn dominance_experiment(
    evaluator: &Evaluator,
    f: &FeeStructure,
    f_prime: &FeeStructure,
) -> Result<DominanceRecord> {
    let s = evaluator.scenario();
    let (pf, pg) = (
        f.demand_profile(&s.choice, s.lambda),
        f_prime.demand_profile(&s.choice, s.lambda),
    );
    if pf.period_length() != pg.period_length() {
        return Err(Error::Precondition(
            "fee structures have different period lengths".into(),
        ));
    }
    if !pf.dominates(&pg, 1e-12) {
        return Err(Error::Precondition(
            "cumulative express profile of f does not dominate that of f' with equal totals".into(),
        ));
    }
    let backorders_f = evaluator.evaluate(f)?.expected_backorders;
    let backorders_f_prime = evaluator.evaluate(f_prime)?.expected_backorders;
    Ok(DominanceRecord {
        f: f.clone(),
        f_prime: f_prime.clone(),
        backorders_f,
        backorders_f_prime,
        holds: backorders_f <= backorders_f_prime + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Scenario;
    use crate::stochastics::Pmf;

    fn scenario(t: usize, penalty: f64) -> Scenario {
        let capacity = Pmf::new(vec![0.05, 0.15, 0.3, 0.3, 0.2]).unwrap();
        Scenario::new(t, 1.9, capacity, ChoiceModel::new(4.0, 0.0, 4.0).unwrap(), penalty)
            .unwrap()
            .with_truncation_bound(Some(14))
    }

    #[test]
    fn standard_grid() {
        let g = SearchGrid::standard(8);
        assert_eq!(g.fee_values.len(), 19);
        assert_eq!(g.fee_values[0], 0.2);
        assert_eq!(g.fee_values[18], 3.8);
        assert_eq!((g.cutoff_min, g.cutoff_max), (1, 7));
        assert!(g.validate(8, &ChoiceModel::new(4.0, 0.0, 4.0).unwrap()).is_ok());
    }

    #[test]
    fn candidate_counts() {
        let choice = ChoiceModel::new(4.0, 0.0, 4.0).unwrap();
        let g = SearchGrid::standard(8);
        assert_eq!(family_candidates(Family::Csp, &g, 8, &choice).unwrap().len(), 1);
        assert_eq!(family_candidates(Family::TspCf, &g, 8, &choice).unwrap().len(), 7);
        assert_eq!(
            family_candidates(Family::TspCfStar, &g, 8, &choice).unwrap().len(),
            19 * 7
        );
        assert_eq!(family_candidates(Family::Tsp, &g, 8, &choice).unwrap().len(), 171 * 28);
        let empty = SearchGrid {
            fee_values: vec![],
            cutoff_min: 1,
            cutoff_max: 7,
        };
        assert!(family_candidates(Family::Tsp, &empty, 8, &choice).is_err());
    }

    #[test]
    fn tie_break_prefers_late_cutoff_then_low_fee() {
        let a = PolicySpec::TspCf {
            fee: 2.0,
            cutoff_age: 6,
        };
        let b = PolicySpec::TspCf {
            fee: 1.0,
            cutoff_age: 7,
        };
        let c = PolicySpec::TspCf {
            fee: 3.0,
            cutoff_age: 7,
        };
        let mut v = [a.clone(), c.clone(), b.clone()];
        v.sort_by(tie_cmp);
        assert_eq!(v, [b, c, a]);
    }

    #[test]
    fn optimum_dominates_every_candidate() {
        let s = scenario(4, 6.0);
        let ev = Evaluator::new(&s).unwrap();
        let grid = SearchGrid {
            fee_values: vec![1.0, 2.0, 3.0],
            cutoff_min: 1,
            cutoff_max: 3,
        };
        let opt = optimize_family(&ev, Family::Tsp, &grid).unwrap();
        for spec in family_candidates(Family::Tsp, &grid, 4, &s.choice).unwrap() {
            let r = ev.evaluate(&spec.build(4, &s.choice).unwrap()).unwrap();
            assert!(opt.report.variable_profit >= r.variable_profit - PROFIT_TIE_TOL);
        }
    }

    #[test]
    fn without_penalty_revenue_max_everywhere_is_optimal() {
        let s = scenario(3, 0.0);
        let ev = Evaluator::new(&s).unwrap();
        let opt = optimize_family(&ev, Family::TspCfStar, &SearchGrid::standard(3)).unwrap();
        assert_eq!(
            opt.best,
            PolicySpec::TspCf {
                fee: 2.0,
                cutoff_age: 2
            }
        );
        let set = exhaustive_fee_vector_search(&ev, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(set
            .members
            .contains(&FeeStructure::new(vec![2.0; 3], &s.choice).unwrap()));
    }

    #[test]
    fn enumeration_budget_enforced() {
        let s = scenario(8, 1.0);
        let ev = Evaluator::with_bound(&s, 3).unwrap();
        let grid: Vec<f64> = (0..10).map(|k| k as f64 * 0.4).collect();
        assert!(matches!(
            exhaustive_fee_vector_search(&ev, &grid),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn dominance_two_age_example() {
        let s = scenario(2, 5.0);
        let ev = Evaluator::new(&s).unwrap();
        // take rates (0.8, 0.2) and (0.2, 0.8)
        let front = FeeStructure::new(vec![0.8, 3.2], &s.choice).unwrap();
        let back = FeeStructure::new(vec![3.2, 0.8], &s.choice).unwrap();
        let r = dominance_experiment(&ev, &front, &back).unwrap();
        assert!(r.holds);
        assert!(r.backorders_f < r.backorders_f_prime);
        let same = dominance_experiment(&ev, &front, &front).unwrap();
        assert_eq!(same.backorders_f, same.backorders_f_prime);
        assert!(matches!(
            dominance_experiment(&ev, &back, &front),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn benefit_uses_absolute_denominator() {
        assert!((benefit(32.86, 29.66) - 0.10789).abs() < 1e-4);
        assert!(benefit(-3.0, -36.37) > 0.0);
    }
}
