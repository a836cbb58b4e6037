//! Shipment policies.
//!
//! A policy is offered as a cutoff age plus one express fee per age up to the
//! cutoff ([`ShipmentPolicy`]). Charging `u_max` makes express unattractive to
//! every customer, so any policy has an equivalent [`FeeStructure`] with one
//! fee per age and no explicit cutoff; that canonical form is what the rest of
//! the crate evaluates and optimizes.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::choice::ChoiceModel;
use crate::error::{Error, Result};

/// Canonical fee vector `(f_0, ..., f_{T-1})`; `u_max` marks ages without express.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeeStructure {
    fees: Vec<f64>,
}

impl FeeStructure {
    /// Fee vector with every entry inside `[u_min, u_max]`.
    pub fn new(fees: Vec<f64>, choice: &ChoiceModel) -> Result<Self> {
        if fees.is_empty() {
            return Err(Error::param("fee structure must cover at least one age"));
        }
        if let Some((age, fee)) = fees
            .iter()
            .enumerate()
            .find(|(_, f)| !(**f >= choice.u_min && **f <= choice.u_max))
        {
            return Err(Error::param(format!(
                "fee {fee} at age {age} outside [{}, {}]",
                choice.u_min, choice.u_max
            )));
        }
        Ok(FeeStructure { fees })
    }

    /// Cutoff form to canonical form: ages after `cutoff` get `u_max`.
    pub fn canonicalize(
        period_length: usize,
        cutoff: usize,
        partial_fees: &[f64],
        choice: &ChoiceModel,
    ) -> Result<Self> {
        if cutoff >= period_length {
            return Err(Error::param(format!(
                "cutoff {cutoff} must be below the period length {period_length}"
            )));
        }
        if partial_fees.len() != cutoff + 1 {
            return Err(Error::param(format!(
                "cutoff {cutoff} needs {} fees, got {}",
                cutoff + 1,
                partial_fees.len()
            )));
        }
        let mut fees = partial_fees.to_vec();
        fees.resize(period_length, choice.u_max);
        FeeStructure::new(fees, choice)
    }

    pub fn period_length(&self) -> usize {
        self.fees.len()
    }

    pub fn fees(&self) -> &[f64] {
        &self.fees
    }

    /// Last age at which express is actually taken up, if any.
    pub fn cutoff(&self, choice: &ChoiceModel) -> Option<usize> {
        self.fees.iter().rposition(|f| choice.take_rate_at_fee(*f) > 0.0)
    }

    /// Strictly increasing fees over all ages.
    pub fn is_monotone(&self) -> bool {
        self.fees.windows(2).all(|w| w[1] > w[0])
    }

    pub fn is_weakly_monotone(&self) -> bool {
        self.fees.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn demand_profile(&self, choice: &ChoiceModel, lambda: f64) -> CumulativeDemandProfile {
        CumulativeDemandProfile::from_rates(self.fees.iter().map(|f| lambda * choice.take_rate_at_fee(*f)))
    }

    /// Lexicographic order on fee vectors.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.fees.iter().zip(&other.fees) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.fees.len().cmp(&other.fees.len())
    }
}

impl fmt::Display for FeeStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, fee) in self.fees.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{fee}")?;
        }
        write!(f, ")")
    }
}

/// Policy in cutoff form: express offered at ages `0..=cutoff` with the given fees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipmentPolicy {
    pub cutoff: usize,
    pub fees: Vec<f64>,
}

impl ShipmentPolicy {
    pub fn new(cutoff: usize, fees: Vec<f64>) -> Result<Self> {
        if fees.len() != cutoff + 1 {
            return Err(Error::param(format!(
                "cutoff {cutoff} needs {} fees, got {}",
                cutoff + 1,
                fees.len()
            )));
        }
        Ok(ShipmentPolicy { cutoff, fees })
    }

    /// Per-age express fees with `+inf` where express is not offered.
    pub fn age_fees(&self, period_length: usize) -> Vec<f64> {
        (0..period_length)
            .map(|age| self.fees.get(age).copied().unwrap_or(f64::INFINITY))
            .collect()
    }

    pub fn canonical(&self, period_length: usize, choice: &ChoiceModel) -> Result<FeeStructure> {
        FeeStructure::canonicalize(period_length, self.cutoff, &self.fees, choice)
    }
}

/// Parameters of the two-level policy: `express_fee` up to `switch_age`,
/// `lastminute_fee` up to `cutoff_age`, no express afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleTspParams {
    pub express_fee: f64,
    pub lastminute_fee: f64,
    pub switch_age: usize,
    pub cutoff_age: usize,
}

impl SimpleTspParams {
    pub fn validate(&self, period_length: usize) -> Result<()> {
        if self.lastminute_fee.partial_cmp(&self.express_fee) != Some(Ordering::Greater) {
            return Err(Error::param(format!(
                "last-minute fee {} must exceed express fee {}",
                self.lastminute_fee, self.express_fee
            )));
        }
        if !(self.switch_age <= self.cutoff_age && self.cutoff_age < period_length) {
            return Err(Error::param(format!(
                "need switch_age <= cutoff_age <= T-1, got {} / {} with T = {period_length}",
                self.switch_age, self.cutoff_age
            )));
        }
        Ok(())
    }
}

/// The policy families compared in the benchmark study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PolicySpec {
    /// Constant fee at every age, no cutoff.
    Csp { fee: f64 },
    /// Constant fee up to a cutoff.
    TspCf { fee: f64, cutoff_age: usize },
    /// Two-level fee with switch and cutoff.
    Tsp(SimpleTspParams),
    /// Explicit per-age fee vector.
    Fees { fees: Vec<f64> },
}

impl PolicySpec {
    pub fn build(&self, period_length: usize, choice: &ChoiceModel) -> Result<FeeStructure> {
        match self {
            PolicySpec::Csp { fee } => FeeStructure::new(vec![*fee; period_length], choice),
            PolicySpec::TspCf { fee, cutoff_age } => {
                FeeStructure::canonicalize(period_length, *cutoff_age, &vec![*fee; cutoff_age + 1], choice)
            }
            PolicySpec::Tsp(p) => {
                p.validate(period_length)?;
                let partial: Vec<f64> = (0..=p.cutoff_age)
                    .map(|age| {
                        if age <= p.switch_age {
                            p.express_fee
                        } else {
                            p.lastminute_fee
                        }
                    })
                    .collect();
                FeeStructure::canonicalize(period_length, p.cutoff_age, &partial, choice)
            }
            PolicySpec::Fees { fees } => {
                if fees.len() != period_length {
                    return Err(Error::param(format!(
                        "fee vector has length {}, expected {period_length}",
                        fees.len()
                    )));
                }
                FeeStructure::new(fees.clone(), choice)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::Csp { .. } => "CSP",
            PolicySpec::TspCf { .. } => "TSP-CF",
            PolicySpec::Tsp(_) => "TSP",
            PolicySpec::Fees { .. } => "fees",
        }
    }
}

/// Expected cumulative express orders by age, indexed `-1..=T-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeDemandProfile {
    /// `values[k]` holds the profile at age `k - 1`; `values[0] = 0`.
    values: Vec<f64>,
}

impl CumulativeDemandProfile {
    pub fn from_rates(rates: impl IntoIterator<Item = f64>) -> Self {
        let mut values = vec![0.0];
        let mut acc = 0.0;
        for r in rates {
            acc += r;
            values.push(acc);
        }
        CumulativeDemandProfile { values }
    }

    /// Profile value at `age`, where `age = -1` is the empty prefix.
    pub fn at(&self, age: isize) -> f64 {
        self.values[(age + 1) as usize]
    }

    pub fn period_length(&self) -> usize {
        self.values.len() - 1
    }

    pub fn total(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Expected share of all orders placed as express.
    pub fn express_fraction(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            0.0
        } else {
            self.total() / (self.period_length() as f64 * lambda)
        }
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Increments all lie in `[0, lambda]`.
    pub fn is_feasible(&self, lambda: f64, tol: f64) -> bool {
        self.increments().iter().all(|d| *d >= -tol && *d <= lambda + tol)
    }

    /// Componentwise `self >= other` with equal totals.
    pub fn dominates(&self, other: &Self, tol: f64) -> bool {
        self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| *a >= *b - tol)
            && (self.total() - other.total()).abs() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn choice() -> ChoiceModel {
        ChoiceModel::new(4.0, 0.0, 4.0).unwrap()
    }

    #[test]
    fn canonicalize_examples() {
        let c = choice();
        let f = FeeStructure::canonicalize(4, 2, &[1.0, 1.0, 1.0], &c).unwrap();
        assert_eq!(f.fees(), &[1.0, 1.0, 1.0, 4.0]);
        let full: Vec<f64> = (0..8).map(|i| 0.2 + 0.4 * i as f64).collect();
        let f = FeeStructure::canonicalize(8, 7, &full, &c).unwrap();
        assert_eq!(f.fees(), full.as_slice());
        let f = FeeStructure::canonicalize(8, 0, &[2.0], &c).unwrap();
        assert_eq!(f.fees(), &[2.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0]);
        assert!(FeeStructure::canonicalize(8, 2, &[2.0], &c).is_err());
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let c = choice();
        let f = FeeStructure::canonicalize(6, 3, &[1.0, 2.0, 2.5, 3.0], &c).unwrap();
        let cut = f.cutoff(&c).unwrap();
        let again = FeeStructure::canonicalize(6, cut, &f.fees()[..=cut], &c).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn family_builders() {
        let c = choice();
        assert_eq!(PolicySpec::Csp { fee: 2.0 }.build(8, &c).unwrap().fees(), &[2.0; 8]);
        let tsp = PolicySpec::Tsp(SimpleTspParams {
            express_fee: 2.4,
            lastminute_fee: 3.0,
            switch_age: 6,
            cutoff_age: 7,
        });
        assert_eq!(
            tsp.build(8, &c).unwrap().fees(),
            &[2.4, 2.4, 2.4, 2.4, 2.4, 2.4, 2.4, 3.0]
        );
        let cf = PolicySpec::TspCf {
            fee: 2.0,
            cutoff_age: 6,
        };
        assert_eq!(
            cf.build(8, &c).unwrap().fees(),
            &[2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 4.0]
        );
        let bad = PolicySpec::Tsp(SimpleTspParams {
            express_fee: 3.0,
            lastminute_fee: 3.0,
            switch_age: 2,
            cutoff_age: 5,
        });
        assert!(bad.build(8, &c).is_err());
    }

    #[test]
    fn profiles() {
        let c = choice();
        let none = FeeStructure::new(vec![4.0; 8], &c).unwrap();
        assert!(none.demand_profile(&c, 5.0).increments().iter().all(|d| *d == 0.0));
        let csp = FeeStructure::new(vec![2.0; 8], &c).unwrap().demand_profile(&c, 5.0);
        for age in 0..8 {
            assert!((csp.at(age) - 2.5 * (age + 1) as f64).abs() < 1e-12);
        }
        assert_eq!(csp.at(-1), 0.0);
        assert!((csp.express_fraction(5.0) - 0.5).abs() < 1e-12);
        let tsp = PolicySpec::Tsp(SimpleTspParams {
            express_fee: 2.4,
            lastminute_fee: 3.0,
            switch_age: 6,
            cutoff_age: 7,
        })
        .build(8, &c)
        .unwrap()
        .demand_profile(&c, 5.0);
        assert!((tsp.at(7) - 15.25).abs() < 1e-12);
        assert!(tsp.is_feasible(5.0, 1e-12));
    }

    #[test]
    fn monotonicity() {
        let c = choice();
        let flat = FeeStructure::new(vec![2.4, 2.4, 2.4, 3.0], &c).unwrap();
        assert!(!flat.is_monotone());
        assert!(flat.is_weakly_monotone());
        assert!(FeeStructure::new(vec![1.0, 2.0, 3.0, 4.0], &c).unwrap().is_monotone());
        let t = |fle: f64| FeeStructure::canonicalize(4, 1, &[2.0, fle], &c).unwrap();
        // Cutoff at 1 leaves u_max sentinels at ages 2 and 3, which tie.
        assert!(!t(3.0).is_monotone());
        let short = FeeStructure::canonicalize(3, 1, &[2.0, 3.0], &c).unwrap();
        assert!(short.is_monotone());
        let capped = FeeStructure::canonicalize(3, 1, &[2.0, 4.0], &c).unwrap();
        assert!(!capped.is_monotone());
    }

    proptest::proptest! {
        #[test]
        fn cutoff_form_and_canonical_form_agree(
            t in 2usize..9,
            cutoff_frac in 0.0f64..1.0,
            fees in proptest::collection::vec(0.0f64..4.0, 9),
        ) {
            let cutoff = ((t as f64 * cutoff_frac) as usize).min(t - 1);
            let m = choice();
            let policy = ShipmentPolicy::new(cutoff, fees[..=cutoff].to_vec()).unwrap();
            let canonical = policy.canonical(t, &m).unwrap();
            let age_fees = policy.age_fees(t);
            for (age, (c, a)) in canonical.fees().iter().zip(&age_fees).enumerate() {
                proptest::prop_assert_eq!(m.take_rate_at_fee(*c), m.take_rate_at_fee(*a), "age {}", age);
            }
            let again = FeeStructure::canonicalize(t, t - 1, canonical.fees(), &m).unwrap();
            proptest::prop_assert_eq!(&again, &canonical);
        }

        #[test]
        fn profiles_are_feasible_and_total_the_express_demand(fees in proptest::collection::vec(0.0f64..4.0, 2..9)) {
            let m = choice();
            let f = FeeStructure::new(fees.clone(), &m).unwrap();
            let profile = f.demand_profile(&m, 5.0);
            proptest::prop_assert!(profile.is_feasible(5.0, 1e-12));
            let total: f64 = fees.iter().map(|&x| 5.0 * m.take_rate_at_fee(x)).sum();
            proptest::prop_assert!((profile.total() - total).abs() <= 1e-12);
            proptest::prop_assert!(profile.dominates(&profile, 0.0));
        }
    }
}
