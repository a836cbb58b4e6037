use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::choice::ChoiceModel;
use crate::error::{Error, Result};
use crate::stochastics::Pmf;

/// Default tolerated long-run share of overflowing periods.
pub const DEFAULT_REJECTION_THRESHOLD: f64 = 0.023;

/// Exogenous model primitives. One period has unit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub period_length: usize,
    /// Expected orders per period.
    pub lambda: f64,
    pub capacity: Arc<Pmf>,
    pub choice: ChoiceModel,
    /// Penalty per backorder.
    pub penalty: f64,
    pub rejection_threshold: f64,
    /// Pinned truncation bound; when absent the bound is searched from the threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_bound: Option<usize>,
}

impl Scenario {
    pub fn new(period_length: usize, lambda: f64, capacity: Pmf, choice: ChoiceModel, penalty: f64) -> Result<Self> {
        let s = Scenario {
            period_length,
            lambda,
            capacity: Arc::new(capacity),
            choice,
            penalty,
            rejection_threshold: DEFAULT_REJECTION_THRESHOLD,
            truncation_bound: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_rejection_threshold(mut self, threshold: f64) -> Result<Self> {
        self.rejection_threshold = threshold;
        self.validate()?;
        Ok(self)
    }

    pub fn with_truncation_bound(mut self, bound: Option<usize>) -> Self {
        self.truncation_bound = bound;
        self
    }

    pub fn with_penalty(mut self, penalty: f64) -> Result<Self> {
        self.penalty = penalty;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_length < 2 {
            return Err(Error::param(format!(
                "period length must be at least 2, got {}",
                self.period_length
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::param(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.penalty.is_finite() && self.penalty >= 0.0) {
            return Err(Error::param(format!(
                "penalty must be finite and >= 0, got {}",
                self.penalty
            )));
        }
        if !(self.rejection_threshold > 0.0 && self.rejection_threshold <= 1.0) {
            return Err(Error::param(format!(
                "rejection threshold must lie in (0, 1], got {}",
                self.rejection_threshold
            )));
        }
        self.choice.validate()?;
        let rho = self.utilization();
        if rho.is_nan() || rho >= 1.0 {
            return Err(Error::param(format!(
                "utilization lambda / E[B] = {rho:.4} must be below 1 (E[B] = {:.4})",
                self.capacity.mean()
            )));
        }
        Ok(())
    }

    /// `lambda / E[B]` computed from the capacity pmf actually in use.
    pub fn utilization(&self) -> f64 {
        let mean = self.capacity.mean();
        if mean == 0.0 {
            if self.lambda == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lambda / mean
        }
    }

    /// Expected fixed revenue per cycle from the regular price.
    pub fn fixed_profit(&self) -> f64 {
        self.period_length as f64 * self.lambda * self.choice.regular_price
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overloaded_capacity_rejected() {
        let choice = ChoiceModel::new(4.0, 0.0, 4.0).unwrap();
        let err = Scenario::new(3, 1.0, Pmf::point_mass(0), choice, 5.0).unwrap_err();
        assert!(err.to_string().contains("utilization"));
        assert!(Scenario::new(3, 2.0, Pmf::point_mass(2), choice, 5.0).is_err());
        assert!(Scenario::new(1, 1.0, Pmf::point_mass(2), choice, 5.0).is_err());
        assert!(Scenario::new(3, 1.0, Pmf::point_mass(2), choice, -1.0).is_err());
        let ok = Scenario::new(3, 1.0, Pmf::point_mass(2), choice, 5.0).unwrap();
        assert_eq!(ok.utilization(), 0.5);
        assert_eq!(ok.fixed_profit(), 12.0);
    }
}
