//! Customer choice between express and regular shipment.
//!
//! Each arriving customer draws an additional utility `U ~ Uniform[u_min, u_max]`
//! for express shipment and picks express iff `U` exceeds the express fee.
//! Poisson thinning then splits demand into independent express and regular
//! Poisson streams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceModel {
    pub regular_price: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl ChoiceModel {
    pub fn new(regular_price: f64, u_min: f64, u_max: f64) -> Result<Self> {
        let model = ChoiceModel {
            regular_price,
            u_min,
            u_max,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.regular_price.is_finite() && self.regular_price >= 0.0) {
            return Err(Error::param(format!(
                "regular_price must be finite and >= 0, got {}",
                self.regular_price
            )));
        }
        if !(self.u_min.is_finite() && self.u_max.is_finite() && self.u_min >= 0.0) {
            return Err(Error::param("utility bounds must be finite with u_min >= 0"));
        }
        if self.u_min > self.u_max {
            return Err(Error::param(format!(
                "u_min ({}) must not exceed u_max ({})",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }

    /// Fraction of customers choosing express at total express price `price`.
    pub fn take_rate(&self, price: f64) -> f64 {
        let surcharge = price - self.regular_price;
        if self.u_max == self.u_min {
            return if surcharge < self.u_min { 1.0 } else { 0.0 };
        }
        if surcharge <= self.u_min {
            1.0
        } else if surcharge >= self.u_max {
            0.0
        } else {
            1.0 - (surcharge - self.u_min) / (self.u_max - self.u_min)
        }
    }

    /// Take rate at express fee `fee` (price `regular_price + fee`).
    /// An infinite fee means express is not offered.
    pub fn take_rate_at_fee(&self, fee: f64) -> f64 {
        if fee == f64::INFINITY {
            0.0
        } else {
            self.take_rate(self.regular_price + fee)
        }
    }

    /// Poisson thinning of total rate `lambda` into `(express, regular)` rates.
    pub fn split_rates(&self, lambda: f64, fee: f64) -> (f64, f64) {
        let express = lambda * self.take_rate_at_fee(fee);
        (express, lambda - express)
    }

    /// Fee maximizing per-customer fee revenue `f * w(p + f)` over `[u_min, u_max]`.
    pub fn revenue_max_fee(&self) -> f64 {
        if self.u_max == self.u_min {
            return self.u_min;
        }
        // f (u_max - f) / (u_max - u_min) on [u_min, u_max]; increasing below u_min.
        (0.5 * self.u_max).clamp(self.u_min, self.u_max)
    }
}
