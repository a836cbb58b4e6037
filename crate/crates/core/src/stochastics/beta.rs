use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::Pmf;
use crate::error::{Error, Result};

const CF_EPS: f64 = 1e-15;
const CF_MAX_ITER: usize = 200_000;

/// How the continuous Beta on `[0, 1]` is mapped onto `{0, ..., n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaDiscretization {
    /// Scale the Beta to `[0, n]` and round: cell `i` is `[(i - 1/2)/n, (i + 1/2)/n]`
    /// clipped to `[0, 1]`. Moment matching happens on the scaled variable, so the
    /// achieved mean stays within rounding error of the requested one.
    #[default]
    Midpoint,
    /// Split `[0, 1]` into `n + 1` equal cells: `P(B = i) = F((i+1)/(n+1)) - F(i/(n+1))`.
    EqualCells,
}

/// Capacity distribution requested by mean and squared coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitySpec {
    pub support_max: usize,
    pub mean: f64,
    pub scv: f64,
    #[serde(default)]
    pub discretization: BetaDiscretization,
}

impl CapacitySpec {
    pub fn new(support_max: usize, mean: f64, scv: f64) -> Self {
        CapacitySpec {
            support_max,
            mean,
            scv,
            discretization: BetaDiscretization::default(),
        }
    }

    pub fn with_discretization(mut self, discretization: BetaDiscretization) -> Self {
        self.discretization = discretization;
        self
    }

    /// Continuous Beta shape parameters `(alpha, beta)` from moment matching.
    pub fn shape(&self) -> Result<(f64, f64)> {
        let n = self.support_max as f64;
        if self.support_max == 0 {
            return Err(Error::param("capacity support_max must be positive"));
        }
        if !(self.mean > 0.0 && self.mean < n) {
            return Err(Error::param(format!(
                "capacity mean {} must lie strictly inside (0, {n})",
                self.mean
            )));
        }
        let max_scv = (n - self.mean) / self.mean;
        if !(self.scv > 0.0 && self.scv < max_scv) {
            return Err(Error::param(format!(
                "capacity scv {} is not admissible for a Beta with mean {} on [0, {n}]; feasible range is (0, {max_scv:.6})",
                self.scv, self.mean
            )));
        }
        let m = self.mean / n;
        let v = self.scv * self.mean * self.mean / (n * n);
        let k = m * (1.0 - m) / v - 1.0;
        Ok((m * k, (1.0 - m) * k))
    }
}

/// A discretized Beta capacity together with its fitted and achieved moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityFit {
    pub pmf: Pmf,
    pub alpha: f64,
    pub beta: f64,
    pub requested_mean: f64,
    pub requested_scv: f64,
    pub achieved_mean: f64,
    pub achieved_scv: f64,
}

/// Moment-matched discretized Beta capacity on `{0, ..., spec.support_max}`.
pub fn discretized_beta(spec: &CapacitySpec) -> Result<CapacityFit> {
    let (alpha, beta) = spec.shape()?;
    let n = spec.support_max;
    let cell = |i: usize| -> (f64, f64) {
        match spec.discretization {
            BetaDiscretization::Midpoint => {
                let lo = if i == 0 { 0.0 } else { (i as f64 - 0.5) / n as f64 };
                let hi = if i == n { 1.0 } else { (i as f64 + 0.5) / n as f64 };
                (lo, hi)
            }
            BetaDiscretization::EqualCells => (i as f64 / (n + 1) as f64, (i + 1) as f64 / (n + 1) as f64),
        }
    };
    let mut mass = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let (lo, hi) = cell(i);
        mass.push(beta_interval(lo, hi, alpha, beta)?);
    }
    let pmf = Pmf::from_weights(mass)?;
    Ok(CapacityFit {
        achieved_mean: pmf.mean(),
        achieved_scv: pmf.scv(),
        pmf,
        alpha,
        beta,
        requested_mean: spec.mean,
        requested_scv: spec.scv,
    })
}

/// `P(lo < X <= hi)` for `X ~ Beta(a, b)`, evaluated on whichever side of the
/// median avoids cancellation.
fn beta_interval(lo: f64, hi: f64, a: f64, b: f64) -> Result<f64> {
    let lower = regularized_incomplete_beta(lo, a, b)?;
    let upper = regularized_incomplete_beta(hi, a, b)?;
    if lower > 0.5 {
        let lower_c = regularized_incomplete_beta(1.0 - hi, b, a)?;
        let upper_c = regularized_incomplete_beta(1.0 - lo, b, a)?;
        Ok((upper_c - lower_c).max(0.0))
    } else {
        Ok((upper - lower).max(0.0))
    }
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::param(format!("beta shapes must be positive, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::param(format!("incomplete beta argument {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * continued_fraction(x, a, b)? / a)
    } else {
        Ok(1.0 - front * continued_fraction(1.0 - x, b, a)? / b)
    }
}

fn continued_fraction(x: f64, a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Numerical {
        message: format!("incomplete beta continued fraction did not converge for x={x}, a={a}, b={b}"),
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadrature_cdf(x: f64, a: f64, b: f64) -> f64 {
        // Composite Simpson on the density; valid for a, b >= 1.
        let n = 20_000;
        let h = x / n as f64;
        let ln_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
        let pdf = |t: f64| {
            if !(0.0..=1.0).contains(&t) {
                0.0
            } else {
                let term = |k: f64, v: f64| if k == 0.0 { 0.0 } else { k * v.ln() };
                (ln_norm + term(a - 1.0, t) + term(b - 1.0, 1.0 - t)).exp()
            }
        };
        let mut s = pdf(0.0) + pdf(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn incomplete_beta_matches_quadrature() {
        for &(x, a, b) in &[(0.3, 2.0, 5.0), (0.7, 3.5, 1.5), (0.5, 1.0, 1.0), (0.12, 2.7, 4.1)] {
            let cf = regularized_incomplete_beta(x, a, b).unwrap();
            let q = quadrature_cdf(x, a, b);
            assert!((cf - q).abs() < 1e-10, "x={x} a={a} b={b}: {cf} vs {q}");
        }
    }

    #[test]
    fn incomplete_beta_matches_statrs() {
        for &(x, a, b) in &[(0.05, 0.8, 3.0), (0.9, 12.0, 0.6), (0.42, 30.0, 41.0)] {
            let ours = regularized_incomplete_beta(x, a, b).unwrap();
            let theirs = statrs::function::beta::beta_reg(a, b, x);
            assert!((ours - theirs).abs() < 1e-12, "{ours} vs {theirs}");
        }
    }

    #[test]
    fn fitted_mean_tracks_request() {
        let fit = discretized_beta(&CapacitySpec::new(20, 5.0 / 0.85, 0.5)).unwrap();
        assert!((fit.achieved_mean / fit.requested_mean - 1.0).abs() < 0.02);
        assert!((fit.pmf.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(fit.pmf.mass().iter().all(|p| *p > 0.0));
    }

    #[test]
    fn equal_cells_rule_drifts_low() {
        let spec = CapacitySpec::new(20, 5.0 / 0.85, 0.5).with_discretization(BetaDiscretization::EqualCells);
        let fit = discretized_beta(&spec).unwrap();
        // (n + 1) m - 1/2 for the equal-cell rule.
        assert!((fit.achieved_mean - (21.0 * (5.0 / 0.85) / 20.0 - 0.5)).abs() < 0.01);
    }

    #[test]
    fn symmetric_spec_gives_symmetric_pmf() {
        for disc in [BetaDiscretization::Midpoint, BetaDiscretization::EqualCells] {
            let fit = discretized_beta(&CapacitySpec::new(20, 10.0, 0.3).with_discretization(disc)).unwrap();
            let m = fit.pmf.mass();
            for i in 0..=20 {
                assert!((m[i] - m[20 - i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vanishing_variance_concentrates() {
        let fit = discretized_beta(&CapacitySpec::new(20, 10.0, 1e-7)).unwrap();
        assert!(fit.pmf.get(10) > 0.999);
    }

    #[test]
    fn inadmissible_variance_names_range() {
        let err = discretized_beta(&CapacitySpec::new(20, 5.0, 4.0)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("feasible range is (0, 3.0"), "{msg}");
    }
}
