use serde::{Deserialize, Serialize};

use super::kernel::{AgeFlows, StepScratch, TruncatedKernel};
use super::state::StateSpace;
use crate::error::{Error, Result};
use crate::stochastics::Pmf;

/// Convergence controls for the cycle power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    /// L1 distance between successive age-0 iterates at which to stop.
    pub tolerance: f64,
    pub max_cycles: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            tolerance: 1e-12,
            max_cycles: 1_000_000,
        }
    }
}

/// Stationary distribution of the periodic chain, one vector per age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub bound: usize,
    pub per_age: Vec<Vec<f64>>,
    /// Expected flows of one cycle started from `per_age[0]`.
    pub flows: Vec<AgeFlows>,
    /// L1 distance between `per_age[0]` and its image after one cycle.
    pub residual: f64,
    pub cycles: usize,
}

impl StationaryDistribution {
    pub fn period_length(&self) -> usize {
        self.per_age.len()
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::new(self.bound)
    }

    pub fn at(&self, age: usize) -> &[f64] {
        &self.per_age[age]
    }

    pub fn probability(&self, age: usize, due_now: usize, total: usize) -> f64 {
        self.per_age[age][self.space().index(due_now, total)]
    }

    pub fn total_marginal(&self, age: usize) -> Vec<f64> {
        self.space().total_marginal(&self.per_age[age])
    }
}

/// Transition matrix of the total backlog `x' = min(bound, (x + D - B)^+)`.
pub fn workload_matrix(demand: &Pmf, capacity: &Pmf, bound: usize) -> Vec<Vec<f64>> {
    let n = bound + 1;
    let net = demand.convolve(&reverse(capacity));
    let offset = capacity.support_max() as isize;
    let mut m = vec![vec![0.0; n]; n];
    for (x, row) in m.iter_mut().enumerate() {
        for (k, p) in net.mass().iter().enumerate() {
            let y = (x as isize + k as isize - offset).clamp(0, bound as isize) as usize;
            row[y] += p;
        }
    }
    m
}

fn reverse(pmf: &Pmf) -> Pmf {
    let mut mass = pmf.mass().to_vec();
    mass.reverse();
    Pmf::from_weights(mass).expect("reversed pmf is valid")
}

/// Stationary law of the total backlog, by Grassmann-Taksar-Heyman elimination.
///
/// The total backlog evolves independently of fees and deadlines, so this is
/// also the total marginal of the periodic chain at every age.
pub fn workload_stationary(demand: &Pmf, capacity: &Pmf, bound: usize) -> Vec<f64> {
    gth(workload_matrix(demand, capacity, bound))
}

/// Rejection probability `P(X + D - B > bound)` under the workload law.
pub fn workload_rejection(demand: &Pmf, capacity: &Pmf, bound: usize) -> f64 {
    let w = workload_stationary(demand, capacity, bound);
    let mut p = 0.0;
    for (x, px) in w.iter().enumerate() {
        for (d, pd) in demand.mass().iter().enumerate() {
            for (b, pb) in capacity.mass().iter().enumerate() {
                if x + d > bound + b {
                    p += px * pd * pb;
                }
            }
        }
    }
    p
}

/// Stationary vector of an irreducible stochastic matrix (GTH, no subtractions).
pub fn gth(mut p: Vec<Vec<f64>>) -> Vec<f64> {
    let n = p.len();
    for k in (1..n).rev() {
        let s: f64 = p[k][..k].iter().sum();
        if s <= 0.0 {
            continue;
        }
        let pk = p[k][..k].to_vec();
        for row in p[..k].iter_mut() {
            row[k] /= s;
            let pik = row[k];
            if pik == 0.0 {
                continue;
            }
            for (x, pkj) in row[..k].iter_mut().zip(&pk) {
                *x += pik * pkj;
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * p[i][k]).sum();
    }
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= z);
    pi
}

/// Runs one cycle from `start`, returning per-age distributions, flows and the end vector.
pub fn run_cycle(
    kernel: &TruncatedKernel,
    start: &[f64],
    scratch: &mut StepScratch,
) -> (Vec<Vec<f64>>, Vec<AgeFlows>, Vec<f64>) {
    let t = kernel.period_length();
    let mut per_age = Vec::with_capacity(t);
    let mut flows = Vec::with_capacity(t);
    per_age.push(start.to_vec());
    let mut end = vec![0.0; start.len()];
    for age in 0..t {
        let f = kernel.step_into(age, &per_age[age], &mut end, scratch);
        flows.push(f);
        if age + 1 < t {
            per_age.push(end.clone());
        }
    }
    (per_age, flows, end)
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Stationary distribution of the periodic chain by power iteration over whole cycles.
///
/// Starts from `start` when given, otherwise from the workload law on the
/// diagonal, which is exact at age 0 up to rounding.
pub fn stationary(
    kernel: &TruncatedKernel,
    start: Option<&[f64]>,
    options: StationaryOptions,
) -> Result<StationaryDistribution> {
    let space = kernel.space();
    let mut x = match start {
        Some(s) => {
            if s.len() != space.len() {
                return Err(Error::Precondition(format!(
                    "start vector has {} entries, state space has {}",
                    s.len(),
                    space.len()
                )));
            }
            s.to_vec()
        }
        None => {
            let demand = kernel.incomes()[0].express.convolve(&kernel.incomes()[0].regular);
            space.diagonal(&workload_stationary(&demand, kernel.capacity(), kernel.bound()))
        }
    };
    normalize(&mut x)?;
    let mut scratch = StepScratch::default();
    let mut previous = f64::INFINITY;
    let mut rising = 0usize;
    let mut damping = 1.0;
    let mut last_residual = f64::NAN;
    for cycle in 1..=options.max_cycles {
        let (per_age, flows, mut end) = run_cycle(kernel, &x, &mut scratch);
        let residual = l1_distance(&end, &x);
        if !residual.is_finite() {
            return Err(Error::Numerical {
                message: "non-finite iterate in stationary power iteration".into(),
                residual,
            });
        }
        if residual <= options.tolerance {
            return Ok(StationaryDistribution {
                bound: kernel.bound(),
                per_age,
                flows,
                residual,
                cycles: cycle,
            });
        }
        if residual >= previous {
            rising += 1;
            if rising >= 3 && damping == 1.0 {
                damping = 0.5;
            }
        } else {
            rising = 0;
        }
        previous = residual;
        last_residual = residual;
        if damping < 1.0 {
            for (e, v) in end.iter_mut().zip(&x) {
                *e = damping * *e + (1.0 - damping) * v;
            }
        }
        normalize(&mut end)?;
        x = end;
    }
    Err(Error::Numerical {
        message: format!("stationary iteration did not converge in {} cycles", options.max_cycles),
        residual: last_residual,
    })
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let z: f64 = v.iter().sum();
    if !(z.is_finite() && z > 0.0) || v.iter().any(|p| *p < 0.0) {
        return Err(Error::Numerical {
            message: "distribution has non-positive or invalid mass".into(),
            residual: z,
        });
    }
    v.iter_mut().for_each(|p| *p /= z);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Scenario;
    use crate::choice::ChoiceModel;

    fn small() -> Scenario {
        let capacity = Pmf::new(vec![0.1, 0.2, 0.4, 0.3]).unwrap();
        Scenario::new(3, 1.5, capacity, ChoiceModel::new(4.0, 0.0, 4.0).unwrap(), 5.0).unwrap()
    }

    #[test]
    fn gth_two_state() {
        let pi = gth(vec![vec![0.9, 0.1], vec![0.3, 0.7]]);
        assert!((pi[0] - 0.75).abs() < 1e-15);
        assert!((pi[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn arbitrary_start_converges_to_diagonal_start() {
        let s = small();
        let k = TruncatedKernel::build(&s, &[1.0, 2.0, f64::INFINITY], 8).unwrap();
        let a = stationary(&k, None, StationaryOptions::default()).unwrap();
        let mut uniform = vec![1.0; k.space().len()];
        uniform[0] = 5.0;
        let b = stationary(&k, Some(&uniform), StationaryOptions::default()).unwrap();
        assert!(a.cycles <= 2);
        for age in 0..3 {
            assert!(l1_distance(a.at(age), b.at(age)) < 1e-10);
        }
    }

    #[test]
    fn stationary_is_fixed_point_of_dense_cycle() {
        let s = small();
        let k = TruncatedKernel::build(&s, &[0.5, 3.0, 2.0], 5).unwrap();
        let d = stationary(&k, None, StationaryOptions::default()).unwrap();
        let n = k.space().len();
        for age in 0..3 {
            let m = k.dense(age);
            let next = (age + 1) % 3;
            for (j, target) in d.at(next).iter().enumerate() {
                let v: f64 = (0..n).map(|i| d.at(age)[i] * m[i][j]).sum();
                assert!((v - target).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn age_zero_is_diagonal_and_marginals_agree() {
        let s = small();
        let k = TruncatedKernel::build(&s, &[0.5, 3.0, 2.0], 7).unwrap();
        let d = stationary(&k, None, StationaryOptions::default()).unwrap();
        for (i, p) in d.at(0).iter().enumerate() {
            let (due, total) = k.space().pair(i);
            if due != total {
                assert!(p.abs() < 1e-15);
            }
        }
        let m0 = d.total_marginal(0);
        for age in 1..3 {
            assert!(l1_distance(&m0, &d.total_marginal(age)) < 1e-12);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let s = small();
        let k = TruncatedKernel::build(&s, &[1.0, 1.0, 1.0], 6).unwrap();
        let mut start = vec![0.0; k.space().len()];
        start[k.space().index(6, 6)] = 1.0;
        let err = stationary(
            &k,
            Some(&start),
            StationaryOptions {
                tolerance: 1e-15,
                max_cycles: 1,
            },
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
