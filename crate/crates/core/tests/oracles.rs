//! Brute-force oracles built straight from the period dynamics, without the
//! chain code.

use shipfee::chain::Scenario;
use shipfee::choice::ChoiceModel;
use shipfee::config::ExperimentConfig;
use shipfee::measures::Evaluator;
use shipfee::policy::FeeStructure;
use shipfee::stochastics::Pmf;

fn poisson(rate: f64) -> Vec<f64> {
    let mut p = vec![(-rate).exp()];
    let mut acc = p[0];
    while acc < 1.0 - 1e-17 && p.len() < 200 {
        let k = p.len() as f64;
        let next = p[p.len() - 1] * rate / k;
        acc += next;
        p.push(next);
    }
    p
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// One Lindley step `(w + D - B)^+` on a distribution over `0..n`.
fn lindley(w: &[f64], demand: &[f64], capacity: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for (x, px) in w.iter().enumerate() {
        if *px == 0.0 {
            continue;
        }
        for (d, pd) in demand.iter().enumerate() {
            for (b, pb) in capacity.iter().enumerate() {
                let y = (x + d).saturating_sub(b).min(w.len() - 1);
                out[y] += px * pd * pb;
            }
        }
    }
    out
}

/// Exact `E[M]` and `E[G^V]` for a two-period cycle with no practical bound.
///
/// The backlog at the start of a cycle is the Lindley workload `w`. The due
/// backlog after the first period is `(w + E0 - B0)^+`, and the cycle's
/// backorders are `((w + E0 - B0)^+ + E1 - B1)^+`.
fn two_period_oracle(lambda: f64, capacity: &[f64], fees: [f64; 2], u_max: f64, penalty: f64) -> (f64, f64) {
    let take = |f: f64| ((u_max - f) / u_max).clamp(0.0, 1.0);
    let demand = poisson(lambda);
    let n = 400;
    let mut w = vec![0.0; n];
    w[0] = 1.0;
    for _ in 0..20_000 {
        let next = lindley(&lindley(&w, &demand, capacity), &demand, capacity);
        let diff: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        w = next;
        if diff < 1e-15 {
            break;
        }
    }
    assert!(w[n - 1] < 1e-14, "workload support too small: {}", w[n - 1]);

    let e0 = poisson(lambda * take(fees[0]));
    let e1 = poisson(lambda * take(fees[1]));
    // Distribution of the due backlog after the first period.
    let mut due = vec![0.0; n + e0.len()];
    for (x, px) in w.iter().enumerate() {
        if *px == 0.0 {
            continue;
        }
        for (e, pe) in e0.iter().enumerate() {
            for (b, pb) in capacity.iter().enumerate() {
                due[(x + e).saturating_sub(b)] += px * pe * pb;
            }
        }
    }
    let tail = convolve(&e1, &[1.0]);
    let mut backorders = 0.0;
    for (x, px) in due.iter().enumerate() {
        for (e, pe) in tail.iter().enumerate() {
            for (b, pb) in capacity.iter().enumerate() {
                backorders += px * pe * pb * (x + e).saturating_sub(b) as f64;
            }
        }
    }
    let revenue: f64 = fees.iter().map(|&f| f * lambda * take(f)).sum();
    (backorders, revenue - penalty * backorders)
}

#[test]
fn two_period_chain_matches_lindley_oracle() {
    let capacity = vec![0.2; 5];
    let lambda = 1.5;
    let choice = ChoiceModel::new(4.0, 0.0, 4.0).unwrap();
    let scenario = Scenario::new(2, lambda, Pmf::new(capacity.clone()).unwrap(), choice, 8.0).unwrap();
    let ev = Evaluator::with_bound(&scenario, 110).unwrap();
    for fees in [[2.0, 3.0], [1.0, 1.0], [0.4, 3.6], [3.0, 0.5]] {
        let (m, g) = two_period_oracle(lambda, &capacity, fees, 4.0, 8.0);
        let r = ev
            .evaluate(&FeeStructure::new(fees.to_vec(), &choice).unwrap())
            .unwrap();
        assert!(r.rejection_probability < 1e-12, "{}", r.rejection_probability);
        assert!(
            (r.expected_backorders - m).abs() < 1e-10,
            "{fees:?}: {} vs {m}",
            r.expected_backorders
        );
        assert!(
            (r.variable_profit - g).abs() < 1e-9,
            "{fees:?}: {} vs {g}",
            r.variable_profit
        );
    }
}

#[test]
fn heavy_capacity_variance_matches_oracle() {
    // Capacity is 0 or 6; each period either ships nothing or a lot.
    let capacity = vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5];
    let lambda = 2.4;
    let choice = ChoiceModel::new(4.0, 0.0, 4.0).unwrap();
    let scenario = Scenario::new(2, lambda, Pmf::new(capacity.clone()).unwrap(), choice, 12.0).unwrap();
    let ev = Evaluator::with_bound(&scenario, 300).unwrap();
    let fees = [2.4, 3.2];
    let (m, g) = two_period_oracle(lambda, &capacity, fees, 4.0, 12.0);
    let r = ev
        .evaluate(&FeeStructure::new(fees.to_vec(), &choice).unwrap())
        .unwrap();
    assert!(
        (r.expected_backorders - m).abs() < 1e-9,
        "{} vs {m}",
        r.expected_backorders
    );
    assert!((r.variable_profit - g).abs() < 1e-8, "{} vs {g}", r.variable_profit);
}

#[test]
fn results_converge_as_the_bound_grows() {
    let scenario = ExperimentConfig::preset("rho085_c8").unwrap().scenario().unwrap();
    let fees = FeeStructure::new(vec![2.4, 2.4, 2.4, 2.4, 2.4, 2.4, 2.4, 3.0], &scenario.choice).unwrap();
    let a = Evaluator::with_bound(&scenario, 330).unwrap().evaluate(&fees).unwrap();
    let b = Evaluator::with_bound(&scenario, 400).unwrap().evaluate(&fees).unwrap();
    assert!(a.rejection_probability < 1e-12, "{}", a.rejection_probability);
    assert!(
        (a.expected_backorders - b.expected_backorders).abs() < 1e-9,
        "{} vs {}",
        a.expected_backorders,
        b.expected_backorders
    );
    assert!((a.variable_profit - b.variable_profit).abs() < 1e-7);
    // Rejections at the pinned benchmark bound remove most of the backlog.
    let pinned = Evaluator::new(&scenario).unwrap().evaluate(&fees).unwrap();
    assert!(pinned.expected_backorders < 0.5 * b.expected_backorders);
}

#[test]
fn published_regression_values() {
    // Two-level optimum of the rho = 0.95, c = 12 benchmark at its pinned bound.
    let scenario = ExperimentConfig::preset("rho095_c12").unwrap().scenario().unwrap();
    let fees = FeeStructure::new(vec![3.2, 3.2, 3.2, 3.2, 3.2, 3.2, 3.2, 3.6], &scenario.choice).unwrap();
    let r = Evaluator::new(&scenario).unwrap().evaluate(&fees).unwrap();
    assert_eq!(r.bound, 50);
    assert!(
        (r.expected_backorders - 2.2667).abs() < 5e-4,
        "{}",
        r.expected_backorders
    );
    assert!((r.variable_profit + 3.0006).abs() < 5e-4, "{}", r.variable_profit);
}
