use proptest::prelude::*;

use shipfee::chain::{stationary, Scenario, StationaryOptions, TruncatedKernel};
use shipfee::choice::ChoiceModel;
use shipfee::measures::Evaluator;
use shipfee::policy::FeeStructure;
use shipfee::stochastics::Pmf;

prop_compose! {
    fn small_scenario()(
        t in 2usize..5,
        weights in prop::collection::vec(0.0f64..1.0, 2..6),
        load in 0.2f64..0.95,
        penalty in 0.0f64..15.0,
    ) -> Scenario {
        let mut w = weights;
        *w.last_mut().unwrap() += 0.5;
        let cap = Pmf::from_weights(w).unwrap();
        let choice = ChoiceModel::new(4.0, 0.0, 4.0).unwrap();
        Scenario::new(t, load * cap.mean(), cap, choice, penalty).unwrap()
    }
}

fn fee_vector(t: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=4.0, t..=t)
}

fn with_fees() -> impl Strategy<Value = (Scenario, Vec<f64>, Vec<f64>)> {
    small_scenario().prop_flat_map(|s| {
        let t = s.period_length;
        (Just(s), fee_vector(t), fee_vector(t))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_rows_are_stochastic((s, fees, _) in with_fees(), bound in 0usize..7) {
        let k = TruncatedKernel::build(&s, &fees, bound).unwrap();
        for age in 0..s.period_length {
            for (due, total) in k.space().pairs() {
                let sum = k.row_sum(age, due, total);
                prop_assert!((sum - 1.0).abs() <= 1e-12, "age {age} ({due},{total}): {sum}");
            }
        }
    }

    #[test]
    fn staged_step_equals_matrix_product((s, fees, _) in with_fees(), bound in 0usize..6, seed in 1u64..1000) {
        let k = TruncatedKernel::build(&s, &fees, bound).unwrap();
        let n = k.space().len();
        let mut src: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 97) as f64 + 1.0).collect();
        let z: f64 = src.iter().sum();
        src.iter_mut().for_each(|x| *x /= z);
        for age in 0..s.period_length {
            let (dst, flows) = k.step(age, &src);
            let dense = k.dense(age);
            for j in 0..n {
                let expect: f64 = (0..n).map(|i| src[i] * dense[i][j]).sum();
                prop_assert!((dst[j] - expect).abs() <= 1e-13, "age {age} col {j}: {} vs {expect}", dst[j]);
            }
            prop_assert!((flows.mass - 1.0).abs() <= 1e-12);
            prop_assert!((dst.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn workload_marginals_ignore_fees((s, f, g) in with_fees(), bound in 1usize..10) {
        let ev = Evaluator::with_bound(&s, bound).unwrap();
        let n = ev.kernel(&FeeStructure::new(f.clone(), &s.choice).unwrap()).unwrap().space().len();
        let uniform = vec![1.0 / n as f64; n];
        let mut marginals = Vec::new();
        for fees in [f, g] {
            let k = ev.kernel(&FeeStructure::new(fees, &s.choice).unwrap()).unwrap();
            let pi = stationary(&k, Some(&uniform), StationaryOptions::default()).unwrap();
            marginals.push((0..s.period_length).map(|a| pi.total_marginal(a)).collect::<Vec<_>>());
        }
        for (a, b) in marginals[0].iter().zip(&marginals[1]) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn profit_is_revenue_minus_penalty((s, f, _) in with_fees(), bound in 0usize..12) {
        let fees = FeeStructure::new(f, &s.choice).unwrap();
        let r = Evaluator::with_bound(&s, bound).unwrap().evaluate(&fees).unwrap();
        prop_assert!(r.expected_backorders >= 0.0);
        prop_assert!((0.0..=1.0).contains(&r.rejection_probability));
        let g = r.express_revenue - s.penalty * r.expected_backorders;
        prop_assert!((r.variable_profit - g).abs() <= 1e-9 * (1.0 + g.abs()));
        prop_assert!(r.expected_backorders <= r.expected_backorders_raw + 1e-12);
        prop_assert!(r.express_revenue_accepted <= r.express_revenue + 1e-9);
    }

    #[test]
    fn batch_matches_single_evaluations((s, f, g) in with_fees(), bound in 0usize..10) {
        let ev = Evaluator::with_bound(&s, bound).unwrap();
        let mut shared = f.clone();
        if let (Some(last), Some(g_last)) = (shared.last_mut(), g.last()) {
            *last = *g_last;
        }
        let candidates: Vec<FeeStructure> = [f, g, shared]
            .into_iter()
            .map(|v| FeeStructure::new(v, &s.choice).unwrap())
            .collect();
        let batch = ev.evaluate_batch(&candidates);
        for (c, r) in candidates.iter().zip(batch) {
            let single = ev.evaluate(c).unwrap();
            prop_assert!(single.max_difference(&r.unwrap()) <= 1e-12);
        }
    }
}
