//! Browser bindings: capacity distribution, single-policy evaluation and a
//! profit curve over the regular-period express fee.

use shipfee::config::{ExperimentConfig, PRESETS};
use shipfee::measures::Evaluator;
use shipfee::policy::{FeeStructure, PolicySpec, SimpleTspParams};
use wasm_bindgen::prelude::*;

fn load(preset: &str) -> Result<(ExperimentConfig, Evaluator), String> {
    let cfg = ExperimentConfig::preset(preset).map_err(|e| e.to_string())?;
    let scenario = cfg.scenario().map_err(|e| e.to_string())?;
    let ev = Evaluator::new(&scenario).map_err(|e| e.to_string())?;
    Ok((cfg, ev))
}

fn two_level(
    ev: &Evaluator,
    express_fee: f64,
    lastminute_fee: f64,
    switch_age: usize,
    cutoff_age: usize,
) -> Result<shipfee::measures::PerformanceReport, String> {
    let s = ev.scenario();
    let spec = PolicySpec::Tsp(SimpleTspParams {
        express_fee,
        lastminute_fee,
        switch_age,
        cutoff_age,
    });
    let fees = spec.build(s.period_length, &s.choice).map_err(|e| e.to_string())?;
    ev.evaluate(&fees).map_err(|e| e.to_string())
}

/// Names of the built-in benchmark settings.
#[wasm_bindgen]
pub fn preset_names() -> Vec<String> {
    PRESETS.iter().map(|p| p.to_string()).collect()
}

/// Per-period capacity probabilities `P(B = k)` for a preset.
#[wasm_bindgen]
pub fn capacity_pmf(preset: &str) -> Result<Vec<f64>, String> {
    let cfg = ExperimentConfig::preset(preset).map_err(|e| e.to_string())?;
    Ok(cfg.capacity().map_err(|e| e.to_string())?.mass().to_vec())
}

/// Performance report of a two-level policy, as JSON.
#[wasm_bindgen]
pub fn evaluate_tsp(
    preset: &str,
    express_fee: f64,
    lastminute_fee: f64,
    switch_age: usize,
    cutoff_age: usize,
) -> Result<String, String> {
    let (_, ev) = load(preset)?;
    let report = two_level(&ev, express_fee, lastminute_fee, switch_age, cutoff_age)?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// Sweep of the express fee up to the switch age over `steps` points of
/// `[0, regular price]`, with the other parameters held. Returns `[fee, E[M], E[G^V]]` triples,
/// flattened.
#[wasm_bindgen]
pub fn profit_curve(
    preset: &str,
    lastminute_fee: f64,
    switch_age: usize,
    cutoff_age: usize,
    steps: usize,
) -> Result<Vec<f64>, String> {
    if steps < 2 {
        return Err("steps must be at least 2".into());
    }
    let (cfg, ev) = load(preset)?;
    let s = ev.scenario();
    if !(switch_age <= cutoff_age && cutoff_age < s.period_length) {
        return Err(format!("need switch age <= cutoff age <= {}", s.period_length - 1));
    }
    let top = cfg.choice.regular_price;
    let mut out = Vec::with_capacity(3 * steps);
    for i in 0..steps {
        let fee = top * i as f64 / (steps - 1) as f64;
        let partial: Vec<f64> = (0..=cutoff_age)
            .map(|age| if age <= switch_age { fee } else { lastminute_fee })
            .collect();
        let fees =
            FeeStructure::canonicalize(s.period_length, cutoff_age, &partial, &s.choice).map_err(|e| e.to_string())?;
        let r = ev.evaluate(&fees).map_err(|e| e.to_string())?;
        out.extend([fee, r.expected_backorders, r.variable_profit]);
    }
    Ok(out)
}
