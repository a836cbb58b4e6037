use shipfee_web::{capacity_pmf, evaluate_tsp, preset_names, profit_curve};

#[test]
fn presets_and_capacity() {
    let names = preset_names();
    assert_eq!(names.len(), 6);
    let pmf = capacity_pmf(&names[0]).unwrap();
    assert_eq!(pmf.len(), 21);
    assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(capacity_pmf("missing").is_err());
}

#[test]
fn evaluation_json() {
    let text = evaluate_tsp("rho085_c8", 2.4, 3.0, 6, 7).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let m = v["expected_backorders"].as_f64().unwrap();
    let g = v["variable_profit"].as_f64().unwrap();
    assert!((m - 0.561).abs() < 1e-3, "{m}");
    assert!((g - 32.862).abs() < 1e-3, "{g}");
    assert!(evaluate_tsp("rho085_c8", 2.4, 3.0, 7, 6).is_err());
}

#[test]
fn curve_peaks_near_the_two_level_optimum() {
    let flat = profit_curve("rho085_c8", 3.0, 6, 7, 21).unwrap();
    assert_eq!(flat.len(), 63);
    let best = flat.chunks(3).max_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!((best[0] - 2.4).abs() < 1e-9, "{best:?}");
    assert!(profit_curve("rho085_c8", 3.0, 6, 7, 1).is_err());
}
