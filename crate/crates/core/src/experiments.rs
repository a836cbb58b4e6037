//! Benchmark tables and fee sweeps, with CSV and JSON output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::measures::Evaluator;
use crate::optimize::{benefit, optimize_family, Benchmark, Family, Optimum, SearchGrid};
use crate::policy::{PolicySpec, SimpleTspParams};

/// Relative profit deviation convention used in every benefit column.
pub const BENEFIT_CONVENTION: &str = "(E[G^V]_a - E[G^V]_b) / |E[G^V]_b|, in percent";

/// Policy parameters flattened into table columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyColumns {
    pub f_e: f64,
    pub f_le: Option<f64>,
    pub tau_f: Option<usize>,
    pub tau_c: usize,
}

impl PolicyColumns {
    pub fn of(spec: &PolicySpec, period_length: usize) -> Self {
        match spec {
            PolicySpec::Csp { fee } => PolicyColumns {
                f_e: *fee,
                f_le: None,
                tau_f: None,
                tau_c: period_length - 1,
            },
            PolicySpec::TspCf { fee, cutoff_age } => PolicyColumns {
                f_e: *fee,
                f_le: None,
                tau_f: None,
                tau_c: *cutoff_age,
            },
            PolicySpec::Tsp(p) => PolicyColumns {
                f_e: p.express_fee,
                f_le: Some(p.lastminute_fee),
                tau_f: Some(p.switch_age),
                tau_c: p.cutoff_age,
            },
            PolicySpec::Fees { fees } => PolicyColumns {
                f_e: fees[0],
                f_le: None,
                tau_f: None,
                tau_c: period_length - 1,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub setting: String,
    pub policy: String,
    #[serde(rename = "f_E")]
    pub f_e: f64,
    #[serde(rename = "f_LE")]
    pub f_le: Option<f64>,
    #[serde(rename = "tau_F")]
    pub tau_f: Option<usize>,
    #[serde(rename = "tau_C")]
    pub tau_c: usize,
    #[serde(rename = "E_M")]
    pub expected_backorders: f64,
    #[serde(rename = "E_GV")]
    pub variable_profit: f64,
    #[serde(rename = "benefit_vs_CSP_pct")]
    pub benefit_vs_csp_pct: Option<f64>,
    #[serde(rename = "benefit_vs_TSP_CF_pct")]
    pub benefit_vs_tsp_cf_pct: Option<f64>,
    #[serde(rename = "benefit_vs_TSP_CF_star_pct")]
    pub benefit_vs_tsp_cf_star_pct: Option<f64>,
}

/// One block of the benchmark table: each policy against the ones ranked below it.
pub fn table2_rows(setting: &str, period_length: usize, bench: &Benchmark) -> Vec<Table2Row> {
    let ranked = Family::ALL;
    ranked
        .iter()
        .enumerate()
        .map(|(k, fam)| {
            let opt = bench.get(*fam);
            let cols = PolicyColumns::of(&opt.best, period_length);
            let profit = opt.report.variable_profit;
            let vs = |j: usize| (j < k).then(|| 100.0 * benefit(profit, bench.get(ranked[j]).report.variable_profit));
            Table2Row {
                setting: setting.to_string(),
                policy: fam.label().to_string(),
                f_e: cols.f_e,
                f_le: cols.f_le,
                tau_f: cols.tau_f,
                tau_c: cols.tau_c,
                expected_backorders: opt.report.expected_backorders,
                variable_profit: profit,
                benefit_vs_csp_pct: vs(0),
                benefit_vs_tsp_cf_pct: vs(1),
                benefit_vs_tsp_cf_star_pct: vs(2),
            }
        })
        .collect()
}

pub fn table2(cfg: &ExperimentConfig) -> Result<(Benchmark, Vec<Table2Row>)> {
    let scenario = cfg.scenario()?;
    let evaluator = Evaluator::new(&scenario)?;
    let bench = Benchmark::run(&evaluator, &cfg.grid())?;
    let rows = table2_rows(&cfg.label(), scenario.period_length, &bench);
    Ok((bench, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    pub setting: String,
    #[serde(rename = "tau_C")]
    pub tau_c: usize,
    #[serde(rename = "f_E")]
    pub f_e: f64,
    #[serde(rename = "f_LE")]
    pub f_le: f64,
    #[serde(rename = "tau_F")]
    pub tau_f: usize,
    #[serde(rename = "E_M")]
    pub expected_backorders: f64,
    #[serde(rename = "E_GV")]
    pub variable_profit: f64,
    /// Benefit of the best cutoff over this one.
    #[serde(rename = "benefit_of_best_cutoff_pct")]
    pub benefit_of_best_pct: Option<f64>,
}

/// Best two-level policy for each fixed cutoff in `cutoffs`.
pub fn tsp_by_cutoff(evaluator: &Evaluator, grid: &SearchGrid, cutoffs: &[usize]) -> Result<Vec<Optimum>> {
    cutoffs
        .iter()
        .map(|c| optimize_family(evaluator, Family::Tsp, &grid.clone().with_cutoffs(*c, *c)))
        .collect()
}

pub fn table3(cfg: &ExperimentConfig) -> Result<Vec<Table3Row>> {
    let scenario = cfg.scenario()?;
    let t = scenario.period_length;
    let evaluator = Evaluator::new(&scenario)?;
    let cutoffs: Vec<usize> = (1..t).rev().take(3).collect();
    let optima = tsp_by_cutoff(&evaluator, &cfg.grid(), &cutoffs)?;
    let best = optima
        .iter()
        .map(|o| o.report.variable_profit)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(optima
        .iter()
        .map(|o| {
            let cols = PolicyColumns::of(&o.best, t);
            let profit = o.report.variable_profit;
            Table3Row {
                setting: cfg.label(),
                tau_c: cols.tau_c,
                f_e: cols.f_e,
                f_le: cols.f_le.unwrap_or(cols.f_e),
                tau_f: cols.tau_f.unwrap_or(cols.tau_c),
                expected_backorders: o.report.expected_backorders,
                variable_profit: profit,
                benefit_of_best_pct: (profit < best).then(|| 100.0 * benefit(best, profit)),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigurePoint {
    /// `express_fee` (profit against `f_E`, best `f_LE`) or
    /// `lastminute_fee` (profit against `f_LE` at the best `f_E`).
    pub figure: String,
    pub setting: String,
    #[serde(rename = "tau_C")]
    pub tau_c: usize,
    #[serde(rename = "tau_F")]
    pub tau_f: usize,
    pub fee: f64,
    #[serde(rename = "f_E")]
    pub f_e: f64,
    #[serde(rename = "f_LE")]
    pub f_le: f64,
    pub variable_profit: f64,
}

/// Two-level policy profits at cutoff `T-1` over the fee grid, for each switch age.
pub fn sweep_figures(cfg: &ExperimentConfig) -> Result<Vec<FigurePoint>> {
    let scenario = cfg.scenario()?;
    let t = scenario.period_length;
    let evaluator = Evaluator::new(&scenario)?;
    let grid = cfg.grid();
    let tau_c = t - 1;
    let mut params = Vec::new();
    for (i, fe) in grid.fee_values.iter().enumerate() {
        for fle in &grid.fee_values[i + 1..] {
            for s in 0..tau_c {
                params.push(SimpleTspParams {
                    express_fee: *fe,
                    lastminute_fee: *fle,
                    switch_age: s,
                    cutoff_age: tau_c,
                });
            }
        }
    }
    let fees = params
        .iter()
        .map(|p| PolicySpec::Tsp(*p).build(t, &scenario.choice))
        .collect::<Result<Vec<_>>>()?;
    let profits: Vec<f64> = evaluator
        .evaluate_batch(&fees)
        .into_iter()
        .map(|r| r.map(|r| r.variable_profit))
        .collect::<Result<_>>()?;
    let evaluated: Vec<(SimpleTspParams, f64)> = params.into_iter().zip(profits).collect();

    let best_fe = evaluated
        .iter()
        .fold(None::<(SimpleTspParams, f64)>, |acc, (p, v)| match acc {
            Some((_, b)) if b >= *v => acc,
            _ => Some((*p, *v)),
        })
        .map(|(p, _)| p.express_fee);

    let mut out = Vec::new();
    let setting = cfg.label();
    for s in 0..tau_c {
        for fe in &grid.fee_values {
            let best = evaluated
                .iter()
                .filter(|(p, _)| p.switch_age == s && p.express_fee == *fe)
                .fold(None::<&(SimpleTspParams, f64)>, |acc, x| match acc {
                    Some(a) if a.1 >= x.1 => Some(a),
                    _ => Some(x),
                });
            if let Some((p, v)) = best {
                out.push(FigurePoint {
                    figure: "express_fee".into(),
                    setting: setting.clone(),
                    tau_c,
                    tau_f: s,
                    fee: *fe,
                    f_e: p.express_fee,
                    f_le: p.lastminute_fee,
                    variable_profit: *v,
                });
            }
        }
    }
    if let Some(fe) = best_fe {
        for s in 0..tau_c {
            for (p, v) in evaluated
                .iter()
                .filter(|(p, _)| p.switch_age == s && p.express_fee == fe)
            {
                out.push(FigurePoint {
                    figure: "lastminute_fee".into(),
                    setting: setting.clone(),
                    tau_c,
                    tau_f: s,
                    fee: p.lastminute_fee,
                    f_e: fe,
                    f_le: p.lastminute_fee,
                    variable_profit: *v,
                });
            }
        }
    }
    Ok(out)
}

/// Writes rows as comma-separated values with a header row.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::Error::Parameter(format!("csv output: {other:?}")),
    }
}

/// JSON document carrying the rows and the benefit convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated<T> {
    pub benefit_convention: String,
    pub rows: Vec<T>,
}

impl<T> Tabulated<T> {
    pub fn new(rows: Vec<T>) -> Self {
        Tabulated {
            benefit_convention: BENEFIT_CONVENTION.to_string(),
            rows,
        }
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_layout() {
        let row = Table2Row {
            setting: "s".into(),
            policy: "TSP".into(),
            f_e: 2.4,
            f_le: Some(3.0),
            tau_f: Some(6),
            tau_c: 7,
            expected_backorders: 0.56,
            variable_profit: 32.86,
            benefit_vs_csp_pct: Some(10.8),
            benefit_vs_tsp_cf_pct: None,
            benefit_vs_tsp_cf_star_pct: Some(1.98),
        };
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "setting,policy,f_E,f_LE,tau_F,tau_C,E_M,E_GV,benefit_vs_CSP_pct,benefit_vs_TSP_CF_pct,benefit_vs_TSP_CF_star_pct"
        );
        assert_eq!(lines.next().unwrap(), "s,TSP,2.4,3.0,6,7,0.56,32.86,10.8,,1.98");
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let values: Vec<f64> = vec![0.1 + 0.2, 1.0 / 3.0, -36.37, 1e-17, 12345.678901234567];
        let mut buf = Vec::new();
        write_json(&values, &mut buf).unwrap();
        let back: Vec<f64> = serde_json::from_slice(&buf).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
