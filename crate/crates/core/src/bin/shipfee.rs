use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shipfee::config::{ExperimentConfig, PRESETS};
use shipfee::experiments::{self, Tabulated};
use shipfee::measures::{Evaluator, PerformanceReport};
use shipfee::optimize::{optimize_family, Family};
use shipfee::policy::{PolicySpec, SimpleTspParams};
use shipfee::sim::{simulate, SimConfig, SimReport, DEFAULT_SEED};
use shipfee::{verify, Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "shipfee",
    version,
    about = "Evaluate and optimize time-dependent express shipment fees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Bundled preset, e.g. rho085_c8.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output file; relative paths resolve against SHIPFEE_OUT_DIR when set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SHIPFEE_THREADS")]
    threads: Option<usize>,

    /// Random seed (default 20240601, or the config's simulation seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Tolerated rejection probability (default 0.023). Setting it discards a
    /// pinned truncation bound, so the bound is searched again.
    #[arg(long, global = true)]
    rejection_threshold: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact performance measures of one policy.
    Evaluate {
        /// csp:F | tsp-cf:F:TAU_C | tsp:F_E:F_LE:TAU_F:TAU_C | fees:F0,F1,...
        #[arg(long)]
        policy: Option<String>,
    },
    /// Best parameters of a policy family on the search grid.
    Optimize {
        #[arg(long, value_enum, default_value_t = FamilyArg::Tsp)]
        family: FamilyArg,
    },
    /// Monte Carlo estimates with 95% halfwidths.
    Simulate {
        #[arg(long)]
        policy: Option<String>,
        /// Measured cycles per replication (default 1000000).
        #[arg(long)]
        cycles: Option<u64>,
        /// Warm-up cycles discarded per replication (default 1000).
        #[arg(long)]
        warmup: Option<u64>,
        /// Independent replications (default 1).
        #[arg(long)]
        replications: Option<u32>,
    },
    /// Structural property suites on small random instances.
    Verify {
        #[arg(long, default_value_t = 3)]
        small_t: usize,
    },
    /// Benchmark policies for each setting.
    ReproduceTable2,
    /// Best two-level policy for the three latest cutoffs.
    ReproduceTable3,
    /// Long-format profit curves of the two-level policy.
    SweepFigures,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FamilyArg {
    Csp,
    TspCf,
    TspCfStar,
    Tsp,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Csp => Family::Csp,
            FamilyArg::TspCf => Family::TspCf,
            FamilyArg::TspCfStar => Family::TspCfStar,
            FamilyArg::Tsp => Family::Tsp,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Parameter("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    }
    if let Some(th) = cli.rejection_threshold {
        if !(th > 0.0 && th <= 1.0) {
            return Err(Error::Parameter(format!(
                "--rejection-threshold must lie in (0, 1], got {th}"
            )));
        }
    }
    let out = Output::new(cli.out.as_deref(), cli.format)?;
    match &cli.command {
        Command::Evaluate { policy } => {
            let cfg = single_config(&cli)?;
            let scenario = cfg.scenario()?;
            let spec = policy_spec(policy.as_deref(), &cfg)?;
            let fees = spec.build(scenario.period_length, &scenario.choice)?;
            let report = Evaluator::new(&scenario)?.evaluate(&fees)?;
            match out.format(Format::Json) {
                Format::Json => out.json(&report)?,
                Format::Csv => out.csv(&[ReportRow::new(&cfg.label(), spec.label(), &report)])?,
            }
        }
        Command::Optimize { family } => {
            let cfg = single_config(&cli)?;
            let scenario = cfg.scenario()?;
            let opt = optimize_family(&Evaluator::new(&scenario)?, (*family).into(), &cfg.grid())?;
            if opt.tie_binds() {
                eprintln!(
                    "note: {} candidates tie within tolerance; chosen by later cutoff, later switch, lower fees",
                    opt.tied_with.len() + 1
                );
            }
            match out.format(Format::Json) {
                Format::Json => out.json(&opt)?,
                Format::Csv => out.csv(&[ReportRow::new(&cfg.label(), opt.family.label(), &opt.report)])?,
            }
        }
        Command::Simulate {
            policy,
            cycles,
            warmup,
            replications,
        } => {
            let cfg = single_config(&cli)?;
            let scenario = cfg.scenario()?;
            let spec = policy_spec(policy.as_deref(), &cfg)?;
            let fees = spec.build(scenario.period_length, &scenario.choice)?;
            let bound = Evaluator::new(&scenario)?.bound();
            let base = cfg.simulation.unwrap_or(SimConfig::new(1_000_000, DEFAULT_SEED, bound));
            let warmup = warmup.unwrap_or(base.warmup_cycles);
            let sim = SimConfig {
                cycles: cycles.unwrap_or(base.measured_cycles()) + warmup,
                warmup_cycles: warmup,
                seed: cli.seed.unwrap_or(base.seed),
                bound,
                replications: replications.unwrap_or(base.replications),
                batches: base.batches,
            };
            sim.validate()?;
            let report = simulate(&scenario, &fees, &sim)?;
            match out.format(Format::Json) {
                Format::Json => out.json(&report)?,
                Format::Csv => out.csv(&[SimRow::new(&cfg.label(), &report)])?,
            }
        }
        Command::Verify { small_t } => {
            let suites = verify::run_all(*small_t, cli.seed.unwrap_or(DEFAULT_SEED))?;
            let mut failed = false;
            for s in &suites {
                failed |= !s.passed();
                eprintln!(
                    "{} {:<26} cases {:>4}  failures {:>3}  worst {:.3e}  ({})",
                    if s.passed() { "PASS" } else { "FAIL" },
                    s.name,
                    s.cases,
                    s.failures,
                    s.worst,
                    s.note
                );
            }
            match out.format(Format::Json) {
                Format::Json => out.json(&suites)?,
                Format::Csv => out.csv(&suites)?,
            }
            if failed {
                return Ok(1);
            }
        }
        Command::ReproduceTable2 => {
            let mut rows = Vec::new();
            for cfg in configs(&cli)? {
                rows.extend(experiments::table2(&cfg)?.1);
            }
            out.table(rows)?;
        }
        Command::ReproduceTable3 => {
            let mut rows = Vec::new();
            for cfg in configs(&cli)? {
                rows.extend(experiments::table3(&cfg)?);
            }
            out.table(rows)?;
        }
        Command::SweepFigures => {
            let mut rows = Vec::new();
            for cfg in configs(&cli)? {
                rows.extend(experiments::sweep_figures(&cfg)?);
            }
            out.table(rows)?;
        }
    }
    Ok(0)
}

fn apply_flags(cli: &Cli, mut cfg: ExperimentConfig) -> ExperimentConfig {
    if let Some(th) = cli.rejection_threshold {
        cfg.scenario.rejection_threshold = Some(th);
        cfg.scenario.truncation_bound = None;
    }
    cfg
}

fn single_config(cli: &Cli) -> Result<ExperimentConfig> {
    let cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => {
            return Err(Error::Parameter(format!(
                "this command needs --config PATH or --preset NAME (presets: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(apply_flags(cli, cfg))
}

/// The selected configuration, or every preset when none is selected.
fn configs(cli: &Cli) -> Result<Vec<ExperimentConfig>> {
    if cli.config.is_some() || cli.preset.is_some() {
        return Ok(vec![single_config(cli)?]);
    }
    PRESETS
        .iter()
        .map(|p| ExperimentConfig::preset(p).map(|c| apply_flags(cli, c)))
        .collect()
}

fn policy_spec(arg: Option<&str>, cfg: &ExperimentConfig) -> Result<PolicySpec> {
    match arg {
        Some(text) => parse_policy(text),
        None => Ok(cfg.policy.clone().unwrap_or(PolicySpec::Csp {
            fee: cfg.choice.revenue_max_fee(),
        })),
    }
}

fn parse_policy(text: &str) -> Result<PolicySpec> {
    let bad = || {
        Error::Parameter(format!(
            "cannot parse policy '{text}'; expected csp:F, tsp-cf:F:TAU_C, tsp:F_E:F_LE:TAU_F:TAU_C or fees:F0,F1,..."
        ))
    };
    let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
    let parts: Vec<&str> = rest.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let age = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    match (kind, parts.as_slice()) {
        ("csp", [f]) => Ok(PolicySpec::Csp { fee: num(f)? }),
        ("tsp-cf", [f, c]) => Ok(PolicySpec::TspCf {
            fee: num(f)?,
            cutoff_age: age(c)?,
        }),
        ("tsp", [fe, fle, s, c]) => Ok(PolicySpec::Tsp(SimpleTspParams {
            express_fee: num(fe)?,
            lastminute_fee: num(fle)?,
            switch_age: age(s)?,
            cutoff_age: age(c)?,
        })),
        ("fees", [list]) => Ok(PolicySpec::Fees {
            fees: list.split(',').map(num).collect::<Result<_>>()?,
        }),
        _ => Err(bad()),
    }
}

#[derive(Serialize)]
struct ReportRow {
    setting: String,
    policy: String,
    fees: String,
    bound: usize,
    #[serde(rename = "E_M")]
    expected_backorders: f64,
    #[serde(rename = "E_M_raw")]
    expected_backorders_raw: f64,
    #[serde(rename = "E_GV")]
    variable_profit: f64,
    #[serde(rename = "E_GV_accepted")]
    variable_profit_accepted: f64,
    #[serde(rename = "E_GF")]
    fixed_profit: f64,
    #[serde(rename = "J")]
    rejection_probability: f64,
    rejected_orders: f64,
    mean_delay: Option<f64>,
}

impl ReportRow {
    fn new(setting: &str, policy: &str, r: &PerformanceReport) -> Self {
        ReportRow {
            setting: setting.into(),
            policy: policy.into(),
            fees: r
                .fees
                .fees()
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            bound: r.bound,
            expected_backorders: r.expected_backorders,
            expected_backorders_raw: r.expected_backorders_raw,
            variable_profit: r.variable_profit,
            variable_profit_accepted: r.variable_profit_accepted,
            fixed_profit: r.fixed_profit,
            rejection_probability: r.rejection_probability,
            rejected_orders: r.expected_rejected_orders,
            mean_delay: r.mean_delay,
        }
    }
}

#[derive(Serialize)]
struct SimRow {
    setting: String,
    cycles: u64,
    seed: u64,
    bound: usize,
    #[serde(rename = "E_M")]
    backorders: f64,
    #[serde(rename = "E_M_halfwidth")]
    backorders_hw: f64,
    #[serde(rename = "E_GV")]
    profit: f64,
    #[serde(rename = "E_GV_halfwidth")]
    profit_hw: f64,
    #[serde(rename = "J")]
    rejection: f64,
    #[serde(rename = "J_halfwidth")]
    rejection_hw: f64,
}

impl SimRow {
    fn new(setting: &str, r: &SimReport) -> Self {
        SimRow {
            setting: setting.into(),
            cycles: r.measured_cycles,
            seed: r.seed,
            bound: r.bound,
            backorders: r.expected_backorders.mean,
            backorders_hw: r.expected_backorders.halfwidth,
            profit: r.variable_profit.mean,
            profit_hw: r.variable_profit.halfwidth,
            rejection: r.rejection_probability.mean,
            rejection_hw: r.rejection_probability.halfwidth,
        }
    }
}

struct Output {
    path: Option<PathBuf>,
    format: Option<Format>,
}

impl Output {
    fn new(out: Option<&Path>, format: Option<Format>) -> Result<Self> {
        let dir = std::env::var_os("SHIPFEE_OUT_DIR").map(PathBuf::from);
        let path = match (out, dir) {
            (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
            (Some(p), _) => Some(p.to_path_buf()),
            (None, _) => None,
        };
        if let Some(parent) = path.as_ref().and_then(|p| p.parent()) {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let format = format.or_else(|| {
            path.as_ref()
                .and_then(|p| p.extension())
                .and_then(|e| match e.to_str() {
                    Some("json") => Some(Format::Json),
                    Some("csv") => Some(Format::Csv),
                    _ => None,
                })
        });
        Ok(Output { path, format })
    }

    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        experiments::write_json(value, self.writer()?)
    }

    fn csv<T: Serialize>(&self, rows: &[T]) -> Result<()> {
        experiments::write_csv(rows, self.writer()?)
    }

    fn table<T: Serialize>(&self, rows: Vec<T>) -> Result<()> {
        match self.format(Format::Csv) {
            Format::Csv => self.csv(&rows),
            Format::Json => self.json(&Tabulated::new(rows)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_strings() {
        assert_eq!(parse_policy("csp:2").unwrap(), PolicySpec::Csp { fee: 2.0 });
        assert_eq!(
            parse_policy("tsp-cf:2.4:6").unwrap(),
            PolicySpec::TspCf {
                fee: 2.4,
                cutoff_age: 6
            }
        );
        assert!(matches!(parse_policy("tsp:2.4:3.0:6:7").unwrap(), PolicySpec::Tsp(_)));
        assert_eq!(
            parse_policy("fees:1,2,3").unwrap(),
            PolicySpec::Fees {
                fees: vec![1.0, 2.0, 3.0]
            }
        );
        assert!(parse_policy("tsp:1:2").is_err());
        assert!(parse_policy("flat").is_err());
    }
}
