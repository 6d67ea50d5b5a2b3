//! Command-line front end: analyses from a TOML configuration, coverage and
//! reversal sweeps, reproduction of published reference values and Monte
//! Carlo sampling.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cases;
pub mod config;
pub mod error;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use overrun_core::inference::deletion_analyze;
use overrun_core::simulate::{simulate_trials, SampleSummary};
use overrun_core::{
    analyze, AnalysisOptions, CoverageReport, Design, InferenceReport, OperatingCharacteristics,
    ReversalReport,
};
use serde::Serialize;

pub use overrun_core;

use crate::cases::{run_case, CaseId, Check};
use crate::config::{Config, MethodChoice};
pub use crate::error::CliError;
use crate::error::EXIT_FAILED_CHECKS;

#[derive(Debug, Parser)]
#[command(
    name = "overrun",
    version,
    about = "Inference for sequential trials with overrunning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Rendering of the results on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,
    /// Also write the machine-readable results (CSV for sweeps) to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Time steps of the crossing-probability grid.
    #[arg(long, global = true, env = "OVERRUN_STEPS")]
    pub steps: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// P-value, median-unbiased estimate and confidence interval.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
    /// Coverage or reversal probabilities over a grid of drifts.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: EvalMode,
    },
    /// Recompute published values and compare them with the references.
    Reproduce {
        #[arg(long, value_enum)]
        case: CaseId,
    },
    /// Sample trials from a design.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Overrides the sample size in the configuration.
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Machine,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Coverage,
    Reversal,
}

/// Runs a parsed command, writing to `stdout`. Returns the exit status.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let rendered = match &cli.command {
        Command::Analyze { config } => {
            let cfg = Config::load(config)?;
            let report = analyze_config(&cfg, cli.steps)?;
            let machine = json_line(&report);
            let text = match cli.format {
                Format::Human => human_report(&report, cfg.options.two_sided),
                Format::Machine => machine.clone(),
                Format::Csv => report_csv(&report),
            };
            (text, machine, 0)
        }
        Command::Eval { config, mode } => {
            let cfg = Config::load(config)?;
            let (human, csv, machine) = match mode {
                EvalMode::Coverage => {
                    let r = coverage_config(&cfg, cli.steps)?;
                    (coverage_human(&r), coverage_csv(&r), json_line(&r))
                }
                EvalMode::Reversal => {
                    let rows = reversal_config(&cfg, cli.steps)?;
                    (
                        reversal_human(&rows),
                        reversal_csv(&rows),
                        json_lines(&rows),
                    )
                }
            };
            let text = match cli.format {
                Format::Human => human,
                Format::Machine => machine,
                Format::Csv => csv.clone(),
            };
            (text, csv, 0)
        }
        Command::Reproduce { case } => {
            let grid = Config::default_grid(cli.steps)?;
            let checks = run_case(*case, &grid)?;
            let code = if checks.iter().all(|c| c.pass) {
                0
            } else {
                EXIT_FAILED_CHECKS
            };
            let machine = json_lines(&checks);
            let text = match cli.format {
                Format::Human => checks_human(&checks),
                Format::Machine => machine.clone(),
                Format::Csv => checks_csv(&checks),
            };
            (text, machine, code)
        }
        Command::Simulate { config, seed, n } => {
            let cfg = Config::load(config)?;
            let design = cfg.design()?;
            let opts = cfg.path_options()?;
            let sim = cfg.simulate.unwrap_or_default();
            let n = n.unwrap_or(sim.n);
            let outcomes = simulate_trials(&design, sim.delta, n, *seed, &opts)?;
            let summary = SampleSummary::from_outcomes(&outcomes);
            let machine = json_line(&summary);
            let text = match cli.format {
                Format::Human => summary_human(&summary, sim.delta, *seed),
                Format::Machine => machine.clone(),
                Format::Csv => outcomes_csv(&outcomes),
            };
            (text, machine, 0)
        }
    };
    let (text, file_text, code) = rendered;
    stdout.write_all(text.as_bytes())?;
    if let Some(path) = &cli.out {
        fs::write(path, file_text)?;
    }
    Ok(code)
}

pub fn analyze_config(cfg: &Config, steps: Option<usize>) -> Result<InferenceReport, CliError> {
    let design = cfg.design()?;
    let outcome = cfg.outcome(&design)?;
    let overrun = cfg.observed_overrun()?;
    let opts = AnalysisOptions {
        grid: cfg.grid(steps)?,
        delta0: cfg.options.delta0,
    };
    let level = cfg.options.level;
    match cfg.options.method {
        MethodChoice::NoOverrun => Ok(analyze(&design, &outcome, None, level, &opts)?),
        MethodChoice::Combination => {
            Ok(analyze(&design, &outcome, overrun.as_ref(), level, &opts)?)
        }
        MethodChoice::Deletion => {
            let Design::Group(g) = &design else {
                return Err(CliError::Invalid(
                    "the deletion method applies to group designs only".into(),
                ));
            };
            let ov = overrun.ok_or_else(|| {
                CliError::Invalid("the deletion method needs an [overrun] block".into())
            })?;
            let k = outcome.stage.expect("group outcomes carry a stage");
            Ok(deletion_analyze(g, k, outcome.x, &ov, level, opts.delta0)?)
        }
    }
}

pub fn coverage_config(cfg: &Config, steps: Option<usize>) -> Result<CoverageReport, CliError> {
    let design = cfg.design()?;
    let sweep = cfg.sweep()?;
    let overrun = cfg.overrun_model()?;
    let oc = OperatingCharacteristics::new(&design, &cfg.grid(steps)?)?
        .with_final_stage(sweep.final_stage);
    Ok(oc.coverage_sweep(&overrun, &sweep.gammas, &sweep.levels, &sweep.delta_grid()?)?)
}

/// A reversal sweep at one weighting factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversalRow {
    pub rho: f64,
    pub c: f64,
    pub alpha: f64,
    pub report: ReversalReport,
}

pub fn reversal_config(cfg: &Config, steps: Option<usize>) -> Result<Vec<ReversalRow>, CliError> {
    let design = cfg.design()?;
    let sweep = cfg.sweep()?;
    let c = sweep
        .c
        .ok_or_else(|| CliError::Invalid("sweep: reversal mode needs `c`".into()))?;
    if sweep.rhos.is_empty() {
        return Err(CliError::Invalid("sweep: `rhos` is empty".into()));
    }
    let oc = OperatingCharacteristics::new(&design, &cfg.grid(steps)?)?;
    let grid = sweep.delta_grid()?;
    sweep
        .rhos
        .iter()
        .map(|&rho| {
            Ok(ReversalRow {
                rho,
                c,
                alpha: sweep.alpha,
                report: oc.reversal_sweep(&grid, c, rho, sweep.alpha)?,
            })
        })
        .collect()
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn json_lines<T: Serialize>(values: &[T]) -> String {
    values.iter().map(json_line).collect()
}

fn human_report(r: &InferenceReport, two_sided: bool) -> String {
    let pct = format!("{}%", r.level * 100.0);
    let p = if two_sided {
        ("p (two-sided)".to_string(), r.two_sided_p)
    } else {
        ("p (one-sided)".to_string(), r.one_sided_p)
    };
    let rows = [
        ("method".to_string(), method_name(r)),
        ("null drift".to_string(), r.delta0.to_string()),
        (p.0, format!("{:.5}", p.1)),
        ("estimate".to_string(), format!("{:.4}", r.delta_hat)),
        (
            format!("{pct} interval"),
            format!("({:.4}, {:.4})", r.ci_lo, r.ci_hi),
        ),
        ("HR estimate".to_string(), format!("{:.4}", r.hr_hat)),
        (
            format!("{pct} HR interval"),
            format!("({:.4}, {:.4})", r.hr_lo, r.hr_hi),
        ),
    ];
    let mut s = String::new();
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<17} {v}");
    }
    s
}

fn method_name(r: &InferenceReport) -> String {
    serde_json::to_value(r.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn report_csv(r: &InferenceReport) -> String {
    format!(
        "method,level,delta0,one_sided_p,two_sided_p,delta_hat,ci_lo,ci_hi,hr_hat,hr_lo,hr_hi\n\
         {},{},{},{},{},{},{},{},{},{},{}\n",
        method_name(r),
        r.level,
        r.delta0,
        r.one_sided_p,
        r.two_sided_p,
        r.delta_hat,
        r.ci_lo,
        r.ci_hi,
        r.hr_hat,
        r.hr_lo,
        r.hr_hi
    )
}

fn coverage_header(r: &CoverageReport) -> Vec<String> {
    let mut h = vec!["delta".to_string()];
    h.extend(r.gammas.iter().map(|g| format!("q_{g}")));
    h.extend(r.levels.iter().map(|l| format!("Q_{l}")));
    h
}

fn coverage_rows(r: &CoverageReport) -> Vec<Vec<f64>> {
    (0..r.delta_grid.len())
        .map(|d| {
            let mut row = vec![r.delta_grid[d]];
            row.extend(r.q_values.iter().map(|v| v[d]));
            row.extend(r.interval_values.iter().map(|v| v[d]));
            row
        })
        .collect()
}

fn coverage_csv(r: &CoverageReport) -> String {
    let mut s = coverage_header(r).join(",");
    s.push('\n');
    for row in coverage_rows(r) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    let mut inf = vec!["inf".to_string()];
    inf.extend(r.q_inf.iter().chain(&r.interval_inf).map(|v| v.to_string()));
    let mut at = vec!["argmin".to_string()];
    at.extend(
        r.q_argmin
            .iter()
            .chain(&r.interval_argmin)
            .map(|v| v.to_string()),
    );
    let _ = writeln!(s, "{}\n{}", inf.join(","), at.join(","));
    s
}

fn coverage_human(r: &CoverageReport) -> String {
    let mut s = String::new();
    for h in coverage_header(r) {
        let _ = write!(s, "{h:>10}");
    }
    s.push('\n');
    for row in coverage_rows(r) {
        let _ = write!(s, "{:>10.3}", row[0]);
        for v in &row[1..] {
            let _ = write!(s, "{v:>10.4}");
        }
        s.push('\n');
    }
    let _ = write!(s, "{:>10}", "inf");
    for v in r.q_inf.iter().chain(&r.interval_inf) {
        let _ = write!(s, "{v:>10.4}");
    }
    let _ = write!(s, "\n{:>10}", "at delta");
    for v in r.q_argmin.iter().chain(&r.interval_argmin) {
        let _ = write!(s, "{v:>10.3}");
    }
    s.push('\n');
    s
}

fn reversal_csv(rows: &[ReversalRow]) -> String {
    let mut s = String::from("rho,c,alpha,delta,reject_to_accept,accept_to_reject,pow,ovpow\n");
    for row in rows {
        let r = &row.report;
        for d in 0..r.delta_grid.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                row.rho,
                row.c,
                row.alpha,
                r.delta_grid[d],
                r.p_reject_to_accept[d],
                r.p_accept_to_reject[d],
                r.pow[d],
                r.ovpow[d]
            );
        }
    }
    s
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn reversal_human(rows: &[ReversalRow]) -> String {
    let mut s = String::new();
    for row in rows {
        let r = &row.report;
        let _ = writeln!(s, "rho = {}, c = {}, alpha = {}", row.rho, row.c, row.alpha);
        let _ = writeln!(
            s,
            "{:>8}{:>12}{:>12}{:>10}{:>10}",
            "delta", "R->A", "A->R", "pow", "ovpow"
        );
        for d in 0..r.delta_grid.len() {
            let _ = writeln!(
                s,
                "{:>8.3}{:>12.6}{:>12.6}{:>10.4}{:>10.4}",
                r.delta_grid[d],
                r.p_reject_to_accept[d],
                r.p_accept_to_reject[d],
                r.pow[d],
                r.ovpow[d]
            );
        }
        let _ = writeln!(
            s,
            "{:>8}{:>12.6}{:>12.6}\n",
            "max",
            max_of(&r.p_reject_to_accept),
            max_of(&r.p_accept_to_reject)
        );
    }
    s
}

fn checks_human(checks: &[Check]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:<28} {:>10} {:>10} {:>8}  result",
        "case", "cell", "computed", "expected", "tol"
    );
    for c in checks {
        let _ = writeln!(
            s,
            "{:<14} {:<28} {:>10.4} {:>10.4} {:>8.4}  {}",
            c.case,
            c.cell,
            c.computed,
            c.expected,
            c.tolerance,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    let _ = writeln!(s, "{passed}/{} cells pass", checks.len());
    s
}

fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("case,cell,computed,expected,tolerance,pass\n");
    for c in checks {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            c.case, c.cell, c.computed, c.expected, c.tolerance, c.pass
        );
    }
    s
}

fn summary_human(s: &SampleSummary, delta: f64, seed: u64) -> String {
    format!(
        "trials            {}\n\
         drift             {delta}\n\
         seed              {seed}\n\
         upper             {} ({:.4} +- {:.4})\n\
         lower             {} ({:.4} +- {:.4})\n\
         final             {}\n\
         mean stop time    {:.4} +- {:.4}\n",
        s.n,
        s.upper,
        s.p_upper,
        s.se_upper,
        s.lower,
        s.p_lower,
        s.se_lower,
        s.finals,
        s.mean_t,
        s.se_t
    )
}

fn outcomes_csv(outcomes: &[overrun_core::TrialOutcome]) -> String {
    let mut s = String::from("t,x,hit,stage\n");
    for o in outcomes {
        let hit = match o.hit {
            overrun_core::Hit::Upper => "upper",
            overrun_core::Hit::Lower => "lower",
            overrun_core::Hit::Final => "final",
        };
        let stage = o.stage.map(|k| k.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{hit},{stage}", o.t, o.x);
    }
    s
}
