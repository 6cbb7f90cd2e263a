//! Command-line front end: `designbench run` and `designbench classify`.
//!
//! Claim checks live here rather than in the library modules; each built-in
//! scenario carries its expected values and tolerances.

mod render;
pub mod scenario;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::estimators::EstimatorId;
use crate::oracle;

pub use render::{render_csv, render_json, render_table};
pub use scenario::{
    load_mechanism, load_population, run_scenario, Claim, RunReport, SamplingChoice, Scenario, ScenarioConfig,
};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "DESIGNBENCH_THREADS";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("design error: {0}")]
    Design(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Design(_) => 2,
        }
    }
}

/// Exit status when a scenario's claim check fails.
pub const EXIT_CLAIM_FAILED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "designbench", version, about = "Exact analysis and simulation of treatment-assignment designs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a built-in or custom scenario: oracle report, Monte Carlo, claim checks.
    Run(RunArgs),
    /// Print the exact design report for a population and mechanism as JSON.
    Classify {
        #[arg(long)]
        population: PathBuf,
        #[arg(long)]
        mechanism: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// s3_confounded_random, s4_deterministic_unconfounded, s5_constant,
    /// s5_covariate, s5_global_coin, s6_proportional_vs_constant or custom.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,
    /// Population JSON (custom scenario only).
    #[arg(long)]
    pub population: Option<PathBuf>,
    /// Mechanism JSON (custom scenario only).
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    /// Units per replication (defaults depend on the scenario).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of replications (defaults depend on the scenario).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Comma-separated estimator ids: dim, ht, ipw_x, ipw_xhat, hajek.
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    pub estimators: Option<Vec<EstimatorId>>,
    #[arg(long, value_enum, default_value_t = SamplingArg::Iid)]
    pub sampling: SamplingArg,
    /// Output format; defaults to a table on a terminal and JSON otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SamplingArg {
    Iid,
    FixedCounts,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse()
}

fn parse_estimator(s: &str) -> Result<EstimatorId, String> {
    s.parse()
}

/// Thread cap from `DESIGNBENCH_THREADS`, if set.
pub fn threads_from_env(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
    }
}

/// Parses arguments, runs the command, writes output, and returns the exit
/// status.
pub fn run<I, T>(args: I, threads_env: Option<&str>, stdout_is_terminal: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, threads_env, stdout_is_terminal, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "designbench: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, threads_env: Option<&str>, stdout_is_terminal: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let io = |e: std::io::Error| CliError::Config(format!("writing output: {e}"));
    match cli.command {
        Command::Classify { population, mechanism } => {
            let pop = load_population(&population)?;
            let mech = load_mechanism(&mechanism)?;
            let report = oracle::build_report(&pop, &mech).map_err(|e| CliError::Config(e.to_string()))?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            writeln!(out, "{text}").map_err(io)?;
            Ok(0)
        }
        Command::Run(args) => {
            let (default_n, default_reps) = args.scenario.default_size();
            let cfg = ScenarioConfig {
                scenario: args.scenario,
                population: args.population,
                mechanism: args.mechanism,
                n: args.n.unwrap_or(default_n),
                replications: args.reps.unwrap_or(default_reps),
                master_seed: args.seed,
                estimators: args.estimators,
                sampling: match args.sampling {
                    SamplingArg::Iid => SamplingChoice::Iid,
                    SamplingArg::FixedCounts => SamplingChoice::FixedCounts,
                },
                threads: threads_from_env(threads_env)?,
            };
            let report = run_scenario(&cfg)?;
            let format = args
                .format
                .unwrap_or(if stdout_is_terminal { Format::Table } else { Format::Json });
            let text = match format {
                Format::Table => render_table(&report),
                Format::Json => render_json(&report),
                Format::Csv => render_csv(&report),
            };
            write!(out, "{text}").map_err(io)?;
            Ok(if report.all_claims_pass() { 0 } else { EXIT_CLAIM_FAILED })
        }
    }
}
