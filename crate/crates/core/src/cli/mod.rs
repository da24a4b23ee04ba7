//! Command-line front end: `run`, `sweep` and `analyze`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error.

pub mod config_file;
pub mod export;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analytic::{self, baseline_saturation, pr_reveal, pr_reveal_after_n, pr_skip};
use crate::metrics::RunSummary;
use crate::sim::{run_replications, Replications, ScenarioConfig};
use crate::DetectionParams;
use config_file::{apply_overrides, canonical_key, load_config};
use export::{combined_header, combined_rows, fmt_float, write_run_outputs};

/// Environment variable bounding the worker pool.
pub const WORKERS_ENV: &str = "COOPVERIFY_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "coopverify",
    version,
    about = "Cooperative beacon verification simulator"
)]
pub struct Cli {
    /// Base random seed (run i uses seed + i).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run replications of one scenario and export CSV results.
    Run(RunArgs),
    /// Run one scenario per value of a swept parameter.
    Sweep(SweepArgs),
    /// Evaluate the closed-form detection model.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// TOML scenario file; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set n_nodes=40` or `--set adversary.gamma_adv=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Replications per scenario.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// One of N, pr_check, alpha, tau, gamma, scheme.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values (tau in seconds).
    #[arg(long)]
    pub values: String,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub alpha: u32,
    #[arg(long)]
    pub pr_check: f64,
    #[arg(long)]
    pub neighbors: u64,
    #[arg(long)]
    pub votes: u64,
    /// Print the cumulative reveal probability for 1..=K claims.
    #[arg(long, default_value_t = 10)]
    pub n_messages: u32,
    /// Verification delay, seconds.
    #[arg(long, default_value_t = 0.005)]
    pub tau: f64,
    /// Beacon rate, Hz.
    #[arg(long, default_value_t = 10.0)]
    pub gamma: f64,
    /// Monte Carlo trials.
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Directory for analysis.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub const SWEEP_PARAMS: [&str; 6] = ["N", "pr_check", "alpha", "tau", "gamma", "scheme"];

/// Parses and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            CliError::config(format!(
                "{WORKERS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::io(e.to_string()))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let pool = worker_pool()?;
    pool.install(|| match &cli.command {
        Command::Run(a) => cmd_run(a, cli.seed).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(a, cli.seed),
        Command::Analyze(a) => cmd_analyze(a, cli.seed.unwrap_or(1)),
    })
}

fn replicate(config: &ScenarioConfig, runs: usize) -> Result<Replications, CliError> {
    if runs == 0 {
        return Err(CliError::config("--runs must be at least 1"));
    }
    run_replications(config, runs).map_err(|e| CliError::config(e.to_string()))
}

fn write_outputs(dir: &Path, reps: &Replications) -> Result<(), CliError> {
    write_run_outputs(dir, reps)
        .map_err(|e| CliError::io(format!("writing {}: {e}", dir.display())))
}

pub fn cmd_run(args: &RunArgs, seed: Option<u64>) -> Result<Replications, CliError> {
    let s = &args.scenario;
    let config = load_config(s.config.as_deref(), &s.set, seed)?;
    let reps = replicate(&config, s.runs)?;
    write_outputs(&s.out, &reps)?;
    print!("{}", summary_table(&reps));
    Ok(reps)
}

/// Config override for one sweep value.
pub fn sweep_override(param: &str, value: &str) -> Result<String, CliError> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(CliError::config(format!(
            "unknown sweep parameter `{param}` (expected one of {})",
            SWEEP_PARAMS.join(", ")
        )));
    }
    Ok(format!("{}={}", canonical_key(param), value.trim()))
}

pub fn cmd_sweep(args: &SweepArgs, seed: Option<u64>) -> Result<(), CliError> {
    let s = &args.scenario;
    let base = load_config(s.config.as_deref(), &s.set, seed)?;
    let values: Vec<&str> = args
        .values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(CliError::config("--values is empty"));
    }
    let mut configs = Vec::with_capacity(values.len());
    for v in &values {
        let c = apply_overrides(&base, &[sweep_override(&args.param, v)?])?;
        c.validate()
            .map_err(|e| CliError::config(format!("{}={v}: {e}", args.param)))?;
        configs.push(c);
    }
    let mut combined = String::from(combined_header());
    for (v, c) in values.iter().zip(&configs) {
        let reps = replicate(c, s.runs)?;
        write_outputs(&s.out.join(format!("{}={}", args.param, v)), &reps)?;
        combined.push_str(&combined_rows(&args.param, v, &reps));
        println!("== {}={} ==", args.param, v);
        print!("{}", summary_table(&reps));
    }
    fs::write(s.out.join("combined.csv"), combined)
        .map_err(|e| CliError::io(format!("writing combined.csv: {e}")))
}

/// One `analysis.csv` row: (quantity, n, value, lower, upper).
pub type AnalysisRow = (String, String, f64, f64, f64);

pub fn analysis_rows(args: &AnalyzeArgs, seed: u64) -> Result<Vec<AnalysisRow>, CliError> {
    if !(0.0..=1.0).contains(&args.pr_check) {
        return Err(CliError::config(format!(
            "--pr-check must lie in [0, 1], got {}",
            args.pr_check
        )));
    }
    if args.alpha == 0 || args.neighbors == 0 {
        return Err(CliError::config(
            "--alpha and --neighbors must be at least 1",
        ));
    }
    if !(args.tau > 0.0 && args.gamma > 0.0) {
        return Err(CliError::config("--tau and --gamma must be positive"));
    }
    if args.trials == 0 {
        return Err(CliError::config("--trials must be at least 1"));
    }
    let params = DetectionParams {
        alpha: args.alpha,
        pr_check: args.pr_check,
        n_neighbors: args.neighbors,
        votes_needed: args.votes,
        n_messages: args.n_messages,
    };
    let nan = f64::NAN;
    let reveal = pr_reveal(&params);
    let mut rows = vec![
        (
            "pr_skip".to_string(),
            String::new(),
            pr_skip(args.pr_check, args.alpha),
            nan,
            nan,
        ),
        ("pr_reveal".to_string(), String::new(), reveal, nan, nan),
    ];
    for n in 1..=args.n_messages.max(1) {
        rows.push((
            "pr_reveal_after_n".into(),
            n.to_string(),
            pr_reveal_after_n(reveal, n),
            nan,
            nan,
        ));
    }
    rows.push((
        "baseline_saturation".into(),
        String::new(),
        baseline_saturation(args.tau, args.gamma),
        nan,
        nan,
    ));
    let mc = analytic::monte_carlo_reveal_seeded(&params, args.trials, seed);
    rows.push((
        "monte_carlo_reveal".into(),
        args.trials.to_string(),
        mc.estimate,
        mc.lower,
        mc.upper,
    ));
    Ok(rows)
}

pub fn cmd_analyze(args: &AnalyzeArgs, seed: u64) -> Result<(), CliError> {
    let rows = analysis_rows(args, seed)?;
    let mut csv = String::from("quantity,n,value,ci_lower,ci_upper\n");
    let mut table = String::new();
    let _ = writeln!(
        table,
        "alpha={} pr_check={} N={} v={} tau={}s gamma={}Hz",
        args.alpha, args.pr_check, args.neighbors, args.votes, args.tau, args.gamma
    );
    for (q, n, v, lo, hi) in &rows {
        let _ = writeln!(
            csv,
            "{q},{n},{},{},{}",
            fmt_float(*v),
            fmt_float(*lo),
            fmt_float(*hi)
        );
        let label = if n.is_empty() {
            q.clone()
        } else {
            format!("{q}[{n}]")
        };
        if lo.is_nan() {
            let _ = writeln!(table, "  {label:<28} {}", fmt_float(*v));
        } else {
            let _ = writeln!(
                table,
                "  {label:<28} {}  (95% CI {} .. {})",
                fmt_float(*v),
                fmt_float(*lo),
                fmt_float(*hi)
            );
        }
    }
    print!("{table}");
    fs::create_dir_all(&args.out)
        .and_then(|_| fs::write(args.out.join("analysis.csv"), csv))
        .map_err(|e| CliError::io(format!("writing analysis.csv: {e}")))
}

/// Human-readable per-run table with the mean row last.
pub fn summary_table(reps: &Replications) -> String {
    const SHOWN: [&str; 8] = [
        "received",
        "signature_accepted",
        "cooperatively_accepted",
        "cooperative_ratio",
        "median_waiting",
        "p90_waiting",
        "final_queue_len",
        "bogus_accepted",
    ];
    let idx: Vec<usize> = SHOWN
        .iter()
        .map(|c| {
            RunSummary::COLUMNS
                .iter()
                .position(|x| x == c)
                .expect("known column")
        })
        .collect();
    let cell = |x: f64| {
        if x.is_nan() {
            "-".to_string()
        } else if x.fract() == 0.0 {
            format!("{x:.0}")
        } else {
            format!("{x:.6}")
        }
    };
    let mut s = format!("{:>5}", "run");
    for c in SHOWN {
        let _ = write!(s, " {c:>w$}", w = c.len().max(10));
    }
    s.push('\n');
    let mut row = |label: String, vals: [f64; 20]| {
        let _ = write!(s, "{label:>5}");
        for (&i, c) in idx.iter().zip(SHOWN) {
            let _ = write!(s, " {:>w$}", cell(vals[i]), w = c.len().max(10));
        }
        s.push('\n');
    };
    for (run, sum) in reps.runs.iter().zip(reps.summaries()) {
        row(run.run_index.to_string(), sum.values());
    }
    row("mean".into(), reps.mean_summary());
    s
}
