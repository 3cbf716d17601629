//! `anecdote` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 I/O error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    closest_of_n_variance, commitment_scan, expert_compare, extreme_value_params,
    three_uniform_loss_table, three_uniform_unbiased_loss,
};
use crate::config::{load_config, ConfigError, ExperimentConfig};
use crate::equilibrium::{equilibrium_scan, scan_h, solve_equilibrium, EquilibriumResult};
use crate::error::Error;
use crate::estimate::estimate_anecdote_variance;
use crate::game::{GameConfig, TargetingScheme};
use crate::report::{emit_report, Cell, Format, RunReport};

#[derive(Debug, Parser)]
#[command(name = "anecdote", version, about = "Anecdote-selection game laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the equilibrium offset for one game.
    Solve(CommonArgs),
    /// Estimate H(r) on the configured r grid.
    ScanH(CommonArgs),
    /// Solve one equilibrium per misalignment on the delta grid.
    ScanDelta(CommonArgs),
    /// Sent-anecdote variance of targeting(r) on the r grid.
    CommitScan(CommonArgs),
    /// Compare an aligned sender with a misaligned expert.
    ExpertCompare(ExpertArgs),
    /// Closed-form three-uniform losses on an r grid.
    ReproduceAppendixB(CommonArgs),
    /// Gumbel constants and closest/minimum anecdote variances.
    ExtremeValues(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    r_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r_max: Option<f64>,
    #[arg(long)]
    r_step: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    format: Option<String>,
    /// Record wall-clock time in the report (breaks byte reproducibility).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExpertScheme {
    Equilibrium,
    Minimum,
    Maximum,
}

#[derive(Debug, Args)]
struct ExpertArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Anecdotes available to the aligned sender.
    #[arg(long, default_value_t = 1)]
    aligned_n: usize,
    #[arg(long, value_enum, default_value_t = ExpertScheme::Equilibrium)]
    expert_scheme: ExpertScheme,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(format!("config error: {e}"))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(m) => CliError::Config(format!("config error: {m}")),
            other => CliError::Solver(format!("solver error: {other}")),
        }
    }
}

struct Outcome {
    report: RunReport,
    /// Reported after the report is written (partial scans).
    deferred: Option<CliError>,
}

impl From<RunReport> for Outcome {
    fn from(report: RunReport) -> Self {
        Outcome {
            report,
            deferred: None,
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.message());
            e.exit_code()
        }
    }
}

fn effective_config(args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => load_config(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))??,
        None => ExperimentConfig::default(),
    };
    for item in &args.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{item}' is not KEY=VALUE")))?;
        config.set(k.trim(), v.trim())?;
    }
    let typed = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("replicates", args.replicates.map(|v| v.to_string())),
        ("r_min", args.r_min.map(|v| v.to_string())),
        ("r_max", args.r_max.map(|v| v.to_string())),
        ("r_step", args.r_step.map(|v| v.to_string())),
        ("output", args.output.clone()),
        ("format", args.format.clone()),
    ];
    for (key, value) in typed {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
    }
    Ok(config)
}

fn run(command: Command) -> Result<(), CliError> {
    let started = Instant::now();
    let (args, outcome) = match &command {
        Command::Solve(a) => (a, solve(&effective_config(a)?)?),
        Command::ScanH(a) => (a, scan_h_cmd(&effective_config(a)?)?),
        Command::ScanDelta(a) => (a, scan_delta(&effective_config(a)?)?),
        Command::CommitScan(a) => (a, commit_scan(&effective_config(a)?)?),
        Command::ExpertCompare(e) => (&e.common, expert(&effective_config(&e.common)?, e)?),
        Command::ReproduceAppendixB(a) => (a, appendix_b(&mut effective_config(a)?)?),
        Command::ExtremeValues(a) => (a, extreme_values(&effective_config(a)?)?),
    };
    let config = effective_config(args)?;
    let Outcome { mut report, deferred } = outcome;
    report.config = config_echo(&config, &report);
    if args.timing {
        report.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
    }
    let format = config.format.unwrap_or(Format::Csv);
    let path = config.output.as_deref().filter(|p| *p != "-").map(PathBuf::from);
    emit_report(&report, format, path.as_deref())
        .map_err(|e| CliError::Io(format!("cannot write report: {e}")))?;
    if let Some(s) = report.summary.get("preferred") {
        eprintln!("preferred: {s:?}");
    }
    match deferred {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn config_echo(
    config: &ExperimentConfig,
    report: &RunReport,
) -> std::collections::BTreeMap<String, String> {
    let mut echo: std::collections::BTreeMap<String, String> =
        config.entries().into_iter().collect();
    // grid defaults applied by reproduce-appendix-b are part of what ran
    for (k, v) in &report.config {
        echo.entry(k.clone()).or_insert_with(|| v.clone());
    }
    echo
}

const EQUILIBRIUM_COLUMNS: [&str; 17] = [
    "delta",
    "offset_r",
    "bias_delta",
    "bias_std_error",
    "receiver_shift",
    "residual",
    "residual_std_error",
    "receiver_loss",
    "receiver_loss_std_error",
    "sender_total",
    "sender_total_std_error",
    "info_loss",
    "info_loss_std_error",
    "persuasion_term",
    "persuasion_term_std_error",
    "iterations",
    "replicates",
];

fn equilibrium_row(res: &EquilibriumResult, replicates: usize) -> Vec<Cell> {
    let s = &res.sender_loss;
    vec![
        res.delta.into(),
        res.offset_r.into(),
        res.bias_delta.into(),
        res.bias_std_error.into(),
        res.receiver_shift.into(),
        res.residual.into(),
        res.residual_std_error.into(),
        res.receiver_loss.value.into(),
        res.receiver_loss.std_error.into(),
        s.total.value.into(),
        s.total.std_error.into(),
        s.info_loss.value.into(),
        s.info_loss.std_error.into(),
        s.persuasion_term.value.into(),
        s.persuasion_term.std_error.into(),
        res.iterations.into(),
        replicates.into(),
    ]
}

fn solve(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let game = config.game()?;
    let params = config.solver()?;
    let res = solve_equilibrium(&game, &params)?;
    let mut report = RunReport::new("solve", &EQUILIBRIUM_COLUMNS);
    report.seed = Some(params.mc.seed);
    report.push_row(equilibrium_row(&res, params.mc.replicates));
    Ok(report.into())
}

fn scan_h_cmd(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let game = config.game()?;
    let grid = config.r_grid()?;
    let mc = config.mc()?;
    let curve = scan_h(&game, &grid, &mc)?;
    let mut report = RunReport::new("scan-h", &["r", "h_estimate", "std_error", "replicates"]);
    report.seed = Some(mc.seed);
    for (r, h) in &curve.points {
        report.push_row(vec![(*r).into(), h.value.into(), h.std_error.into(), h.replicates.into()]);
    }
    Ok(report.into())
}

fn scan_delta(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let game = config.game()?;
    let grid = config.delta_grid()?;
    let params = config.solver()?;
    let mut report = RunReport::new("scan-delta", &EQUILIBRIUM_COLUMNS);
    report.seed = Some(params.mc.seed);
    let mut failures = Vec::new();
    for (delta, res) in equilibrium_scan(&game, &grid, &params) {
        match res {
            Ok(res) => report.push_row(equilibrium_row(&res, params.mc.replicates)),
            Err(e) => failures.push(format!("delta = {delta}: {e}")),
        }
    }
    let deferred = (!failures.is_empty())
        .then(|| CliError::Solver(format!("solver error: {}", failures.join("; "))));
    Ok(Outcome { report, deferred })
}

fn commit_scan(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let game = config.game()?;
    let grid = config.r_grid()?;
    let mc = config.mc()?;
    let res = commitment_scan(&game, &grid, &mc)?;
    let mut report = RunReport::new("commit-scan", &["r", "variance", "std_error", "replicates"]);
    report.seed = Some(mc.seed);
    for (r, v) in res.grid.iter().zip(&res.variance_at) {
        report.push_row(vec![(*r).into(), v.value.into(), v.std_error.into(), v.replicates.into()]);
    }
    report.summary.insert("argmin_offset".into(), res.argmin_offset.into());
    report.summary.insert("min_variance".into(), res.min_variance.value.into());
    report
        .summary
        .insert("min_variance_std_error".into(), res.min_variance.std_error.into());
    Ok(report.into())
}

fn expert(config: &ExperimentConfig, args: &ExpertArgs) -> Result<Outcome, CliError> {
    let expert_game = config.game()?;
    let aligned = GameConfig::new(
        args.aligned_n,
        expert_game.m_receiver,
        expert_game.m_receiver,
        expert_game.noise,
        expert_game.mode,
    )?;
    let mc = config.mc()?;
    let scheme = match args.expert_scheme {
        ExpertScheme::Minimum => TargetingScheme::Minimum,
        ExpertScheme::Maximum => TargetingScheme::Maximum,
        ExpertScheme::Equilibrium => {
            let res = solve_equilibrium(&expert_game, &config.solver()?)?;
            TargetingScheme::targeting(res.offset_r)
        }
    };
    let cmp = expert_compare(&aligned, &expert_game, &mc, &scheme)?;
    let mut report = RunReport::new("expert-compare", &["sender", "n", "loss", "std_error", "replicates"]);
    report.seed = Some(mc.seed);
    for (name, n, loss) in [
        ("aligned", aligned.n, cmp.loss_aligned),
        ("expert", expert_game.n, cmp.loss_expert),
    ] {
        report.push_row(vec![
            name.into(),
            n.into(),
            loss.value.into(),
            loss.std_error.into(),
            loss.replicates.into(),
        ]);
    }
    report.summary.insert("preferred".into(), cmp.preferred.name().into());
    let scheme_desc = match scheme {
        TargetingScheme::Targeting { offset } => format!("targeting({offset})"),
        TargetingScheme::Minimum => "minimum".into(),
        TargetingScheme::Maximum => "maximum".into(),
    };
    report.summary.insert("expert_scheme".into(), Cell::Text(scheme_desc));
    Ok(report.into())
}

fn appendix_b(config: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let mut report = RunReport::new("reproduce-appendix-b", &["r", "loss", "std_error"]);
    for (key, default) in [("r_min", "0"), ("r_max", "0.5"), ("r_step", "0.05")] {
        if config.get(key).is_none() {
            config.set(key, default)?;
            report.config.insert(key.into(), default.into());
        }
    }
    let grid = config.r_grid()?;
    let rows = three_uniform_loss_table(&grid)?;
    for (r, loss) in &rows {
        report.push_row(vec![(*r).into(), (*loss).into(), 0.0.into()]);
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .copied()
        .unwrap_or((0.0, f64::NAN));
    report
        .summary
        .insert("unbiased_loss".into(), three_uniform_unbiased_loss().into());
    report.summary.insert("argmin_offset".into(), best.0.into());
    report.summary.insert("min_loss".into(), best.1.into());
    Ok(report.into())
}

fn extreme_values(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let game = config.game()?;
    let stats = extreme_value_params(&game.noise, game.n)?;
    let mc = config.mc()?;
    let closest = closest_of_n_variance(&game.noise, game.n, &mc.substream(1))?;
    let minimum = estimate_anecdote_variance(&TargetingScheme::Minimum, &game, &mc.substream(2))?;
    let mut report = RunReport::new(
        "extreme-values",
        &[
            "n",
            "a_n",
            "b_n",
            "gumbel_mean",
            "gumbel_variance",
            "closest_variance",
            "closest_std_error",
            "min_variance",
            "min_std_error",
            "replicates",
        ],
    );
    report.seed = Some(mc.seed);
    report.push_row(vec![
        game.n.into(),
        stats.a_n.into(),
        stats.b_n.into(),
        stats.gumbel_mean.into(),
        stats.gumbel_variance.into(),
        closest.value.into(),
        closest.std_error.into(),
        minimum.value.into(),
        minimum.std_error.into(),
        mc.replicates.into(),
    ]);
    Ok(report.into())
}
