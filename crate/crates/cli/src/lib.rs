//! The `markmle` command line: fits, limits, consistency checks, repaired
//! fits and simulation studies, all through flat CSV files.
//!
//! Exit codes: 0 ok, 1 I/O, 2 parse or usage, 3 invariant, 4 numeric.

pub mod io;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use markmle::consistency::{check_consistency, ConsistencyError};
use markmle::limits::examples::{example_info, model_by_name};
use markmle::limits::{equidistant_grid, EvaluationWindow, LimitEngine, LimitError, PopulationModel};
use markmle::repaired::{discretize_marks, fit_cr_mle, EmConfig, MarkGrid};
use markmle::simulate::{run_replications, run_study, ExampleSpec, SimError, StudyConfig};
use markmle::{fit, order_dataset, Bound, QuadratureConfig, Region};
use thiserror::Error;

use io::{fmt_f64, fmt_opt, read_observations, write_observations, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("row {row}: {message}")]
    Invariant { row: usize, message: String },
    #[error("invariant violated: {0}")]
    Model(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Invariant { .. } | CliError::Model(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<LimitError> for CliError {
    fn from(e: LimitError) -> Self {
        match e {
            LimitError::InvalidModel(m) => CliError::Usage(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<ConsistencyError> for CliError {
    fn from(e: ConsistencyError) -> Self {
        match e {
            ConsistencyError::Limit(l) => l.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Limit(l) => l.into(),
            SimError::UnknownExample(_) | SimError::GridOutsideWindow(_) => CliError::Usage(e.to_string()),
            other => CliError::Model(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "markmle",
    version,
    about = "MLE for interval censored data with continuous marks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the product-limit MLE to an observation file.
    Fit(FitArgs),
    /// Tabulate the almost-sure limit of the MLE for a hard-coded model.
    Limit(LimitArgs),
    /// Compare limiting and true hazards.
    Check(CheckArgs),
    /// Fit the repaired (mark-discretized) MLE.
    Repair(RepairArgs),
    /// Simulate one of the four examples and tabulate the study curves.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundArg {
    Lower,
    Upper,
}

impl From<BoundArg> for Bound {
    fn from(b: BoundArg) -> Self {
        match b {
            BoundArg::Lower => Bound::Lower,
            BoundArg::Upper => Bound::Upper,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "lower")]
    pub bound: BoundArg,
    /// Masses CSV `d,r,z,mass`.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the marginal step function `x,value` here.
    #[arg(long)]
    pub marginal: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Simulation example 1 to 4.
    #[arg(long, conflicts_with = "model")]
    pub example: Option<u8>,
    /// `example1`..`example4`, `orderstat:K:THETA` or `uncensored`.
    #[arg(long)]
    pub model: Option<String>,
    /// Window end; defaults to the model's own.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Largest mark on the y grid; defaults to the example's.
    #[arg(long)]
    pub y_max: Option<f64>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<(PopulationModel, f64, f64), CliError> {
        let name = match (&self.example, &self.model) {
            (Some(id), _) => format!("example{id}"),
            (None, Some(m)) => m.clone(),
            (None, None) => return Err(CliError::Usage("pass --example or --model".into())),
        };
        let (model, tau) = model_by_name(&name)?;
        let default_y = self
            .example
            .or_else(|| name.strip_prefix("example").and_then(|s| s.parse().ok()))
            .and_then(example_info)
            .map_or(4.0, |i| i.y_max);
        Ok((model, self.tau.unwrap_or(tau), self.y_max.unwrap_or(default_y)))
    }
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.02)]
    pub grid_step: f64,
    /// Directory receiving `surface.csv` and `marginal.csv`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.05)]
    pub grid_step: f64,
    /// Step of the mark grid used for the joint hazard.
    #[arg(long, default_value_t = 0.5)]
    pub y_step: f64,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub grid_k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub grid_min: f64,
    #[arg(long)]
    pub grid_max: f64,
    #[arg(long, value_enum, default_value = "lower")]
    pub bound: BoundArg,
    /// Step functions CSV `risk,x,value`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub example: u8,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also fit the repaired MLE on a K-point mark grid.
    #[arg(long)]
    pub repaired: bool,
    #[arg(long, default_value_t = 20)]
    pub grid_k: usize,
    #[arg(long, default_value_t = 0.02)]
    pub grid_step: f64,
    /// Extra replications, summarized in `summary.csv`.
    #[arg(long, default_value_t = 1)]
    pub replications: u64,
}

/// Caps rayon's pool at `MARKMLE_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("MARKMLE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MARKMLE_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Limit(a) => cmd_limit(&a),
        Command::Check(a) => cmd_check(&a),
        Command::Repair(a) => cmd_repair(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    }
}

fn positive_step(step: f64, name: &str) -> Result<f64, CliError> {
    if step.is_finite() && step > 0.0 {
        Ok(step)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {step}")))
    }
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let data = read_observations(&a.input)?;
    let ordered = order_dataset(&data).map_err(|e| CliError::Model(e.to_string()))?;
    let masses = fit(&ordered).map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut t = Table::create(&a.output, &["d", "r", "z", "mass"])?;
    for (mi, p) in masses.masses() {
        if let Region::Segment { d, r, mark } = mi.region {
            t.row([fmt_f64(d), fmt_f64(r), fmt_f64(mark), fmt_f64(*p)])?;
        }
    }
    if masses.has_halfplane() {
        t.row([
            fmt_f64(masses.u_last()),
            "inf".into(),
            String::new(),
            fmt_f64(masses.censored_tail()),
        ])?;
    }
    t.finish()?;
    if let Some(path) = &a.marginal {
        let mut t = Table::create(path, &["x", "value"])?;
        for (x, v) in masses.marginal_steps(a.bound.into()) {
            t.row([fmt_f64(x), fmt_f64(v)])?;
        }
        t.finish()?;
    }
    Ok(())
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_limit(a: &LimitArgs) -> Result<(), CliError> {
    let step = positive_step(a.grid_step, "--grid-step")?;
    let (model, tau, y_max) = a.model.resolve()?;
    let cfg = QuadratureConfig::default();
    let window = EvaluationWindow::with_step(&model, tau, step, &cfg)?;
    let engine = LimitEngine::new(&model, &window, &cfg)?;
    let xs = window.grid().to_vec();
    let ys = equidistant_grid(0.0, y_max, step);
    let marginal = engine.marginal(&xs)?;
    let surface = engine.surface(&xs, &ys)?;

    create_dir(&a.output)?;
    let mut t = Table::create(&a.output.join("marginal.csv"), &["x", "value"])?;
    for (x, v) in xs.iter().zip(&marginal) {
        t.row([fmt_f64(*x), fmt_f64(*v)])?;
    }
    t.finish()?;
    let mut t = Table::create(&a.output.join("surface.csv"), &["x", "y", "value"])?;
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            t.row([fmt_f64(*x), fmt_f64(*y), fmt_f64(surface[i][j])])?;
        }
    }
    t.finish()
}

pub fn cmd_check(a: &CheckArgs) -> Result<(), CliError> {
    let step = positive_step(a.grid_step, "--grid-step")?;
    let y_step = positive_step(a.y_step, "--y-step")?;
    let (model, tau, y_max) = a.model.resolve()?;
    let cfg = QuadratureConfig::default();
    let window = EvaluationWindow::with_step(&model, tau, step, &cfg)?;
    let ys = equidistant_grid(y_step, y_max, y_step);
    let report = check_consistency(&model, &window, &ys, &cfg)?;
    let mut out = std::io::stdout().lock();
    match write!(out, "{report}").and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
        _ => Ok(()),
    }
}

pub fn cmd_repair(a: &RepairArgs) -> Result<(), CliError> {
    let grid = MarkGrid::equidistant(a.grid_min, a.grid_max, a.grid_k).map_err(|e| CliError::Usage(e.to_string()))?;
    let data = read_observations(&a.input)?;
    let est = fit_cr_mle(&discretize_marks(&data, &grid), &EmConfig::default())
        .map_err(|e| CliError::Model(e.to_string()))?;
    let c = &est.convergence;
    eprintln!(
        "repair: {} iterations, log-likelihood {}, converged {}{}",
        c.iterations,
        c.log_likelihood,
        c.converged,
        if est.no_observed_events {
            ", no observed events"
        } else {
            ""
        }
    );
    let mut t = Table::create(&a.output, &["risk", "x", "value"])?;
    for risk in 1..=grid.n_risks() {
        let steps = est.steps(risk, a.bound.into());
        if steps.is_empty() {
            // keep every risk class visible
            t.row([risk.to_string(), "0".into(), "0".into()])?;
        }
        for (x, v) in steps {
            t.row([risk.to_string(), fmt_f64(x), fmt_f64(v)])?;
        }
    }
    t.finish()
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let step = positive_step(a.grid_step, "--grid-step")?;
    let spec = ExampleSpec::new(a.example, a.n, a.seed)?;
    let mut cfg = StudyConfig::new(spec);
    let info = spec.info();
    cfg.x_grid = equidistant_grid(0.0, info.tau, step);
    cfg.y_grid = equidistant_grid(0.0, info.y_max, step);
    cfg.include.repaired = a.repaired;
    cfg.mark_grid_k = a.grid_k;
    let result = run_study(&cfg)?;
    let mut summaries = vec![result.summary];
    if a.replications > 1 {
        summaries = run_replications(&cfg, a.replications)?;
    }

    let dir = &a.out_dir;
    create_dir(dir)?;
    write_observations(&dir.join("dataset.csv"), &result.dataset)?;
    let mut t = Table::create(
        &dir.join("marginal.csv"),
        &["x", "mle_lower", "mle_upper", "limit_lower", "truth"],
    )?;
    for r in &result.marginal {
        t.row([
            fmt_f64(r.x),
            fmt_opt(r.mle_lower),
            fmt_opt(r.mle_upper),
            fmt_opt(r.limit_lower),
            fmt_opt(r.truth),
        ])?;
    }
    t.finish()?;
    let mut t = Table::create(
        &dir.join("surface.csv"),
        &["x", "y", "mle_lower", "mle_upper", "limit_lower", "truth"],
    )?;
    for r in &result.surface {
        t.row([
            fmt_f64(r.x),
            fmt_f64(r.y),
            fmt_opt(r.mle_lower),
            fmt_opt(r.mle_upper),
            fmt_opt(r.limit_lower),
            fmt_opt(r.truth),
        ])?;
    }
    t.finish()?;
    if a.repaired {
        let mut t = Table::create(
            &dir.join("repaired.csv"),
            &["x", "risk", "y", "lower", "upper", "truth"],
        )?;
        for r in &result.repaired_rows {
            t.row([
                fmt_f64(r.x),
                r.risk.to_string(),
                fmt_f64(r.y),
                fmt_f64(r.lower),
                fmt_f64(r.upper),
                fmt_f64(r.truth),
            ])?;
        }
        t.finish()?;
    }
    let mut t = Table::create(
        &dir.join("summary.csv"),
        &[
            "example",
            "n",
            "seed",
            "replication",
            "events",
            "sup_gap_limit",
            "sup_gap_truth",
            "sup_gap_repaired",
        ],
    )?;
    for s in &summaries {
        t.row([
            s.example.to_string(),
            s.n.to_string(),
            s.seed.to_string(),
            s.replication.to_string(),
            s.events.to_string(),
            fmt_opt(s.sup_gap_limit),
            fmt_opt(s.sup_gap_truth),
            fmt_opt(s.sup_gap_repaired),
        ])?;
    }
    t.finish()
}
