//! Command definitions of the `ncl` binary.
//!
//! Exit codes: 0 when the solve ends first-order, 2 for bad input (unknown
//! problem, syntax errors, empty suites), 3 when the solver stops for any
//! other reason, 1 for I/O failures.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ncl_core::catalog;
use ncl_core::driver::OuterLogRow;
use ncl_core::ip::IterationRow;
use ncl_core::sci::sci;
use ncl_core::tax::TaxConfig;

use crate::clock::StdClock;
use crate::manifest::TaxManifest;
use crate::plot::emit_profile_plot;
use crate::profile::{performance_profile, read_curves, Metric};
use crate::record::{run, RunRecord, Settings, SolverKind};
use crate::source::{load_model, load_named};
use crate::suite::{load_csv, run_suite, save_csv, SuiteSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Input the user got wrong; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "ncl", version, about = "Constrained optimization with Algorithm NCL")]
pub struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem.
    Solve(SolveArgs),
    /// Run solvers over a set of catalog problems and write a CSV table.
    Suite(SuiteArgs),
    /// Performance profiles from suite results.
    Profile(ProfileArgs),
    /// Dimensions of a tax model, optionally written as a manifest.
    Tax(TaxArgs),
    /// List catalog problems.
    List(ListArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Limits {
    /// Interior-point iterations per subproblem.
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Seconds per solve.
    #[arg(long, default_value_t = 1800.0)]
    pub max_time: f64,
    #[arg(long, default_value_t = 20)]
    pub max_outer: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Catalog problem name.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub problem: Option<String>,
    /// Model file, or a tax manifest (`.toml`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// ip, ncl or ncl-nls.
    #[arg(long, default_value = "ncl")]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 1e-6)]
    pub eta_star: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub omega_star: f64,
    #[arg(long, default_value_t = 100.0)]
    pub rho0: f64,
    #[command(flatten)]
    pub limits: Limits,
    /// Write the run record as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Print only the summary line.
    #[arg(long, short)]
    pub quiet: bool,
    /// Seed for generated problems.
    #[arg(long, env = "NCL_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Problems carrying all of these tags.
    #[arg(long = "tag")]
    pub tags: Vec<String>,
    /// Explicit problem names (instead of tags).
    #[arg(long = "problem", conflicts_with = "tags")]
    pub problems: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "ip-direct,ncl")]
    pub solvers: Vec<SolverKind>,
    #[arg(long, default_value = "results.csv")]
    pub out: PathBuf,
    /// Worker threads; one per core by default.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub limits: Limits,
    #[arg(long, env = "NCL_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Result tables written by `ncl suite`.
    #[arg(long = "input", required_unless_present = "curves")]
    pub inputs: Vec<PathBuf>,
    /// Re-render curves from a curve CSV instead.
    #[arg(long, conflicts_with = "inputs")]
    pub curves: Option<PathBuf>,
    /// time, cons or jac.
    #[arg(long, default_value = "cons")]
    pub metric: Metric,
    /// SVG output; the curve CSV goes next to it.
    #[arg(long, default_value = "profile.svg")]
    pub out: PathBuf,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Args)]
pub struct TaxArgs {
    #[arg(long)]
    pub na: usize,
    #[arg(long)]
    pub nb: usize,
    #[arg(long)]
    pub nc: usize,
    #[arg(long)]
    pub nd: usize,
    #[arg(long)]
    pub ne: usize,
    #[arg(long, env = "NCL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write a manifest that regenerates the problem.
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    #[arg(long = "tag")]
    pub tags: Vec<String>,
}

impl Limits {
    fn settings(&self) -> Settings {
        let mut s = Settings::default().with_limits(self.max_iter, self.max_time);
        s.ncl.max_outer = self.max_outer;
        s
    }
}

pub fn execute(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Suite(a) => suite(a),
        Command::Profile(a) => profile(a),
        Command::Tax(a) => tax(a),
        Command::List(a) => list(a),
    }
}

/// Exit status for an error returned by [`execute`].
pub fn error_code(e: &anyhow::Error) -> i32 {
    let input = e.chain().any(|c| {
        c.is::<crate::source::LoadError>() || c.is::<UsageError>() || c.is::<crate::profile::ProfileError>()
    });
    if input {
        EXIT_INPUT
    } else {
        EXIT_IO
    }
}

fn solve(a: SolveArgs) -> anyhow::Result<i32> {
    let loaded = match (&a.problem, &a.model) {
        (Some(name), _) => load_named(name, a.seed)?,
        (None, Some(path)) => load_model(path)?,
        (None, None) => return Err(UsageError("give --problem or --model".into()).into()),
    };
    let p = &loaded.problem;
    let mut settings = a.limits.settings();
    settings.ncl.eta_star = a.eta_star;
    settings.ncl.omega_star = a.omega_star;
    settings.ncl.rho0 = a.rho0;
    let clock = StdClock::start();
    let out = run(p, loaded.least_squares, a.solver, &settings, &clock);
    let r = &out.record;
    if !a.quiet {
        println!("{}: n = {}, m = {}, solver {}", p.name(), p.n(), p.m(), a.solver);
        if !out.outer_log.is_empty() {
            println!("{}", OuterLogRow::HEADER);
            for row in &out.outer_log {
                println!("{row}");
            }
        } else if !out.inner_log.is_empty() {
            println!("{}", IterationRow::HEADER);
            for row in &out.inner_log {
                println!("{row}");
            }
        }
        println!();
        println!("f         {}", sci(r.f, 10));
        println!("‖∇L‖₂     {}", sci(r.grad_lag, 2));
        println!("‖c‖₂      {}", sci(r.cons_viol, 2));
        if let Some(last) = out.outer_log.last() {
            println!("‖r‖∞      {}", sci(last.r_norm, 2));
            println!("outer     {}", out.outer_log.len());
        }
        println!("inner     {}", r.iter);
        println!(
            "evals     f {}  ∇f {}  c {}  ∇c {}  ∇²L {}",
            r.n_obj, r.n_grad, r.n_cons, r.n_jac, r.n_hess
        );
        println!("time      {:.3} s", r.time);
    }
    println!("status    {}", r.status);
    if let Some(path) = &a.json {
        let text = serde_json::to_string_pretty(r)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if r.status.solved() { EXIT_OK } else { EXIT_SOLVER })
}

fn suite(a: SuiteArgs) -> anyhow::Result<i32> {
    let problems: Vec<String> = if a.problems.is_empty() {
        let tags: Vec<&str> = a.tags.iter().map(String::as_str).collect();
        catalog::list(&tags).into_iter().map(String::from).collect()
    } else {
        for p in &a.problems {
            catalog::entry(p).map_err(|e| UsageError(e.to_string()))?;
        }
        a.problems.clone()
    };
    if problems.is_empty() {
        return Err(UsageError("no problems selected".into()).into());
    }
    if a.solvers.is_empty() {
        return Err(UsageError("no solvers selected".into()).into());
    }
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let spec = SuiteSpec {
        problems,
        solvers: a.solvers.clone(),
        settings: a.limits.settings(),
        seed: a.seed,
        workers,
    };
    let records = run_suite(&spec);
    save_csv(&records, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    print_table(&records);
    println!("wrote {} rows to {}", records.len(), a.out.display());
    Ok(EXIT_OK)
}

fn print_table(records: &[RunRecord]) {
    println!(
        "{:<18} {:<9} {:<26} {:>14} {:>9} {:>9} {:>6} {:>6} {:>9}",
        "problem", "solver", "status", "f", "‖∇L‖₂", "‖c‖₂", "iter", "#c", "time"
    );
    for r in records {
        println!(
            "{:<18} {:<9} {:<26} {:>14} {:>9} {:>9} {:>6} {:>6} {:>9.3}",
            r.problem,
            r.solver.as_str(),
            r.status.as_str(),
            sci(r.f, 6),
            sci(r.grad_lag, 1),
            sci(r.cons_viol, 1),
            r.iter,
            r.n_cons,
            r.time
        );
    }
}

fn profile(a: ProfileArgs) -> anyhow::Result<i32> {
    let curves = match &a.curves {
        Some(path) => {
            let f = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
            read_curves(f)?
        }
        None => {
            let mut records = Vec::new();
            for path in &a.inputs {
                records.extend(load_csv(path).with_context(|| format!("reading {}", path.display()))?);
            }
            performance_profile(&records, a.metric)?
        }
    };
    let title = a
        .title
        .clone()
        .unwrap_or_else(|| format!("performance profile ({})", a.metric));
    let csv = emit_profile_plot(&curves, &a.out, &title).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{:<10} {:>8} {:>8}", "solver", "best", "solved");
    for c in &curves {
        println!("{:<10} {:>8.3} {:>8.3}", c.solver, c.best(), c.solved());
    }
    println!("wrote {} and {}", a.out.display(), csv.display());
    Ok(EXIT_OK)
}

fn tax(a: TaxArgs) -> anyhow::Result<i32> {
    let mut cfg = TaxConfig::new(a.na, a.nb, a.nc, a.nd, a.ne);
    cfg.seed = a.seed;
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let d = cfg.dims();
    println!("T = {}, n = {}, m_ic = {}, m = {}", d.t, d.n, d.m_ic, d.m);
    if let Some(path) = &a.emit {
        TaxManifest::new(cfg)
            .write(path)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

fn list(a: ListArgs) -> anyhow::Result<i32> {
    let tags: Vec<&str> = a.tags.iter().map(String::as_str).collect();
    for name in catalog::list(&tags) {
        let e = catalog::entry(name)?;
        let p = e.build();
        println!(
            "{:<16} n = {:<4} m = {:<5} {:<40} {}",
            name,
            p.n(),
            p.m(),
            e.tags.join(","),
            e.description
        );
    }
    Ok(EXIT_OK)
}
