//! Batch runs over catalog problems on a small worker pool.

use std::io;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::clock::StdClock;
use crate::record::{run, RunRecord, RunStatus, Settings, SolverKind};
use crate::source::load_named;

#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub problems: Vec<String>,
    pub solvers: Vec<SolverKind>,
    pub settings: Settings,
    /// Seed for generated problems.
    pub seed: u64,
    pub workers: usize,
}

fn run_job(problem: &str, solver: SolverKind, spec: &SuiteSpec) -> RunRecord {
    let loaded = match load_named(problem, spec.seed) {
        Ok(l) => l,
        Err(e) => {
            log::warn!("{problem}: {e}");
            return failed(problem, solver);
        }
    };
    let clock = StdClock::start();
    let out = catch_unwind(AssertUnwindSafe(|| {
        run(&loaded.problem, loaded.least_squares, solver, &spec.settings, &clock)
    }));
    match out {
        Ok(out) => out.record,
        Err(_) => {
            log::warn!("{problem} with {solver}: solver panicked");
            failed(problem, solver)
        }
    }
}

fn failed(problem: &str, solver: SolverKind) -> RunRecord {
    RunRecord {
        problem: problem.into(),
        solver,
        status: RunStatus::Error,
        f: f64::NAN,
        grad_lag: f64::NAN,
        cons_viol: f64::NAN,
        time: 0.0,
        iter: 0,
        n_obj: 0,
        n_grad: 0,
        n_cons: 0,
        n_jac: 0,
        n_hess: 0,
    }
}

/// One record per (problem, solver), ordered by problem then solver as given
/// in `spec`. Each job loads its own problem instance; failures are recorded
/// and never stop the suite.
pub fn run_suite(spec: &SuiteSpec) -> Vec<RunRecord> {
    let jobs: Vec<(&str, SolverKind)> = spec
        .problems
        .iter()
        .flat_map(|p| spec.solvers.iter().map(move |s| (p.as_str(), *s)))
        .collect();
    let results: Mutex<Vec<Option<RunRecord>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = spec.workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(problem, solver)) = jobs.get(k) else {
                    break;
                };
                let rec = run_job(problem, solver, spec);
                log::info!("{problem:>16} {solver:>9}  {}  {:.3}s", rec.status, rec.time);
                results.lock().expect("no worker panics while holding the lock")[k] = Some(rec);
            });
        }
    });
    results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

pub fn write_records<W: io::Write>(records: &[RunRecord], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: io::Read>(r: R) -> csv::Result<Vec<RunRecord>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn save_csv(records: &[RunRecord], path: &Path) -> csv::Result<()> {
    write_records(records, std::fs::File::create(path)?)
}

pub fn load_csv(path: &Path) -> csv::Result<Vec<RunRecord>> {
    read_records(std::fs::File::open(path)?)
}
