use ncl::record::run;
use ncl::suite::{read_records, write_records};
use ncl::{load_named, run_suite, RunRecord, RunStatus, Settings, SolverKind, StdClock, SuiteSpec};
use ncl_core::catalog;
use ncl_core::{ncl_solve, NclOptions, NoClock};

fn spec(problems: &[&str], solvers: &[SolverKind], workers: usize) -> SuiteSpec {
    SuiteSpec {
        problems: problems.iter().map(|s| s.to_string()).collect(),
        solvers: solvers.to_vec(),
        settings: Settings::default(),
        seed: 0,
        workers,
    }
}

#[test]
fn least_squares_suite_has_two_rows_per_problem() {
    let names = catalog::list(&["nls"]);
    let recs = run_suite(&spec(&names, &[SolverKind::IpDirect, SolverKind::NclNls], 3));
    assert_eq!(recs.len(), 2 * names.len());
    for (k, name) in names.iter().enumerate() {
        assert_eq!(recs[2 * k].problem, *name);
        assert_eq!(recs[2 * k].solver, SolverKind::IpDirect);
        assert_eq!(recs[2 * k + 1].solver, SolverKind::NclNls);
    }
    assert!(recs.iter().all(|r| r.status == RunStatus::FirstOrder));
}

#[test]
fn time_limit_is_recorded() {
    let mut s = spec(&["tax2d"], &[SolverKind::IpDirect, SolverKind::Ncl], 2);
    let limit = 0.02;
    s.settings = Settings::default().with_limits(500, limit);
    for r in run_suite(&s) {
        assert_eq!(r.status, RunStatus::MaxTime, "{}", r.solver);
        assert!(r.time >= limit);
    }
}

#[test]
fn counters_match_the_problem() {
    let l = load_named("hs71", 0).unwrap();
    let out = run(&l.problem, false, SolverKind::Ncl, &Settings::default(), &StdClock::start());
    let c = l.problem.counters().snapshot();
    let r = &out.record;
    assert_eq!((r.n_obj, r.n_grad, r.n_cons, r.n_jac, r.n_hess), (c.obj, c.grad, c.cons, c.jac, c.hess));
    // An independent solve of a fresh instance charges the same counts.
    let again = ncl_solve(&catalog::get("hs71").unwrap(), &NclOptions::default(), &NoClock).unwrap();
    assert_eq!(again.evals, c);
    assert_eq!(r.iter, again.inner_iterations as u64);
}

#[test]
fn failures_do_not_stop_the_suite() {
    // Least squares needs an equality system; hs71 has inequalities.
    let recs = run_suite(&spec(&["hs71", "no-such-problem", "qp2"], &[SolverKind::NclNls, SolverKind::Ncl], 2));
    assert_eq!(recs.len(), 6);
    assert_eq!(recs[0].status, RunStatus::Error);
    assert_eq!(recs[1].status, RunStatus::FirstOrder);
    assert_eq!(recs[2].status, RunStatus::Error);
    assert_eq!(recs[3].status, RunStatus::Error);
    assert_eq!(recs[5].status, RunStatus::FirstOrder);
}

fn without_time(mut r: Vec<RunRecord>) -> Vec<RunRecord> {
    r.iter_mut().for_each(|r| r.time = 0.0);
    r
}

#[test]
fn runs_are_reproducible_and_survive_csv() {
    let names = ["qp2", "hs6", "licq-ring", "tax1d"];
    let solvers = [SolverKind::IpDirect, SolverKind::Ncl];
    let a = run_suite(&spec(&names, &solvers, 4));
    let b = run_suite(&spec(&names, &solvers, 1));
    let mut csv_a = Vec::new();
    write_records(&without_time(a.clone()), &mut csv_a).unwrap();
    let mut csv_b = Vec::new();
    write_records(&without_time(b), &mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);

    let mut buf = Vec::new();
    write_records(&a, &mut buf).unwrap();
    let header = String::from_utf8_lossy(&buf).lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "problem,solver,status,f,grad_lag,cons_viol,time,iter,n_obj,n_grad,n_cons,n_jac,n_hess"
    );
    let back = read_records(buf.as_slice()).unwrap();
    assert_eq!(back.len(), a.len());
    for (x, y) in back.iter().zip(&a) {
        assert_eq!(x.problem, y.problem);
        assert_eq!(x.status, y.status);
        assert!(x.f == y.f || (x.f.is_nan() && y.f.is_nan()));
        assert_eq!(x.n_jac, y.n_jac);
    }
}
