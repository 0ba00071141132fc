//! Acceptance checks. Runs as a plain binary and prints one line per
//! criterion; exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{check_derivatives, compare_with_full, normal_equations, random_kkt, to_na};
use nalgebra::DVector;
use ncl::{performance_profile, Metric, ProfileError, RunRecord, RunStatus, SolverKind};
use ncl_core::catalog;
use ncl_core::driver::{OuterLogRow, OuterState};
use ncl_core::ip::{solve_problem, solve_subproblem, IpOptions, IpStart, KktMethod, SubStatus};
use ncl_core::linalg::norm_inf;
use ncl_core::model::to_slack_form;
use ncl_core::nls::ncl_nls_solve;
use ncl_core::tax::{build_tax_problem, dims, TaxConfig};
use ncl_core::{ncl_solve, Nlp, NclOptions, NclProblem, NclStatus, NoClock, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn structural_dimensions() -> Check {
    let d = dims([5, 3, 3, 2, 2]);
    ensure((d.t, d.n, d.m_ic) == (180, 360, 32220), || format!("got {d:?}"))?;
    let big = build_tax_problem(&TaxConfig::new(5, 3, 3, 2, 2)).map_err(|e| e.to_string())?;
    ensure((big.n(), big.m()) == (360, 32221), || format!("built {}×{}", big.n(), big.m()))?;
    let small = build_tax_problem(&TaxConfig::tax1d()).map_err(|e| e.to_string())?;
    ensure((small.n(), small.m()) == (24, 133), || format!("tax1d {}×{}", small.n(), small.m()))?;
    let mid = build_tax_problem(&TaxConfig::tax2d()).map_err(|e| e.to_string())?;
    ensure((mid.n(), mid.m()) == (120, 3541), || format!("tax2d {}×{}", mid.n(), mid.m()))?;
    Ok("T=180 n=360 m_ic=32220; tax1d 24×133; tax2d 120×3541".into())
}

fn kkt_structure() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let rhos = [1.0, 1e3, 1e8];
    let mut worst = 0.0f64;
    let mut deficient = 0;
    for k in 0..50u64 {
        let n = rng.random_range(1..=20);
        let m = rng.random_range(1..=12);
        let rho = rhos[k as usize % 3];
        let def = k % 2 == 1;
        deficient += def as usize;
        let mut sys = random_kkt(1000 + k, n, m, rho, def, KktMethod::Reduced);
        let (err, _) =
            compare_with_full(&mut sys).map_err(|e| format!("instance {k} (n={n}, m={m}, ρ={rho:e}): {e}"))?;
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("instance {k}: relative error {err:e}"))?;
    }
    Ok(format!("50 instances ({deficient} rank-deficient), worst relative error {worst:.1e}"))
}

/// Decade values `10^j` as written in decimal.
fn is_decade(v: f64) -> bool {
    (-12..=3).any(|j| format!("1e{j}").parse::<f64>() == Ok(v))
}

fn check_schedule(name: &str, log: &[OuterLogRow], opts: &NclOptions) -> Result<(), String> {
    let staircase = [0.1, 1e-4, 1e-4, 1e-5, 1e-5, 1e-6, 1e-6, 1e-7, 1e-7, 1e-8];
    let ladder = |prev: f64, next: f64, floor: f64| {
        let tenth = prev / 10.0;
        next == tenth || (next == floor && tenth <= floor * (1.0 + 1e-12))
    };
    for (i, row) in log.iter().enumerate() {
        let mu = staircase.get(row.outer - 1).copied().unwrap_or(1e-8);
        ensure(row.mu_init == mu, || format!("{name} k={}: μ-init {:e}, want {mu:e}", row.outer, row.mu_init))?;
        ensure(is_decade(row.eta) && is_decade(row.omega), || {
            format!("{name} k={}: η={:e} ω={:e} off the decade ladder", row.outer, row.eta, row.omega)
        })?;
        ensure(row.eta >= opts.eta_star && row.omega >= opts.omega_star, || {
            format!("{name} k={}: below the floor", row.outer)
        })?;
        let Some(next) = log.get(i + 1) else { continue };
        if row.r_norm <= row.eta {
            ensure(
                ladder(row.eta, next.eta, opts.eta_star) && ladder(row.omega, next.omega, opts.omega_star),
                || format!("{name} k={}: η {:e}→{:e}, ω {:e}→{:e}", row.outer, row.eta, next.eta, row.omega, next.omega),
            )?;
            ensure(next.rho == row.rho, || format!("{name} k={}: ρ changed on success", row.outer))?;
        } else {
            ensure(next.eta == row.eta && next.omega == row.omega, || {
                format!("{name} k={}: tolerances changed on failure", row.outer)
            })?;
            ensure(next.rho == 10.0 * row.rho, || format!("{name} k={}: ρ {:e}→{:e}", row.outer, row.rho, next.rho))?;
        }
    }
    Ok(())
}

fn outer_schedule() -> Check {
    let mut rows = 0;
    let mut runs = 0;
    let names: Vec<&str> = catalog::entries()
        .iter()
        .filter(|e| !e.has_tag("tax") && !e.has_tag("nls"))
        .map(|e| e.name)
        .collect();
    let default = NclOptions::default();
    let tight = NclOptions {
        eta0: 1e-2,
        omega0: 1e-2,
        ..NclOptions::default()
    };
    let mut cases: Vec<(String, Problem, &NclOptions)> = names
        .iter()
        .map(|n| (n.to_string(), catalog::get(n).unwrap(), &default))
        .collect();
    cases.push(("tax1d".into(), catalog::get("tax1d").unwrap(), &tight));
    for (name, p, opts) in &cases {
        let out = ncl_solve(p, opts, &NoClock).map_err(|e| format!("{name}: {e}"))?;
        if out.status != NclStatus::FirstOrder {
            continue;
        }
        check_schedule(name, &out.state.log, opts)?;
        rows += out.state.log.len();
        runs += 1;
    }
    ensure(runs >= names.len(), || format!("only {runs} converging runs"))?;
    Ok(format!("{runs} converging runs, {rows} logged iterations"))
}

fn convex_correctness() -> Check {
    let mut worst_x = 0.0f64;
    let mut worst_r = 0.0f64;
    let mut max_outer = 0;
    let names = catalog::list(&["convex"]);
    for name in &names {
        let e = catalog::entry(name).unwrap();
        let out = ncl_solve(&e.build(), &NclOptions::default(), &NoClock).map_err(|e| format!("{name}: {e}"))?;
        ensure(out.status == NclStatus::FirstOrder, || format!("{name}: {}", out.status))?;
        let sol = e.solution().ok_or_else(|| format!("{name}: no documented solution"))?;
        let err = dist(&out.point.x, &sol.x);
        ensure(err <= 1e-5, || format!("{name}: ‖x − x*‖∞ = {err:e}"))?;
        ensure(out.r_norm <= 1e-6, || format!("{name}: ‖r‖∞ = {:e}", out.r_norm))?;
        ensure(out.state.log.len() <= 15, || format!("{name}: {} outer iterations", out.state.log.len()))?;
        worst_x = worst_x.max(err);
        worst_r = worst_r.max(out.r_norm);
        max_outer = max_outer.max(out.state.log.len());
    }
    Ok(format!(
        "{} problems, max ‖x − x*‖∞ {worst_x:.1e}, max ‖r‖∞ {worst_r:.1e}, max outer {max_outer}",
        names.len()
    ))
}

fn licq_robustness() -> Check {
    let names = catalog::list(&["degenerate"]);
    ensure(names.len() == 4, || format!("{} degenerate problems", names.len()))?;
    let mut notes = Vec::new();
    for name in &names {
        let p = catalog::get(name).unwrap();
        let out = ncl_solve(&p, &NclOptions::default(), &NoClock).map_err(|e| format!("{name}: {e}"))?;
        ensure(out.status == NclStatus::FirstOrder, || format!("{name}: NCL {}", out.status))?;
        let direct = solve_problem(&catalog::get(name).unwrap(), None, &IpOptions::default(), &NoClock);
        let note = match direct {
            Err(e) => format!("{name}: ip error ({e})"),
            Ok(sub) => {
                let s = &sub.stats;
                ensure(
                    sub.status != SubStatus::Optimal || s.regularized_iterations == s.iterations,
                    || format!("{name}: ip solved with {}/{} regularized iterations", s.regularized_iterations, s.iterations),
                )?;
                format!("{name}: ip {} {}/{} regularized", sub.status, s.regularized_iterations, s.iterations)
            }
        };
        notes.push(note);
    }
    Ok(notes.join("; "))
}

/// NCL by hand with tight subproblem tolerances, checking `y_k + ρ_k r*_k`
/// against the subproblem multipliers at every outer iteration.
fn multiplier_update(name: &str) -> Result<(usize, f64), String> {
    let p = catalog::get(name).unwrap();
    let opts = NclOptions::default();
    let sp = to_slack_form(&p);
    let mut st = OuterState::new(sp.m(), &opts);
    let mut np = NclProblem::new(sp, st.y.clone(), st.rho).map_err(|e| e.to_string())?;
    let n = np.n_x();
    let mut start = IpStart::cold(np.x0());
    let mut worst = 0.0f64;
    for k in 1..=15 {
        st.k = k;
        np.update_params(&st.y, st.rho).map_err(|e| e.to_string())?;
        let ip = IpOptions {
            mu_init: ncl_core::driver::mu_init_schedule(k, opts.mu0),
            tol_dual: 1e-10,
            tol_primal: 1e-10,
            tol_comp: 1e-10,
            warm_start: k > 1,
            ..IpOptions::default()
        };
        let sub = solve_subproblem(&np, &start, &ip, &NoClock).map_err(|e| format!("{name} k={k}: {e}"))?;
        ensure(sub.status == SubStatus::Optimal, || format!("{name} k={k}: {}", sub.status))?;
        let r = &sub.point.x[n..];
        let gap = st
            .y
            .iter()
            .zip(r)
            .zip(&sub.point.y)
            .map(|((y, r), l)| (y + st.rho * r - l).abs())
            .fold(0.0, f64::max);
        worst = worst.max(gap);
        ensure(gap <= 1e-6, || format!("{name} k={k}: ‖y + ρr − λ‖∞ = {gap:e}"))?;
        if st.check_termination(norm_inf(r), true, &opts) == NclStatus::FirstOrder {
            return Ok((k, worst));
        }
        st.update_outer(r, &opts);
        start = IpStart::warm(&sub.point);
    }
    Err(format!("{name}: no convergence in 15 outer iterations"))
}

fn first_order_update() -> Check {
    let mut parts = Vec::new();
    for name in ["qp-ineq", "qp3-eq"] {
        let (k, worst) = multiplier_update(name)?;
        parts.push(format!("{name}: {k} iterations, max gap {worst:.1e}"));
    }
    Ok(parts.join("; "))
}

fn nls_one_shot() -> Check {
    let names = catalog::list(&["nls"]);
    ensure(names.len() == 6, || format!("{} least-squares problems", names.len()))?;
    let mut worst = 0.0f64;
    for name in &names {
        let p = catalog::get(name).unwrap();
        let out = ncl_nls_solve(&p, &NclOptions::nls(), &NoClock).map_err(|e| format!("{name}: {e}"))?;
        ensure(out.status == NclStatus::FirstOrder, || format!("{name}: {}", out.status))?;
        ensure(out.state.log.len() == 1, || format!("{name}: {} outer iterations", out.state.log.len()))?;
        let a = to_na(&p.eval_jac(&out.point.x).unwrap().to_dense());
        let linear = !matches!(*name, "nls-rosen" | "nls-exp-fit");
        let err = if linear {
            let c0 = DVector::from_vec(p.eval_cons(&vec![0.0; p.n()]).unwrap());
            let b = DVector::from_column_slice(p.con_lower()) - c0;
            dist(&out.point.x, normal_equations(&a, &b).as_slice())
        } else {
            let sol = catalog::entry(name).unwrap().solution().ok_or("no documented solution")?;
            let res: Vec<f64> = p
                .eval_cons(&out.point.x)
                .unwrap()
                .iter()
                .zip(p.con_lower())
                .map(|(c, b)| c - b)
                .collect();
            let g = a.transpose() * DVector::from_vec(res);
            ensure(g.amax() <= 1e-6, || format!("{name}: ‖Jᵀ(c − b)‖∞ = {:e}", g.amax()))?;
            dist(&out.point.x, &sol.x)
        };
        ensure(err <= 1e-6, || format!("{name}: ‖x − x_ls‖∞ = {err:e}"))?;
        worst = worst.max(err);
    }
    Ok(format!("6 problems in one outer iteration each, max error {worst:.1e}"))
}

fn seq(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>().join(" ")
}

fn small_tax() -> Check {
    let p = catalog::get("tax1d").unwrap();
    let opts = NclOptions {
        eta0: 1e-2,
        omega0: 1e-2,
        ..NclOptions::default()
    };
    let out = ncl_solve(&p, &opts, &NoClock).map_err(|e| e.to_string())?;
    let r: Vec<f64> = out.state.log.iter().map(|row| row.r_norm).collect();
    ensure(out.status == NclStatus::FirstOrder, || format!("status {}", out.status))?;
    ensure(r.len() <= 15, || format!("{} outer iterations", r.len()))?;
    let tail = &r[r.len().saturating_sub(4)..];
    ensure(tail.len() == 4 && tail.windows(2).all(|w| w[1] < w[0]), || {
        format!("‖r‖ not decreasing over the last 4: {}", seq(tail))
    })?;
    Ok(format!("{} outer iterations, ‖r‖: {}", r.len(), seq(&r)))
}

fn fixture(problem: &str, solver: SolverKind, time: f64, solved: bool) -> RunRecord {
    RunRecord {
        problem: problem.into(),
        solver,
        status: if solved { RunStatus::FirstOrder } else { RunStatus::MaxIter },
        f: 0.0,
        grad_lag: 0.0,
        cons_viol: 0.0,
        time,
        iter: 1,
        n_obj: 1,
        n_grad: 1,
        n_cons: 1,
        n_jac: 1,
        n_hess: 1,
    }
}

fn profile_machinery() -> Check {
    use SolverKind::{IpDirect as B, Ncl as A};
    let c = performance_profile(&[fixture("p", A, 1.0, true), fixture("p", B, 2.0, true)], Metric::Time)
        .map_err(|e| e.to_string())?;
    ensure(c[0].ratios == [1.0] && c[0].values == [1.0], || format!("A: {:?}", c[0]))?;
    ensure(c[1].ratios == [2.0] && c[1].values == [1.0] && c[1].value_at(1.0) == 0.0, || {
        format!("B: {:?}", c[1])
    })?;
    let c = performance_profile(
        &[
            fixture("p", A, 1.0, true),
            fixture("p", B, 1.0, false),
            fixture("q", A, 2.0, true),
            fixture("q", B, 2.0, false),
        ],
        Metric::Time,
    )
    .map_err(|e| e.to_string())?;
    ensure(c[1].ratios.is_empty() && c[1].value_at(f64::INFINITY) == 0.0, || format!("failing: {:?}", c[1]))?;
    let c = performance_profile(&[fixture("p", A, 3.0, true), fixture("p", B, 3.0, true)], Metric::Time)
        .map_err(|e| e.to_string())?;
    ensure(c.iter().all(|c| c.ratios == [1.0] && c.values == [1.0]), || format!("ties: {c:?}"))?;
    let e = performance_profile(&[fixture("p", A, 0.0, true), fixture("p", B, 1.0, true)], Metric::Time);
    ensure(matches!(e, Err(ProfileError::DegenerateMetric { .. })), || format!("zero metric: {e:?}"))?;
    Ok("ratio example, all-fail, ties and zero-metric fixtures exact".into())
}

fn derivative_hygiene() -> Check {
    let mut checked = 0;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut check = |p: &Problem, points: usize, seed: u64| -> Result<(), String> {
        let (g, j, h) = check_derivatives(p, points, seed, true);
        ensure(g <= 1e-6 && j <= 1e-6 && h <= 1e-5, || {
            format!("{}: gradient {g:e}, Jacobian {j:e}, Hessian {h:e}", p.name())
        })?;
        worst = (worst.0.max(g), worst.1.max(j), worst.2.max(h));
        checked += 1;
        Ok(())
    };
    for (k, e) in catalog::entries().iter().enumerate() {
        let p = e.build();
        check(&p, if p.n() > 50 { 2 } else { 10 }, k as u64)?;
    }
    let shapes = [
        [1, 1, 1, 1, 1],
        [2, 1, 1, 1, 1],
        [1, 2, 1, 1, 1],
        [1, 1, 2, 1, 1],
        [1, 1, 1, 2, 1],
        [1, 1, 1, 1, 2],
        [2, 3, 1, 1, 1],
        [3, 1, 2, 1, 1],
        [2, 2, 2, 1, 1],
        [1, 2, 1, 2, 2],
        [4, 1, 1, 1, 2],
        [2, 2, 1, 2, 1],
    ];
    for (k, s) in shapes.iter().enumerate() {
        let mut cfg = TaxConfig::new(s[0], s[1], s[2], s[3], s[4]);
        cfg.seed = k as u64;
        let p = build_tax_problem(&cfg).map_err(|e| e.to_string())?;
        let d = cfg.dims();
        ensure((p.n(), p.m()) == (d.n, d.m), || format!("{s:?}: {}×{}", p.n(), p.m()))?;
        check(&p, 5, 100 + k as u64)?;
    }
    Ok(format!(
        "{checked} problems; worst gradient {:.1e}, Jacobian {:.1e}, Hessian {:.1e}",
        worst.0, worst.1, worst.2
    ))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Check); 10] = [
        ("tax dimensions", 1.0, structural_dimensions),
        ("reduced KKT solve vs full system", 5.0, kkt_structure),
        ("outer-loop schedule", 60.0, outer_schedule),
        ("NCL on convex problems", 30.0, convex_correctness),
        ("LICQ-degenerate problems", 30.0, licq_robustness),
        ("first-order multiplier update", 10.0, first_order_update),
        ("least squares in one iteration", 10.0, nls_one_shot),
        ("tax1d solve", 60.0, small_tax),
        ("performance profiles", 1.0, profile_machinery),
        ("derivative checks", 60.0, derivative_hygiene),
    ];
    let mut failed = 0;
    for (k, (title, limit, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        let result = match result {
            Ok(detail) if secs > *limit => Err(format!("took {secs:.2} s, limit {limit} s ({detail})")),
            other => other,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("criterion {:>2}  {tag}  {secs:>7.2} s  {title}: {detail}", k + 1);
        failed += result.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
