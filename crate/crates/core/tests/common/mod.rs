// Shared oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ncl_core::linalg::{Dense, Triplets};
use ncl_core::Nlp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-6;

pub fn to_na(a: &Dense) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

/// Dense solve by LU with partial pivoting and two steps of iterative
/// refinement.
pub fn lu_solve(a: &Dense, b: &[f64]) -> Option<Vec<f64>> {
    let a = to_na(a);
    let b = DVector::from_column_slice(b);
    let lu = a.clone().lu();
    let mut x = lu.solve(&b)?;
    for _ in 0..2 {
        let r = &b - &a * &x;
        x += lu.solve(&r)?;
    }
    Some(x.as_slice().to_vec())
}

/// Random points strictly inside the bounds of `nlp`, scattered around `x0`.
pub fn sample_points(nlp: &dyn Nlp, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l, u, x0) = (nlp.var_lower(), nlp.var_upper(), nlp.x0());
    (0..count)
        .map(|_| {
            (0..nlp.n())
                .map(|j| {
                    let t: f64 = rng.random_range(-1.0..1.0);
                    let v = x0[j] + 0.3 * t * (1.0 + x0[j].abs());
                    match (l[j].is_finite(), u[j].is_finite()) {
                        (true, true) if u[j] - l[j] > 0.0 => {
                            l[j] + (u[j] - l[j]) * rng.random_range(0.05..0.95)
                        }
                        (true, true) => l[j],
                        (true, false) => v.max(l[j] + 1e-2 + 0.1 * (t + 1.0)),
                        (false, true) => v.min(u[j] - 1e-2 - 0.1 * (t + 1.0)),
                        _ => v,
                    }
                })
                .collect()
        })
        .collect()
}

fn shifted(x: &[f64], j: usize, h: f64) -> Vec<f64> {
    let mut v = x.to_vec();
    v[j] += h;
    v
}

fn worst(a: &[f64], b: &[f64], rel: bool) -> f64 {
    a.iter()
        .zip(b)
        .map(|(a, b)| {
            let scale = if rel { 1.0 + a.abs().max(b.abs()) } else { 1.0 };
            (a - b).abs() / scale
        })
        .fold(0.0, f64::max)
}

/// Largest scaled error `|g − g_fd| / (1 + |g|)` over the gradient.
pub fn gradient_error(nlp: &dyn Nlp, x: &[f64]) -> f64 {
    let g = nlp.grad(x).unwrap();
    let fd: Vec<f64> = (0..x.len())
        .map(|j| {
            let hj = H * (1.0 + x[j].abs());
            (nlp.obj(&shifted(x, j, hj)).unwrap() - nlp.obj(&shifted(x, j, -hj)).unwrap()) / (2.0 * hj)
        })
        .collect();
    worst(&g, &fd, true)
}

/// Columns of `J` by central differences of `c`.
fn jac_fd(nlp: &dyn Nlp, x: &[f64]) -> Dense {
    let mut j = Dense::zeros(nlp.m(), x.len());
    for k in 0..x.len() {
        let hk = H * (1.0 + x[k].abs());
        let cp = nlp.cons(&shifted(x, k, hk)).unwrap();
        let cm = nlp.cons(&shifted(x, k, -hk)).unwrap();
        for i in 0..nlp.m() {
            j[(i, k)] = (cp[i] - cm[i]) / (2.0 * hk);
        }
    }
    j
}

pub fn jacobian_error(nlp: &dyn Nlp, x: &[f64]) -> f64 {
    if nlp.m() == 0 {
        return 0.0;
    }
    let j = nlp.jac(x).unwrap().to_dense();
    worst(j.as_slice(), jac_fd(nlp, x).as_slice(), true)
}

/// `∇f − Jᵀy`, the gradient of the Lagrangian.
fn grad_lag(nlp: &dyn Nlp, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut g = nlp.grad(x).unwrap();
    if nlp.m() > 0 {
        let jty = nlp.jac(x).unwrap().tmul_vec(y);
        g.iter_mut().zip(jty).for_each(|(g, v)| *g -= v);
    }
    g
}

/// Compares `eval_hess_lag` with central differences of `∇f − Jᵀy`.
pub fn hessian_error(nlp: &dyn Nlp, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let h = sym(&nlp.hess(x, y, 1.0).unwrap(), n);
    let mut fd = Dense::zeros(n, n);
    for k in 0..n {
        let hk = H * (1.0 + x[k].abs());
        let gp = grad_lag(nlp, &shifted(x, k, hk), y);
        let gm = grad_lag(nlp, &shifted(x, k, -hk), y);
        for i in 0..n {
            fd[(i, k)] = (gp[i] - gm[i]) / (2.0 * hk);
        }
    }
    worst(h.as_slice(), fd.as_slice(), true)
}

/// Full symmetric matrix from lower-triangle triplets.
pub fn sym(t: &Triplets, n: usize) -> Dense {
    let mut a = Dense::zeros(n, n);
    for &(i, j, v) in &t.entries {
        a[(i, j)] += v;
        if i != j {
            a[(j, i)] += v;
        }
    }
    a
}

/// Derivative check at `count` random points. Returns the worst gradient,
/// Jacobian and Hessian errors.
pub fn check_derivatives(nlp: &dyn Nlp, count: usize, seed: u64, hessian: bool) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = (0.0f64, 0.0f64, 0.0f64);
    for x in sample_points(nlp, count, seed) {
        out.0 = out.0.max(gradient_error(nlp, &x));
        out.1 = out.1.max(jacobian_error(nlp, &x));
        if hessian {
            let y: Vec<f64> = (0..nlp.m()).map(|_| rng.random_range(-1.0..1.0)).collect();
            out.2 = out.2.max(hessian_error(nlp, &x, &y));
        }
    }
    out
}

/// Least-squares solution of `Ax ≈ b` from the normal equations.
pub fn normal_equations(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    ata.cholesky().expect("full column rank").solve(&atb)
}

/// A random Newton system of an NCL subproblem. `H` is symmetric and possibly
/// indefinite; with `rank_deficient` the Jacobian has rank below `min(m, n)`.
pub fn random_kkt(
    seed: u64,
    n: usize,
    m: usize,
    rho: f64,
    rank_deficient: bool,
    method: ncl_core::ip::KktMethod,
) -> ncl_core::ip::KktSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |rows: usize, cols: usize| {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Dense::from_vec(rows, cols, data)
    };
    let b = uniform(n, n);
    let mut h = b.transpose().matmul(&b);
    let shift = if seed.is_multiple_of(3) { 1.5 } else { 0.0 };
    for i in 0..n {
        h[(i, i)] -= shift;
    }
    let j = if rank_deficient && m > 1 && n > 1 {
        let r = (m.min(n) - 1).max(1);
        uniform(m, r).matmul(&uniform(r, n))
    } else {
        uniform(m, n)
    };
    let v = uniform(1, n + 2 * m + n);
    let row = v.row(0);
    ncl_core::ip::KktSystem {
        h,
        d: row[..n].iter().map(|t| 0.5 * (t + 1.0) + 1e-3).collect(),
        j,
        rho,
        has_r_block: true,
        rd_x: row[n..2 * n].to_vec(),
        rd_r: row[2 * n..2 * n + m].to_vec(),
        rp: row[2 * n + m..].to_vec(),
        delta: 0.0,
        delta_c: 0.0,
        corner: Vec::new(),
        method,
    }
}

/// `‖a − b‖∞ / max(1, ‖b‖∞)`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    d / b.iter().map(|v| v.abs()).fold(1.0, f64::max)
}

/// Solves the system through the library and by a dense LU of the full
/// three-block matrix. Returns the relative difference and the shift used.
pub fn compare_with_full(sys: &mut ncl_core::ip::KktSystem) -> Result<(f64, f64), ncl_core::ip::KktError> {
    let f = ncl_core::ip::regularize_factor(sys, &Default::default())?;
    let d = f.solve(sys);
    let ours: Vec<f64> = d.dx.iter().chain(&d.dr).chain(&d.dlambda).copied().collect();
    let full = lu_solve(&sys.full_matrix(), &sys.full_rhs()).expect("full system is nonsingular");
    Ok((rel_diff(&ours, &full), sys.delta))
}
