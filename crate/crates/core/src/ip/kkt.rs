//! Newton systems of the interior-point method.
//!
//! With a residual block the full system in `(Δx, Δr, Δλ)` is
//!
//! ```txt
//!   [ H+D+δI   0    Jᵀ ] [Δx]      [rd_x]
//!   [   0     ρI    I  ] [Δr]  = − [rd_r]
//!   [   J      I    0  ] [Δλ]      [rp  ]
//! ```
//!
//! Here `λ` is the multiplier of `g + Jᵀλ − z = 0`, the negative of the
//! multipliers the solver reports. `Δr` is eliminated through the second row,
//! leaving the quasi-definite matrix `[[H+D+δI, Jᵀ], [J, −I/ρ]]`. Without a
//! residual block the system is `[[H+D+δI, Jᵀ], [J, −δ_c I]]` with `δ_c = 0`
//! unless `J` is found rank deficient.
//!
//! Variables eliminated before assembly (slacks with a positive barrier
//! diagonal) leave a nonnegative diagonal `C` in the last block: its corner
//! becomes `−C` in the full system and `−I/ρ − C` or `−δ_c I − C` when reduced.

use alloc::vec::Vec;

use crate::linalg::{norm_inf, Dense, Inertia, Ldl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum KktMethod {
    /// Condensed when it applies and `m ≥ 2n`, reduced otherwise.
    #[default]
    Auto,
    /// The `(n+m)`-dimensional quasi-definite system.
    Reduced,
    /// `(H + D + δI + JᵀWJ) Δx = …`, `n`-dimensional. Needs a positive
    /// last-block diagonal in every row: the residual block, or eliminated
    /// variables in each row. Falls back to reduced otherwise.
    Condensed,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KktError {
    #[error("variable {index} is not strictly inside its bounds")]
    NonInterior { index: usize },
    #[error("KKT matrix is singular")]
    SingularSystem,
    #[error("inertia correction failed (shift above 1e40)")]
    RegularizationFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSystem {
    /// Hessian of the Lagrangian restricted to `x`, full symmetric storage.
    pub h: Dense,
    /// Barrier diagonal.
    pub d: Vec<f64>,
    /// Constraint Jacobian with respect to `x`.
    pub j: Dense,
    pub rho: f64,
    pub has_r_block: bool,
    pub rd_x: Vec<f64>,
    /// Empty without a residual block.
    pub rd_r: Vec<f64>,
    pub rp: Vec<f64>,
    /// Primal shift added to `H + D`.
    pub delta: f64,
    /// Dual shift, only used without a residual block.
    pub delta_c: f64,
    /// Per-row contribution `C ≥ 0` of eliminated variables; empty means zero.
    pub corner: Vec<f64>,
    pub method: KktMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub dx: Vec<f64>,
    pub dr: Vec<f64>,
    pub dlambda: Vec<f64>,
}

impl KktSystem {
    pub fn n(&self) -> usize {
        self.h.rows()
    }

    pub fn m(&self) -> usize {
        self.j.rows()
    }

    fn effective_method(&self) -> KktMethod {
        match self.method {
            KktMethod::Auto if self.condensable() && self.m() >= 2 * self.n() => KktMethod::Condensed,
            KktMethod::Condensed if self.condensable() => KktMethod::Condensed,
            _ => KktMethod::Reduced,
        }
    }

    /// `1/ρ + C_i` with a residual block, `δ_c + C_i` without.
    fn block_diag(&self, i: usize) -> f64 {
        let base = if self.has_r_block { 1.0 / self.rho } else { self.delta_c };
        base + self.corner(i)
    }

    fn condensable(&self) -> bool {
        (0..self.m()).all(|i| self.block_diag(i) > 0.0)
    }

    fn corner(&self, i: usize) -> f64 {
        self.corner.get(i).copied().unwrap_or(0.0)
    }

    fn shifted_h(&self) -> Dense {
        let mut a = self.h.clone();
        for i in 0..self.n() {
            a[(i, i)] += self.d[i] + self.delta;
        }
        a
    }

    /// The full system matrix, for checking and testing.
    pub fn full_matrix(&self) -> Dense {
        let (n, m) = (self.n(), self.m());
        let r = if self.has_r_block { m } else { 0 };
        let mut k = Dense::zeros(n + r + m, n + r + m);
        let a = self.shifted_h();
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = a[(i, j)];
            }
        }
        for i in 0..m {
            for j in 0..n {
                k[(n + r + i, j)] = self.j[(i, j)];
                k[(j, n + r + i)] = self.j[(i, j)];
            }
            if self.has_r_block {
                k[(n + i, n + i)] = self.rho;
                k[(n + i, n + r + i)] = 1.0;
                k[(n + r + i, n + i)] = 1.0;
                k[(n + r + i, n + r + i)] = -self.corner(i);
            } else {
                k[(n + i, n + i)] = -self.delta_c - self.corner(i);
            }
        }
        k
    }

    /// Right-hand side of the full system, `−(rd_x, rd_r, rp)`.
    pub fn full_rhs(&self) -> Vec<f64> {
        self.rd_x
            .iter()
            .chain(&self.rd_r)
            .chain(&self.rp)
            .map(|v| -v)
            .collect()
    }

    /// `[[H+D+δI, Jᵀ], [J, −I/ρ]]`, or `−δ_c I` in the corner without a
    /// residual block.
    pub fn reduced_matrix(&self) -> Dense {
        let (n, m) = (self.n(), self.m());
        let mut k = Dense::zeros(n + m, n + m);
        let a = self.shifted_h();
        for i in 0..n {
            k.row_mut(i)[..n].copy_from_slice(a.row(i));
        }
        for i in 0..m {
            for j in 0..n {
                k[(n + i, j)] = self.j[(i, j)];
                k[(j, n + i)] = self.j[(i, j)];
            }
            k[(n + i, n + i)] = -self.block_diag(i);
        }
        k
    }

    /// Row weights `W` of the condensed form, the inverse last-block diagonal.
    fn weights(&self) -> Vec<f64> {
        (0..self.m()).map(|i| 1.0 / self.block_diag(i)).collect()
    }

    /// `H + D + δI + JᵀWJ` with `W = (I/ρ + C)⁻¹`, or `(δ_c I + C)⁻¹` without
    /// a residual block.
    pub fn condensed_matrix(&self) -> Dense {
        let mut a = self.shifted_h();
        let n = self.n();
        let w = self.weights();
        for (i, wi) in w.iter().enumerate() {
            let row = self.j.row(i);
            for p in 0..n {
                let jp = row[p];
                if jp == 0.0 {
                    continue;
                }
                let s = wi * jp;
                for q in 0..=p {
                    a[(p, q)] += s * row[q];
                }
            }
        }
        for p in 0..n {
            for q in 0..p {
                a[(q, p)] = a[(p, q)];
            }
        }
        a
    }

    fn expected_inertia(&self, method: KktMethod) -> Inertia {
        match method {
            KktMethod::Condensed => Inertia::new(self.n(), 0, 0),
            _ => Inertia::new(self.n(), self.m(), 0),
        }
    }

    /// Full-system product `K·(dx, dr, dλ)`.
    fn apply(&self, d: &Direction) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut top = self.h.mul_vec(&d.dx);
        let jt = self.j.tmul_vec(&d.dlambda);
        for i in 0..n {
            top[i] += (self.d[i] + self.delta) * d.dx[i] + jt[i];
        }
        let mut bottom = self.j.mul_vec(&d.dx);
        for (i, b) in bottom.iter_mut().enumerate() {
            *b -= self.corner(i) * d.dlambda[i];
        }
        let mid = if self.has_r_block {
            for (b, r) in bottom.iter_mut().zip(&d.dr) {
                *b += r;
            }
            d.dr
                .iter()
                .zip(&d.dlambda)
                .map(|(r, l)| self.rho * r + l)
                .collect()
        } else {
            for (b, l) in bottom.iter_mut().zip(&d.dlambda) {
                *b -= self.delta_c * l;
            }
            Vec::new()
        };
        (top, mid, bottom)
    }
}

/// A factorization of the system in the form chosen by its method.
pub struct KktFactor {
    method: KktMethod,
    ldl: Ldl,
}

impl KktFactor {
    pub fn inertia(&self) -> Inertia {
        self.ldl.inertia()
    }

    /// Solves `K d = (e1, e2, e3)`.
    fn solve_raw(&self, sys: &KktSystem, e1: &[f64], e2: &[f64], e3: &[f64]) -> Direction {
        let n = sys.n();
        match self.method {
            KktMethod::Condensed => {
                let rho = sys.rho;
                let w = sys.weights();
                // Δλ = W(JΔx − e3 + e2/ρ), without the e2 term if there is no r.
                let e3: Vec<f64> = if sys.has_r_block {
                    e3.iter().zip(e2).map(|(a, b)| a - b / rho).collect()
                } else {
                    e3.to_vec()
                };
                let t: Vec<f64> = (0..sys.m()).map(|i| w[i] * e3[i]).collect();
                let jw = sys.j.tmul_vec(&t);
                let rhs: Vec<f64> = e1.iter().zip(&jw).map(|(a, b)| a + b).collect();
                let dx = self.ldl.solve(&rhs);
                let jdx = sys.j.mul_vec(&dx);
                let dlambda: Vec<f64> = (0..sys.m()).map(|i| w[i] * (jdx[i] - e3[i])).collect();
                let dr = e2.iter().zip(&dlambda).map(|(b, l)| (b - l) / rho).collect();
                Direction { dx, dr, dlambda }
            }
            _ => {
                let mut rhs = e1.to_vec();
                if sys.has_r_block {
                    rhs.extend(e3.iter().zip(e2).map(|(a, b)| a - b / sys.rho));
                } else {
                    rhs.extend_from_slice(e3);
                }
                let sol = self.ldl.solve(&rhs);
                let dx = sol[..n].to_vec();
                let dlambda = sol[n..].to_vec();
                let dr = if sys.has_r_block {
                    e2.iter()
                        .zip(&dlambda)
                        .map(|(b, l)| (b - l) / sys.rho)
                        .collect()
                } else {
                    Vec::new()
                };
                Direction { dx, dr, dlambda }
            }
        }
    }

    /// Solves the full system with a few steps of iterative refinement.
    pub fn solve(&self, sys: &KktSystem) -> Direction {
        let e1: Vec<f64> = sys.rd_x.iter().map(|v| -v).collect();
        let e2: Vec<f64> = sys.rd_r.iter().map(|v| -v).collect();
        let e3: Vec<f64> = sys.rp.iter().map(|v| -v).collect();
        let scale = 1.0 + norm_inf(&e1).max(norm_inf(&e2)).max(norm_inf(&e3));
        let mut d = self.solve_raw(sys, &e1, &e2, &e3);
        for _ in 0..5 {
            let (k1, k2, k3) = sys.apply(&d);
            let r1: Vec<f64> = e1.iter().zip(&k1).map(|(a, b)| a - b).collect();
            let r2: Vec<f64> = e2.iter().zip(&k2).map(|(a, b)| a - b).collect();
            let r3: Vec<f64> = e3.iter().zip(&k3).map(|(a, b)| a - b).collect();
            let res = norm_inf(&r1).max(norm_inf(&r2)).max(norm_inf(&r3));
            if res <= 1e-13 * scale || !res.is_finite() {
                break;
            }
            let c = self.solve_raw(sys, &r1, &r2, &r3);
            for (a, b) in d.dx.iter_mut().zip(&c.dx) {
                *a += b;
            }
            for (a, b) in d.dr.iter_mut().zip(&c.dr) {
                *a += b;
            }
            for (a, b) in d.dlambda.iter_mut().zip(&c.dlambda) {
                *a += b;
            }
        }
        d
    }
}

/// Factors `sys` with its current shifts.
pub fn factorize(sys: &KktSystem) -> KktFactor {
    let method = sys.effective_method();
    let ldl = match method {
        KktMethod::Condensed => Ldl::factor(&sys.condensed_matrix()),
        _ => Ldl::factor(&sys.reduced_matrix()),
    };
    KktFactor { method, ldl }
}

/// Solves the full system with the current shifts. Fails only if the
/// factorization is singular, which needs a rank-deficient `J` without a
/// residual block (or a singular `H + D + δI`).
pub fn solve_kkt(sys: &KktSystem) -> Result<Direction, KktError> {
    let f = factorize(sys);
    if f.ldl.is_singular() {
        return Err(KktError::SingularSystem);
    }
    Ok(f.solve(sys))
}

/// Parameters of the inertia correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularization {
    pub delta_min: f64,
    pub growth: f64,
    /// Shift accepted at the previous iteration; the search resumes one step
    /// below it.
    pub last_delta: f64,
    /// Dual shift to apply if the matrix turns out singular.
    pub delta_c: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization {
            delta_min: 1e-8,
            growth: 10.0,
            last_delta: 0.0,
            delta_c: 1e-8,
        }
    }
}

const DELTA_MAX: f64 = 1e40;

/// Picks the smallest shift `δ` in `{0, δ_min, growth·δ_min, …}` for which
/// the factored matrix has the inertia of a minimizer (`(n, m, 0)` reduced,
/// positive definite condensed), sets it in `sys` and returns the
/// factorization.
pub fn regularize_factor(sys: &mut KktSystem, reg: &Regularization) -> Result<KktFactor, KktError> {
    sys.delta = 0.0;
    let method = sys.effective_method();
    let want = sys.expected_inertia(method);
    let f = factorize(sys);
    if f.inertia() == want {
        return Ok(f);
    }
    if !sys.has_r_block && f.inertia().zero > 0 && sys.delta_c == 0.0 {
        sys.delta_c = reg.delta_c;
        let f = factorize(sys);
        if f.inertia() == want {
            return Ok(f);
        }
    }
    let mut delta = reg.delta_min;
    if reg.last_delta > 0.0 {
        while delta * reg.growth < reg.last_delta {
            delta *= reg.growth;
        }
    }
    while delta <= DELTA_MAX {
        sys.delta = delta;
        let f = factorize(sys);
        if f.inertia() == want {
            return Ok(f);
        }
        delta *= reg.growth;
    }
    Err(KktError::RegularizationFailed)
}

/// Inertia correction; returns the chosen `δ`.
pub fn regularize(sys: &mut KktSystem, reg: &Regularization) -> Result<f64, KktError> {
    regularize_factor(sys, reg).map(|_| sys.delta)
}

/// Largest `α ∈ (0, 1]` with `v + αΔv ≥ (1 − τ) v` componentwise, for
/// distances `v > 0` to a bound.
pub fn fraction_to_boundary(dist: &[f64], step: &[f64], tau: f64) -> f64 {
    let mut alpha = 1.0f64;
    for (v, d) in dist.iter().zip(step) {
        if *d < 0.0 {
            alpha = alpha.min(-tau * v / d);
        }
    }
    alpha
}

/// Fraction-to-boundary step lengths for the primal variables (bounds
/// `lower`, `upper`, infinite sides ignored) and for the bound multipliers.
pub fn step_lengths(
    x: &[f64],
    dx: &[f64],
    lower: &[f64],
    upper: &[f64],
    z: &[f64],
    dz: &[f64],
    tau: f64,
) -> (f64, f64) {
    let mut dist = Vec::new();
    let mut step = Vec::new();
    for i in 0..x.len() {
        if lower[i].is_finite() {
            dist.push(x[i] - lower[i]);
            step.push(dx[i]);
        }
        if upper[i].is_finite() {
            dist.push(upper[i] - x[i]);
            step.push(-dx[i]);
        }
    }
    (
        fraction_to_boundary(&dist, &step, tau),
        fraction_to_boundary(z, dz, tau),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> KktSystem {
        KktSystem {
            h: Dense::from_rows(&[&[2.0]]),
            d: vec![0.0],
            j: Dense::from_rows(&[&[1.0]]),
            rho: 1.0,
            has_r_block: true,
            rd_x: vec![0.0],
            rd_r: vec![0.0],
            rp: vec![0.0],
            delta: 0.0,
            delta_c: 0.0,
            corner: Vec::new(),
            method: KktMethod::Reduced,
        }
    }

    #[test]
    fn toy_full_matrix() {
        let k = toy().full_matrix();
        assert_eq!(k.as_slice(), &[2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_rhs_gives_zero_direction() {
        let d = solve_kkt(&toy()).unwrap();
        assert_eq!((d.dx[0], d.dr[0], d.dlambda[0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn toy_matches_dense_solve() {
        let mut s = toy();
        s.rd_x = vec![-1.0];
        s.rd_r = vec![-1.0];
        s.rp = vec![-1.0];
        let d = solve_kkt(&s).unwrap();
        let k = nalgebra::DMatrix::from_row_slice(3, 3, s.full_matrix().as_slice());
        let u = k.lu().solve(&nalgebra::DVector::from_vec(s.full_rhs())).unwrap();
        for (v, w) in [d.dx[0], d.dr[0], d.dlambda[0]].iter().zip(u.iter()) {
            assert!((v - w).abs() < 1e-12, "{v} vs {w}");
        }
        assert!((d.dr[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn convex_case_needs_no_shift() {
        let mut s = toy();
        assert_eq!(regularize(&mut s, &Regularization::default()).unwrap(), 0.0);
    }

    #[test]
    fn indefinite_case_gets_shifted() {
        let mut s = KktSystem {
            h: Dense::from_rows(&[&[-1.0, 0.0], &[0.0, 1.0]]),
            d: vec![0.0, 0.0],
            j: Dense::from_rows(&[&[1.0, 0.0]]),
            rho: 1.0,
            has_r_block: true,
            rd_x: vec![0.0; 2],
            rd_r: vec![0.0],
            rp: vec![0.0],
            delta: 0.0,
            delta_c: 0.0,
            corner: Vec::new(),
            method: KktMethod::Reduced,
        };
        let delta = regularize(&mut s, &Regularization::default()).unwrap();
        assert!(delta > 0.0);
        assert_eq!(Ldl::factor(&s.reduced_matrix()).inertia(), Inertia::new(2, 1, 0));
    }

    #[test]
    fn fraction_to_boundary_examples() {
        let (ap, ad) = step_lengths(&[0.5], &[-1.0], &[0.0], &[f64::INFINITY], &[1.0], &[-4.0], 0.99);
        assert!((ap - 0.495).abs() < 1e-15);
        assert!((ad - 0.2475).abs() < 1e-15);
        let (ap, ad) = step_lengths(&[0.5], &[3.0], &[0.0], &[f64::INFINITY], &[1.0], &[2.0], 0.99);
        assert_eq!((ap, ad), (1.0, 1.0));
    }
}
