use alloc::vec;
use alloc::vec::Vec;

use super::Dense;
use crate::math;

/// Relative size below which a pivot counts as zero, measured against the
/// largest entry of the pivot's original column.
const PIVOT_TOL: f64 = 1e-13;

/// Bunch–Kaufman growth bound `(1 + √17) / 8`.
fn alpha() -> f64 {
    (1.0 + math::sqrt(17.0)) / 8.0
}

/// Signature of a symmetric matrix: counts of positive, negative and zero
/// eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn new(positive: usize, negative: usize, zero: usize) -> Self {
        Inertia {
            positive,
            negative,
            zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pivot {
    One(f64),
    /// `[[a, b], [b, c]]` occupying two consecutive positions.
    Two(f64, f64, f64),
    /// A pivot that tested numerically zero; its column was not eliminated.
    Zero,
}

/// Symmetric indefinite factorization `P A Pᵀ = L D Lᵀ` with Bunch–Kaufman
/// partial pivoting. `D` is block diagonal with 1×1 and 2×2 blocks.
#[derive(Debug, Clone)]
pub struct Ldl {
    n: usize,
    /// Unit lower factor, stored below the diagonal.
    lower: Dense,
    /// One entry per block; `Two` blocks are followed by nothing for the second
    /// position (block starts are tracked in `starts`).
    pivots: Vec<Pivot>,
    starts: Vec<usize>,
    /// `perm[k]` is the original index placed at position `k`.
    perm: Vec<usize>,
    inertia: Inertia,
}

impl Ldl {
    /// Factors the symmetric matrix `a` (only symmetric input is meaningful;
    /// both triangles are read).
    pub fn factor(a: &Dense) -> Ldl {
        let n = a.rows();
        assert_eq!(n, a.cols(), "matrix must be square");
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let col_scale: Vec<f64> = (0..n).map(|j| super::norm_inf(a.row(j))).collect();
        let alpha = alpha();
        let mut pivots = Vec::new();
        let mut starts = Vec::new();
        let mut inertia = Inertia::default();

        let mut k = 0;
        while k < n {
            let akk = w[(k, k)].abs();
            let (imax, colmax) = ((k + 1)..n)
                .map(|i| (i, w[(i, k)].abs()))
                .fold((k, 0.0_f64), |best, cur| if cur.1 > best.1 { cur } else { best });

            let tol = PIVOT_TOL * col_scale[perm[k]];
            if akk.max(colmax) <= tol {
                pivots.push(Pivot::Zero);
                starts.push(k);
                inertia.zero += 1;
                // Leave the (negligible) column in place; L gets zeros.
                for i in (k + 1)..n {
                    w[(i, k)] = 0.0;
                }
                k += 1;
                continue;
            }

            let mut two_by_two = false;
            let mut swap_with = k;
            if akk < alpha * colmax {
                let rowmax = (k..n)
                    .filter(|&j| j != imax)
                    .map(|j| w[(imax, j)].abs())
                    .fold(0.0_f64, f64::max);
                if akk * rowmax >= alpha * colmax * colmax {
                    // 1×1, no interchange
                } else if w[(imax, imax)].abs() >= alpha * rowmax {
                    swap_with = imax;
                } else {
                    two_by_two = true;
                    swap_with = imax;
                }
            }

            if !two_by_two {
                if swap_with != k {
                    sym_swap(&mut w, &mut perm, k, swap_with);
                }
                let d = w[(k, k)];
                let tol = PIVOT_TOL * col_scale[perm[k]];
                starts.push(k);
                if d.abs() <= tol {
                    pivots.push(Pivot::Zero);
                    inertia.zero += 1;
                    for i in (k + 1)..n {
                        w[(i, k)] = 0.0;
                    }
                    k += 1;
                    continue;
                }
                pivots.push(Pivot::One(d));
                if d > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
                for i in (k + 1)..n {
                    let lik = w[(i, k)] / d;
                    if lik != 0.0 {
                        for j in (k + 1)..n {
                            let akj = w[(k, j)];
                            w[(i, j)] -= lik * akj;
                        }
                    }
                    w[(i, k)] = lik;
                }
                k += 1;
            } else {
                if swap_with != k + 1 {
                    sym_swap(&mut w, &mut perm, k + 1, swap_with);
                }
                let a11 = w[(k, k)];
                let a21 = w[(k + 1, k)];
                let a22 = w[(k + 1, k + 1)];
                let det = a11 * a22 - a21 * a21;
                starts.push(k);
                pivots.push(Pivot::Two(a11, a21, a22));
                let scale = a11.abs().max(a22.abs()).max(a21.abs());
                let (p, q, z) = two_by_two_inertia(a11, a21, a22);
                inertia.positive += p;
                inertia.negative += q;
                inertia.zero += z;
                if det.abs() <= PIVOT_TOL * scale * scale {
                    // Degenerate block: skip elimination like a zero pivot.
                    for i in (k + 2)..n {
                        w[(i, k)] = 0.0;
                        w[(i, k + 1)] = 0.0;
                    }
                    k += 2;
                    continue;
                }
                let (i11, i12, i22) = (a22 / det, -a21 / det, a11 / det);
                for i in (k + 2)..n {
                    let (u, v) = (w[(i, k)], w[(i, k + 1)]);
                    let l1 = u * i11 + v * i12;
                    let l2 = u * i12 + v * i22;
                    if l1 != 0.0 || l2 != 0.0 {
                        for j in (k + 2)..n {
                            let (bk, bk1) = (w[(k, j)], w[(k + 1, j)]);
                            w[(i, j)] -= l1 * bk + l2 * bk1;
                        }
                    }
                    w[(i, k)] = l1;
                    w[(i, k + 1)] = l2;
                }
                k += 2;
            }
        }

        Ldl {
            n,
            lower: w,
            pivots,
            starts,
            perm,
            inertia,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn is_singular(&self) -> bool {
        self.inertia.zero > 0
    }

    pub fn pivots(&self) -> &[Pivot] {
        &self.pivots
    }

    /// Solves `A x = b`. Zero pivots contribute zero components, so the result
    /// is only meaningful for nonsingular factors.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();

        // L y = Pb
        for (blk, &k) in self.starts.iter().enumerate() {
            let width = match self.pivots[blk] {
                Pivot::Two(..) => 2,
                _ => 1,
            };
            for c in k..k + width {
                let yc = y[c];
                if yc == 0.0 {
                    continue;
                }
                for i in (k + width)..n {
                    y[i] -= self.lower[(i, c)] * yc;
                }
            }
        }

        // D z = y
        for (blk, &k) in self.starts.iter().enumerate() {
            match self.pivots[blk] {
                Pivot::One(d) => y[k] /= d,
                Pivot::Zero => y[k] = 0.0,
                Pivot::Two(a, b2, c) => {
                    let det = a * c - b2 * b2;
                    if det == 0.0 {
                        y[k] = 0.0;
                        y[k + 1] = 0.0;
                    } else {
                        let (u, v) = (y[k], y[k + 1]);
                        y[k] = (c * u - b2 * v) / det;
                        y[k + 1] = (a * v - b2 * u) / det;
                    }
                }
            }
        }

        // Lᵀ x = z
        for (blk, &k) in self.starts.iter().enumerate().rev() {
            let width = match self.pivots[blk] {
                Pivot::Two(..) => 2,
                _ => 1,
            };
            for c in k..k + width {
                let mut acc = y[c];
                for i in (k + width)..n {
                    acc -= self.lower[(i, c)] * y[i];
                }
                y[c] = acc;
            }
        }

        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

fn sym_swap(w: &mut Dense, perm: &mut [usize], p: usize, q: usize) {
    if p == q {
        return;
    }
    let n = w.rows();
    for j in 0..n {
        let t = w[(p, j)];
        w[(p, j)] = w[(q, j)];
        w[(q, j)] = t;
    }
    for i in 0..n {
        let t = w[(i, p)];
        w[(i, p)] = w[(i, q)];
        w[(i, q)] = t;
    }
    perm.swap(p, q);
}

fn two_by_two_inertia(a: f64, b: f64, c: f64) -> (usize, usize, usize) {
    let det = a * c - b * b;
    let scale = a.abs().max(b.abs()).max(c.abs());
    if det.abs() <= PIVOT_TOL * scale * scale {
        // One eigenvalue is negligible; the other has the sign of the trace.
        let tr = a + c;
        if tr.abs() <= PIVOT_TOL * scale {
            (0, 0, 2)
        } else if tr > 0.0 {
            (1, 0, 1)
        } else {
            (0, 1, 1)
        }
    } else if det < 0.0 {
        (1, 1, 0)
    } else if a + c > 0.0 {
        (2, 0, 0)
    } else {
        (0, 2, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn to_na(a: &Dense) -> DMatrix<f64> {
        DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
    }

    fn eig_inertia(a: &Dense) -> Inertia {
        let eig = to_na(a).symmetric_eigen();
        let scale = a.max_abs().max(1.0);
        let mut out = Inertia::default();
        for &l in eig.eigenvalues.iter() {
            if l.abs() <= 1e-10 * scale {
                out.zero += 1;
            } else if l > 0.0 {
                out.positive += 1;
            } else {
                out.negative += 1;
            }
        }
        out
    }

    fn sym_from(n: usize, vals: &[f64]) -> Dense {
        let mut a = Dense::zeros(n, n);
        let mut it = vals.iter();
        for i in 0..n {
            for j in 0..=i {
                let v = *it.next().unwrap();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    #[test]
    fn zero_diagonal_needs_two_by_two() {
        let a = Dense::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let f = Ldl::factor(&a);
        assert_eq!(f.inertia(), Inertia::new(1, 1, 0));
        let x = f.solve(&[3.0, 5.0]);
        assert!((x[0] - 5.0).abs() < 1e-14 && (x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn detects_singular_duplicate_rows() {
        // [[1, 1, 1], [1, 0, 0], [1, 0, 0]]: rank 2
        let a = Dense::from_rows(&[&[1.0, 1.0, 1.0], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        let f = Ldl::factor(&a);
        assert_eq!(f.inertia(), eig_inertia(&a));
        assert!(f.is_singular());
    }

    #[test]
    fn saddle_point_inertia() {
        // [[H, Jᵀ], [J, -I/ρ]] with H = I₂, J = [1 1]
        let a = Dense::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0], &[1.0, 1.0, -0.01]]);
        assert_eq!(Ldl::factor(&a).inertia(), Inertia::new(2, 1, 0));
    }

    proptest! {
        #[test]
        fn solve_and_inertia_match_dense_oracles(
            n in 1usize..9,
            seed in proptest::collection::vec(-3.0f64..3.0, 45),
        ) {
            let a = sym_from(n, &seed);
            let f = Ldl::factor(&a);
            let expected = eig_inertia(&a);
            prop_assume!(expected.zero == 0);
            let na = to_na(&a);
            let cond = {
                let e = na.clone().symmetric_eigen();
                let mx = e.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let mn = e.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                mx / mn
            };
            prop_assume!(cond < 1e8);
            prop_assert_eq!(f.inertia(), expected);
            let b: Vec<f64> = (0..n).map(|i| (i as f64) - 1.5).collect();
            let x = f.solve(&b);
            let r = a.mul_vec(&x);
            let res = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(res <= 1e-9 * (1.0 + cond), "residual {res}");
        }
    }
}
