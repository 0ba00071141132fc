//! Dense and triplet matrices, vector helpers, and a symmetric indefinite
//! factorization that reports inertia.

mod dense;
mod ldl;
mod triplets;

pub use dense::Dense;
pub use ldl::{Inertia, Ldl, Pivot};
pub use triplets::Triplets;

use crate::math;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    math::sqrt(dot(v, v))
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
