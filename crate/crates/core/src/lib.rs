//! Constrained nonlinear optimization with Algorithm NCL.
//!
//! NCL is an augmented-Lagrangian method whose subproblems keep an explicit
//! residual vector `r`:
//!
//! ```txt
//!   minimize    φ(x) + y_kᵀ r + ½ ρ_k ‖r‖²
//!   subject to  c(x) + r = 0,   ℓ ≤ x ≤ u
//! ```
//!
//! The residual block keeps the constraint Jacobian `[J I]` at full row rank,
//! so each subproblem is well posed even when the original constraints are
//! degenerate. Subproblems are solved by the primal-dual interior-point
//! method in [`ip`], which exploits the `ρ I` block of the Newton system.
//!
//! The crate is `no_std` (with `alloc`). Wall-clock limits are supplied by the
//! caller through the [`Clock`] trait.
//!
//! Layout:
//!
//! * [`model`]: the problem abstraction, evaluation counters and the slack
//!   transformation.
//! * [`dsl`]: a small modeling language with symbolic derivatives.
//! * [`ncl_model`]: the subproblem wrapper over stacked variables `(x, r)`.
//! * [`ip`]: the interior-point subproblem solver and its KKT machinery.
//! * [`driver`]: the NCL outer loop.
//! * [`nls`]: nonlinear least squares through a single NCL subproblem.
//! * [`tax`]: generator for optimal tax policy models.
//! * [`catalog`]: built-in test problems.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod catalog;
pub mod clock;
pub mod driver;
pub mod dsl;
pub mod ip;
pub mod linalg;
pub(crate) mod math;
pub mod model;
pub mod ncl_model;
pub mod nls;
pub mod sci;
pub mod tax;

pub use clock::{Clock, NoClock};
pub use driver::{ncl_solve, NclError, NclOptions, NclOutcome, NclStatus, OuterState};
pub use model::{Counters, EvalError, Evaluator, Nlp, Point, Problem, Sense};
pub use ncl_model::NclProblem;
