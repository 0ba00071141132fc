//! Built-in test problems.
//!
//! Small convex QPs and classic NLPs with known solutions, problems whose
//! constraint Jacobian is rank deficient everywhere, equality systems to be
//! solved in the least-squares sense, and two tax models.
//!
//! Known multipliers use the convention of [`Point`](crate::Point): `y` and
//! `z` satisfy `∇f − Jᵀy − z = 0` for the minimization view `f`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsl::{build_problem, parse_model};
use crate::math;
use crate::model::Problem;
use crate::tax::{build_tax_problem, TaxConfig};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
}

/// A documented solution. `z` is omitted when all bound multipliers vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownSolution {
    pub x: Vec<f64>,
    /// `None` for least-squares problems, whose systems have no solution in
    /// the ordinary sense.
    pub y: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
}

enum Source {
    Dsl(&'static str),
    Gen(fn() -> Problem),
}

pub struct Entry {
    pub name: &'static str,
    pub tags: &'static [&'static str],
    pub description: &'static str,
    source: Source,
    solution: fn() -> Option<KnownSolution>,
}

impl Entry {
    pub fn build(&self) -> Problem {
        match self.source {
            Source::Dsl(src) => {
                let mf = parse_model(src).expect("catalog models parse");
                build_problem(&mf, self.name)
            }
            Source::Gen(f) => f(),
        }
    }

    pub fn solution(&self) -> Option<KnownSolution> {
        (self.solution)()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(&tag)
    }
}

fn sol(x: &[f64], y: &[f64]) -> Option<KnownSolution> {
    Some(KnownSolution {
        x: x.to_vec(),
        y: Some(y.to_vec()),
        z: None,
    })
}

fn ls_sol(x: &[f64]) -> Option<KnownSolution> {
    Some(KnownSolution {
        x: x.to_vec(),
        y: None,
        z: None,
    })
}

fn none() -> Option<KnownSolution> {
    None
}

/// Random dense system `Ax = b` with `rows > cols`, entries uniform in
/// `[−1, 1]`.
fn linear_system(name: &str, rows: usize, cols: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut src = String::new();
    for j in 1..=cols {
        let _ = writeln!(src, "var x{j};");
    }
    let _ = writeln!(src, "subject to");
    for _ in 0..rows {
        let terms: Vec<String> = (1..=cols)
            .map(|j| format!("{}*x{j}", rng.random_range(-1.0..1.0)))
            .collect();
        let b: f64 = rng.random_range(-1.0..1.0);
        let _ = writeln!(src, "  {} == {b};", terms.join(" + "));
    }
    build_problem(&parse_model(&src).expect("generated model parses"), name)
}

fn exp_fit() -> Problem {
    let mut src = String::from("var a start 1; var b start 0;\nsubject to\n");
    for t in 0..5 {
        let d = 2.0 * math::exp(0.3 * t as f64);
        let _ = writeln!(src, "  a*exp(b*{t}) == {d};");
    }
    build_problem(&parse_model(&src).expect("generated model parses"), "nls-exp-fit")
}

fn tax(name: &str, cfg: TaxConfig) -> Problem {
    let p = build_tax_problem(&cfg).expect("preset configurations are valid");
    p.renamed(name)
}

const S: f64 = core::f64::consts::FRAC_1_SQRT_2;

static ENTRIES: &[Entry] = &[
    Entry {
        name: "qp2",
        tags: &["convex", "equality-only"],
        description: "nearest point to (2, 1) on x + y = 1",
        source: Source::Dsl("var x; var y; minimize (x-2)^2 + (y-1)^2; subject to x + y == 1;"),
        solution: || sol(&[1.0, 0.0], &[-2.0]),
    },
    Entry {
        name: "qp-bound",
        tags: &["convex", "inequality"],
        description: "x² with x ≥ 1 as a general constraint",
        source: Source::Dsl("var x start 3; minimize x^2; subject to x >= 1;"),
        solution: || sol(&[1.0], &[2.0]),
    },
    Entry {
        name: "qp3-eq",
        tags: &["convex", "equality-only"],
        description: "minimum-norm point on x1 + x2 + x3 = 3",
        source: Source::Dsl(
            "var x1; var x2; var x3; minimize x1^2 + x2^2 + x3^2; subject to x1 + x2 + x3 == 3;",
        ),
        solution: || sol(&[1.0, 1.0, 1.0], &[2.0]),
    },
    Entry {
        name: "qp-ineq",
        tags: &["convex", "inequality", "bounds"],
        description: "inequality QP with one active constraint",
        source: Source::Dsl(
            "var x1 >= 0 start 2; var x2 >= 0;\n\
             minimize (x1 - 1)^2 + (x2 - 2.5)^2;\n\
             subject to\n\
               x1 - 2*x2 + 2 >= 0;\n\
               -x1 - 2*x2 + 6 >= 0;\n\
               -x1 + 2*x2 + 2 >= 0;",
        ),
        solution: || sol(&[1.4, 1.7], &[0.8, 0.0, 0.0]),
    },
    Entry {
        name: "qp-box",
        tags: &["convex", "equality-only", "bounds"],
        description: "equality QP whose solution sits on an upper bound",
        source: Source::Dsl(
            "var x1 in [0, 1.5]; var x2; minimize (x1 - 3)^2 + x2^2; subject to x1 + x2 == 2;",
        ),
        solution: || {
            Some(KnownSolution {
                x: vec![1.5, 0.5],
                y: Some(vec![1.0]),
                z: Some(vec![-4.0, 0.0]),
            })
        },
    },
    Entry {
        name: "qp-range",
        tags: &["convex", "inequality"],
        description: "separable QP with an active range constraint",
        source: Source::Dsl(
            "var x1; var x2; var x3;\n\
             minimize (x1 - 1)^2 + (x2 - 2)^2 + (x3 - 3)^2;\n\
             subject to 0 <= x1 + x2 + x3 <= 3;",
        ),
        solution: || sol(&[0.0, 1.0, 2.0], &[-2.0]),
    },
    Entry {
        name: "hs6",
        tags: &["classic", "equality-only"],
        description: "Rosenbrock valley as a constraint",
        source: Source::Dsl(
            "var x1 start -1.2; var x2 start 1; minimize (1 - x1)^2; subject to 10*(x2 - x1^2) == 0;",
        ),
        solution: || sol(&[1.0, 1.0], &[0.0]),
    },
    Entry {
        name: "rosen-line",
        tags: &["classic", "equality-only"],
        description: "Rosenbrock function on the line x1 + x2 = 2",
        source: Source::Dsl(
            "var x1 start 0.5; var x2 start 1.5;\n\
             minimize 100*(x2 - x1^2)^2 + (1 - x1)^2;\n\
             subject to x1 + x2 == 2;",
        ),
        solution: || sol(&[1.0, 1.0], &[0.0]),
    },
    Entry {
        name: "hs7",
        tags: &["classic", "equality-only"],
        description: "log objective on a quartic curve",
        source: Source::Dsl(
            "var x1 start 2; var x2 start 2;\n\
             minimize log(1 + x1^2) - x2;\n\
             subject to (1 + x1^2)^2 + x2^2 == 4;",
        ),
        solution: || sol(&[0.0, math::sqrt(3.0)], &[-1.0 / (2.0 * math::sqrt(3.0))]),
    },
    Entry {
        name: "hs39",
        tags: &["classic", "equality-only"],
        description: "linear objective with two cubic/quadratic equalities",
        source: Source::Dsl(
            "var x1 start 2; var x2 start 2; var x3 start 2; var x4 start 2;\n\
             minimize -x1;\n\
             subject to\n\
               x2 - x1^3 - x3^2 == 0;\n\
               x1^2 - x2 - x4^2 == 0;",
        ),
        solution: || sol(&[1.0, 1.0, 0.0, 0.0], &[1.0, 1.0]),
    },
    Entry {
        name: "circle-max",
        tags: &["classic", "inequality", "maximize"],
        description: "largest x + y in a disc",
        source: Source::Dsl(
            "var x start 0.5; var y start 0.5; maximize x + y; subject to x^2 + y^2 <= 2;",
        ),
        solution: || sol(&[1.0, 1.0], &[-0.5]),
    },
    Entry {
        name: "hs71",
        tags: &["classic", "inequality", "bounds"],
        description: "product inequality and a sphere, boxed variables",
        source: Source::Dsl(
            "var x1 in [1, 5] start 1; var x2 in [1, 5] start 5;\n\
             var x3 in [1, 5] start 5; var x4 in [1, 5] start 1;\n\
             minimize x1*x4*(x1 + x2 + x3) + x3;\n\
             subject to\n\
               x1*x2*x3*x4 >= 25;\n\
               x1^2 + x2^2 + x3^2 + x4^2 == 40;",
        ),
        solution: none,
    },
    Entry {
        name: "licq-dup",
        tags: &["degenerate", "convex", "equality-only"],
        description: "the constraint x1 = 0 listed twice",
        source: Source::Dsl(
            "var x1 start 1; var x2 start 1; minimize x1^2 + x2^2; subject to x1 == 0; x1 == 0;",
        ),
        solution: || sol(&[0.0, 0.0], &[0.0, 0.0]),
    },
    Entry {
        name: "licq-dep3",
        tags: &["degenerate", "convex", "equality-only"],
        description: "a linear equality and a multiple of it",
        source: Source::Dsl(
            "var x1; var x2; var x3 start 1;\n\
             minimize (x1 - 1)^2 + (x2 - 2)^2 + x3^2;\n\
             subject to x1 + x2 == 1; 2*x1 + 2*x2 == 2; x3 == 0;",
        ),
        solution: || sol(&[0.0, 1.0, 0.0], &[-2.0, 0.0, 0.0]),
    },
    Entry {
        name: "licq-ring",
        tags: &["degenerate", "equality-only"],
        description: "the unit circle imposed twice",
        source: Source::Dsl(
            "var x1 start 0.5; var x2 start 0.2;\n\
             minimize (x1 - 1)^2 + (x2 - 1)^2;\n\
             subject to x1^2 + x2^2 == 1; x1^2 + x2^2 == 1;",
        ),
        solution: || sol(&[S, S], &[1.0 - core::f64::consts::SQRT_2, 0.0]),
    },
    Entry {
        name: "licq-sum",
        tags: &["degenerate", "equality-only"],
        description: "a plane, a multiple of it and its squared residual",
        source: Source::Dsl(
            "var x1 start 2; var x2; var x3;\n\
             minimize x1^2 + x2^2 + x3^2;\n\
             subject to\n\
               x1 + x2 + x3 == 3;\n\
               2*x1 + 2*x2 + 2*x3 == 6;\n\
               (x1 + x2 + x3 - 3)^2 == 0;",
        ),
        solution: || sol(&[1.0, 1.0, 1.0], &[2.0, 0.0, 0.0]),
    },
    Entry {
        name: "nls-lin-square",
        tags: &["nls", "equality-only"],
        description: "nonsingular 2×2 linear system",
        source: Source::Dsl("var x1; var x2; subject to 2*x1 + x2 == 3; x1 + 3*x2 == 5;"),
        solution: || ls_sol(&[0.8, 1.4]),
    },
    Entry {
        name: "nls-inconsistent",
        tags: &["nls", "equality-only"],
        description: "x = 0 and x = 1",
        source: Source::Dsl("var x start 2; subject to x == 0; x == 1;"),
        solution: || ls_sol(&[0.5]),
    },
    Entry {
        name: "nls-lin-over",
        tags: &["nls", "equality-only"],
        description: "random overdetermined 20×5 linear system",
        source: Source::Gen(|| linear_system("nls-lin-over", 20, 5, 1)),
        solution: none,
    },
    Entry {
        name: "nls-lin-over-b",
        tags: &["nls", "equality-only"],
        description: "random overdetermined 30×8 linear system",
        source: Source::Gen(|| linear_system("nls-lin-over-b", 30, 8, 2)),
        solution: none,
    },
    Entry {
        name: "nls-rosen",
        tags: &["nls", "equality-only"],
        description: "Rosenbrock residuals",
        source: Source::Dsl(
            "var x1 start -1.2; var x2 start 1; subject to 10*(x2 - x1^2) == 0; 1 - x1 == 0;",
        ),
        solution: || ls_sol(&[1.0, 1.0]),
    },
    Entry {
        name: "nls-exp-fit",
        tags: &["nls", "equality-only"],
        description: "exact exponential fit a·exp(b t), t = 0..4",
        source: Source::Gen(exp_fit),
        solution: || ls_sol(&[2.0, 0.3]),
    },
    Entry {
        name: "tax1d",
        tags: &["tax", "inequality", "bounds", "maximize"],
        description: "tax model with 12 wage types",
        source: Source::Gen(|| tax("tax1d", TaxConfig::tax1d())),
        solution: none,
    },
    Entry {
        name: "tax2d",
        tags: &["tax", "inequality", "bounds", "maximize"],
        description: "tax model with 12 wages and 5 elasticities",
        source: Source::Gen(|| tax("tax2d", TaxConfig::tax2d())),
        solution: none,
    },
];

/// All entries in registration order.
pub fn entries() -> &'static [Entry] {
    ENTRIES
}

pub fn entry(name: &str) -> Result<&'static Entry, CatalogError> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| CatalogError::UnknownProblem(name.into()))
}

/// A fresh instance with its own counters.
pub fn get(name: &str) -> Result<Problem, CatalogError> {
    Ok(entry(name)?.build())
}

/// Names carrying every tag in `tags`, in registration order.
pub fn list(tags: &[&str]) -> Vec<&'static str> {
    ENTRIES
        .iter()
        .filter(|e| tags.iter().all(|t| e.has_tag(t)))
        .map(|e| e.name)
        .collect()
}
