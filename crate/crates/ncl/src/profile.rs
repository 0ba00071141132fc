//! Dolan–Moré performance profiles.
//!
//! For solver `s` on problem `p` with metric value `t(p, s)` the ratio is
//! `t(p, s) / min_s' t(p, s')`; failed runs have ratio `+∞`. The profile of
//! `s` at `τ` is the fraction of problems with ratio `≤ τ`.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::record::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Wall-clock seconds. Noisy on small problems.
    Time,
    /// Constraint (residual) evaluations.
    Cons,
    /// Constraint Jacobian evaluations.
    Jac,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Time => "time",
            Metric::Cons => "cons",
            Metric::Jac => "jac",
        }
    }

    /// The metric of a run; `+∞` unless it ended first-order.
    pub fn of(self, r: &RunRecord) -> f64 {
        if !r.status.solved() {
            return f64::INFINITY;
        }
        match self {
            Metric::Time => r.time,
            Metric::Cons => r.n_cons as f64,
            Metric::Jac => r.n_jac as f64,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "time" | "t" => Ok(Metric::Time),
            "cons" | "c" => Ok(Metric::Cons),
            "jac" | "dc" => Ok(Metric::Jac),
            _ => Err(format!("unknown metric `{s}` (expected time, cons or jac)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("no runs to profile")]
    Empty,
    #[error("best {metric} on `{problem}` is zero, ratios are undefined")]
    DegenerateMetric { problem: String, metric: Metric },
    #[error("`{problem}` was run twice with {solver}")]
    DuplicateRun { problem: String, solver: String },
    #[error("{metric} of {solver} on `{problem}` is {value}")]
    BadValue {
        problem: String,
        solver: String,
        metric: Metric,
        value: f64,
    },
}

/// Step function of one solver. `values[i]` holds on
/// `[ratios[i], ratios[i+1])`; the function is zero left of `ratios[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub solver: String,
    /// Distinct finite ratios, increasing.
    pub ratios: Vec<f64>,
    pub values: Vec<f64>,
}

impl ProfileCurve {
    pub fn value_at(&self, tau: f64) -> f64 {
        match self.ratios.partition_point(|r| *r <= tau) {
            0 => 0.0,
            k => self.values[k - 1],
        }
    }

    /// Fraction of problems solved.
    pub fn solved(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Fraction of problems on which the solver is best or tied for best.
    pub fn best(&self) -> f64 {
        self.value_at(1.0)
    }
}

/// Profiles of every solver in `records`, in the order the solvers first
/// appear. A missing (problem, solver) pair counts as a failure.
pub fn performance_profile(records: &[RunRecord], metric: Metric) -> Result<Vec<ProfileCurve>, ProfileError> {
    if records.is_empty() {
        return Err(ProfileError::Empty);
    }
    let mut solvers: Vec<String> = Vec::new();
    let mut table: BTreeMap<&str, BTreeMap<String, f64>> = BTreeMap::new();
    for r in records {
        let s = r.solver.to_string();
        if !solvers.contains(&s) {
            solvers.push(s.clone());
        }
        let v = metric.of(r);
        if v.is_nan() || v < 0.0 {
            return Err(ProfileError::BadValue {
                problem: r.problem.clone(),
                solver: s,
                metric,
                value: v,
            });
        }
        if table.entry(&r.problem).or_default().insert(s.clone(), v).is_some() {
            return Err(ProfileError::DuplicateRun {
                problem: r.problem.clone(),
                solver: s,
            });
        }
    }
    let n_problems = table.len();
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); solvers.len()];
    for (problem, row) in &table {
        let best = row.values().copied().fold(f64::INFINITY, f64::min);
        if best == 0.0 {
            return Err(ProfileError::DegenerateMetric {
                problem: problem.to_string(),
                metric,
            });
        }
        if best.is_infinite() {
            continue;
        }
        for (k, s) in solvers.iter().enumerate() {
            if let Some(v) = row.get(s).filter(|v| v.is_finite()) {
                ratios[k].push(v / best);
            }
        }
    }
    Ok(solvers
        .into_iter()
        .zip(ratios)
        .map(|(solver, mut r)| {
            r.sort_by(f64::total_cmp);
            let mut curve = ProfileCurve {
                solver,
                ratios: Vec::new(),
                values: Vec::new(),
            };
            for (i, &x) in r.iter().enumerate() {
                let frac = (i + 1) as f64 / n_problems as f64;
                if curve.ratios.last() == Some(&x) {
                    *curve.values.last_mut().expect("same length") = frac;
                } else {
                    curve.ratios.push(x);
                    curve.values.push(frac);
                }
            }
            curve
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    solver: String,
    ratio: f64,
    value: f64,
}

/// Writes one CSV row per breakpoint.
pub fn write_curves<W: io::Write>(curves: &[ProfileCurve], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in curves {
        for (&ratio, &value) in c.ratios.iter().zip(&c.values) {
            out.serialize(CurveRow {
                solver: c.solver.clone(),
                ratio,
                value,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads curves written by [`write_curves`]. Solvers without a breakpoint
/// (no problem solved) are not in the file.
pub fn read_curves<R: io::Read>(r: R) -> csv::Result<Vec<ProfileCurve>> {
    let mut curves: Vec<ProfileCurve> = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: CurveRow = row?;
        match curves.iter_mut().find(|c| c.solver == row.solver) {
            Some(c) => {
                c.ratios.push(row.ratio);
                c.values.push(row.value);
            }
            None => curves.push(ProfileCurve {
                solver: row.solver,
                ratios: vec![row.ratio],
                values: vec![row.value],
            }),
        }
    }
    Ok(curves)
}
