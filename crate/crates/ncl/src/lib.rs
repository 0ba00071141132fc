//! Command-line front end and benchmarking harness for `ncl-core`.
//!
//! This crate holds everything that needs `std`: the wall clock, problem
//! files, result tables ([`RunRecord`] as CSV or JSON), the suite runner,
//! performance profiles and the `ncl` binary's command definitions.

pub mod cli;
pub mod clock;
pub mod manifest;
pub mod plot;
pub mod profile;
pub mod record;
pub mod source;
pub mod suite;

pub use clock::StdClock;
pub use profile::{performance_profile, Metric, ProfileCurve, ProfileError};
pub use record::{run, RunOutput, RunRecord, RunStatus, Settings, SolverKind};
pub use source::{load_model, load_named, LoadError, Loaded};
pub use suite::{run_suite, SuiteSpec};
