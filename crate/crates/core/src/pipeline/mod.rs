//! Run orchestration: configuration, sample cache and the run modes behind
//! the command line.

pub mod config;
pub mod problem;
pub mod run;

pub use config::{RuleChoice, RunConfig, MAX_LEVEL};
pub use problem::{report_points, CacheStats, Problem, SampleCache};
pub use run::{forward_estimate, run, sphere_errors, sphere_points, truth_parameter, Mode, RunManifest, RunOutcome, VerifyRow};
