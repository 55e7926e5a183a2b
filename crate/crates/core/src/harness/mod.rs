//! Experiment orchestration: configuration, random streams, user drops, scenario
//! runners and result export.

pub mod config;
pub mod experiment;
pub mod placement;
pub mod results;
pub mod rng;
pub mod validate;

pub use config::{ExperimentConfig, Scenario, Strategy};
pub use experiment::{run_experiment, run_experiment_detailed, ExperimentOutput, SampleSeries};
pub use placement::place_users;
pub use results::{ResultRow, ResultTable};
pub use validate::{run_invariant_suite, CheckOutcome};
