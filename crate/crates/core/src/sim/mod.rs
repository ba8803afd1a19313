//! Scenario configuration, the event loop, traces and run summaries.

mod config;
mod engine;
pub mod presets;
mod rng;
mod summary;
pub mod trace;

pub use config::{CalibratorConfig, ScenarioConfig};
pub use engine::{run_scenario, CalibrationLog, FineDecisionRecord, RunFailure, RunOutput, SweepRecord};
pub use rng::RngStreams;
pub use summary::{summarize, two_sigma, RunSummary, RF_LIMIT_PPM};
pub use trace::{read_trace, trace_to_string, write_trace, TraceRecord, TRACE_HEADER};
