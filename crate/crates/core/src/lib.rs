//! Deterministic discrete-event simulator of TCP flows sharing an AQM-managed
//! bottleneck.
//!
//! A [`ScenarioConfig`] describes the link, the queue discipline and the
//! flows; [`Simulation`] steps it and yields a [`MetricSample`] per flow at
//! every sampling instant; [`harness`] writes the JSONL log and summary.

pub mod aqm;
pub mod cca;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod netpath;
pub mod packet;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod transport;

pub use aqm::{QdiscConfig, QdiscKind};
pub use cca::CcaKind;
pub use error::Error;
pub use harness::{run_matrix, run_scenario, simulate, summarize, MatrixSpec, RunResult};
pub use metrics::{MetricSample, RunSummary};
pub use netpath::{JitterModel, LinkConfig};
pub use scenario::{preset, presets, Direction, FlowConfig, ScenarioConfig};
pub use sim::Simulation;
pub use time::SimTime;
