//! Periodic sampling, fairness statistics, run summaries and the JSONL log.

pub mod fairness;
mod log;
mod sample;
mod summary;

pub use fairness::{coefficient_of_variation, convergence_time, jain_index, JainIndex};
pub use log::{
    parse_jsonl, read_jsonl, write_jsonl, LogError, LogHeader, LogWriter, RunLog, JITTER_DEFINITION,
    SCHEMA_VERSION,
};
pub use sample::{jitter_ms, FlowProbe, MetricSample};
pub use summary::{
    align, summarize_samples, AlignedSeries, FlowSummary, RunSummary, SummaryOptions,
    DEFAULT_CONVERGENCE_BAND, DEFAULT_WINDOW_START_FRACTION,
};
