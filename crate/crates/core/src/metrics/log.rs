//! JSONL metric log: a header line followed by one [`MetricSample`] per
//! line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricSample;
use crate::scenario::ScenarioConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub const JITTER_DEFINITION: &str =
    "mean absolute difference of consecutive RTT samples within the goodput window, in ms";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub kind: String,
    pub scenario: ScenarioConfig,
    pub jitter_definition: String,
    pub sampling_period_s: f64,
    pub goodput_window_s: f64,
}

impl LogHeader {
    pub fn new(scenario: &ScenarioConfig) -> Self {
        LogHeader {
            schema_version: SCHEMA_VERSION,
            kind: "header".into(),
            scenario: scenario.clone(),
            jitter_definition: JITTER_DEFINITION.into(),
            sampling_period_s: scenario.sampling_period,
            goodput_window_s: scenario.goodput_window,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub header: LogHeader,
    pub samples: Vec<MetricSample>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("reading log: {0}")]
    Io(#[from] io::Error),
    #[error("log is empty (no header line)")]
    Empty,
    #[error("line {line}: {message} (last good line {last_good})")]
    Parse {
        line: usize,
        last_good: usize,
        message: String,
    },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Schema { found: u64 },
}

pub struct LogWriter<W: Write> {
    out: W,
    lines: usize,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W, header: &LogHeader) -> io::Result<Self> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        Ok(LogWriter { out, lines: 1 })
    }

    pub fn write_sample(&mut self, s: &MetricSample) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, s)?;
        self.out.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_jsonl(path: &Path, header: &LogHeader, samples: &[MetricSample]) -> io::Result<()> {
    let mut w = LogWriter::new(BufWriter::new(File::create(path)?), header)?;
    for s in samples {
        w.write_sample(s)?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<RunLog, LogError> {
    parse_jsonl(BufReader::new(File::open(path)?))
}

/// Parses a log. Unknown fields are ignored; the first malformed line is
/// reported with its 1-based number.
pub fn parse_jsonl(reader: impl BufRead) -> Result<RunLog, LogError> {
    let mut lines = reader.lines();
    let first = match lines.next() {
        Some(l) => l?,
        None => return Err(LogError::Empty),
    };
    let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| LogError::Parse {
        line: 1,
        last_good: 0,
        message: e.to_string(),
    })?;
    let version = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
    if version != u64::from(SCHEMA_VERSION) {
        return Err(LogError::Schema { found: version });
    }
    let header: LogHeader = serde_json::from_value(raw).map_err(|e| LogError::Parse {
        line: 1,
        last_good: 0,
        message: format!("header: {e}"),
    })?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: MetricSample = serde_json::from_str(&line).map_err(|e| LogError::Parse {
            line: line_no,
            last_good: line_no - 1,
            message: e.to_string(),
        })?;
        samples.push(s);
    }
    Ok(RunLog { header, samples })
}
