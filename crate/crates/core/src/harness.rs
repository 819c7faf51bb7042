//! Batch entry points: one scenario to a log plus summary, or a matrix of
//! scenarios run in parallel.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aqm::QdiscKind;
use crate::cca::CcaKind;
use crate::error::Error;
use crate::metrics::{read_jsonl, summarize_samples, LogHeader, LogWriter, MetricSample, RunSummary, SummaryOptions};
use crate::scenario::{competition, Direction, ScenarioConfig};
use crate::sim::Simulation;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub log_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
    pub wall_clock_s: f64,
}

/// Runs `cfg` to completion, writing `<stem>.jsonl` and `<stem>.summary.json`
/// under `out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunResult, Error> {
    let cancel = AtomicBool::new(false);
    run_scenario_with(cfg, out_dir, &cancel, |_| {})
}

/// Like [`run_scenario`], but calls `on_sample` for each sample as it is
/// produced and stops early once `cancel` is set. A cancelled run still
/// leaves a valid (shorter) log and summary.
pub fn run_scenario_with(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    cancel: &AtomicBool,
    mut on_sample: impl FnMut(&MetricSample),
) -> Result<RunResult, Error> {
    let started = Instant::now();
    let mut sim = Simulation::new(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let stem = cfg.file_stem();
    let log_path = out_dir.join(format!("{stem}.jsonl"));
    let summary_path = out_dir.join(format!("{stem}.summary.json"));

    let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut writer = LogWriter::new(BufWriter::new(file), &LogHeader::new(cfg)).map_err(|e| Error::io(&log_path, e))?;
    let mut samples = Vec::with_capacity(cfg.sample_count() as usize * cfg.flows.len());
    while !cancel.load(Ordering::Relaxed) {
        let Some(batch) = sim.next_samples()? else { break };
        for s in batch {
            writer.write_sample(&s).map_err(|e| Error::io(&log_path, e))?;
            on_sample(&s);
            samples.push(s);
        }
    }
    writer.finish().map_err(|e| Error::io(&log_path, e))?;

    let summary = summarize_samples(cfg, &samples, SummaryOptions::default());
    write_json(&summary_path, &summary)?;
    Ok(RunResult {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        log_path,
        summary_path,
        summary,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

/// Runs a scenario in memory and returns its samples; nothing is written.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Vec<MetricSample>, Error> {
    let mut sim = Simulation::new(cfg)?;
    let mut out = Vec::with_capacity(cfg.sample_count() as usize * cfg.flows.len());
    sim.run(|s| out.push(s.clone()))?;
    Ok(out)
}

/// Recomputes the summary of an existing log.
pub fn summarize(log: &Path) -> Result<RunSummary, Error> {
    let run = read_jsonl(log)?;
    Ok(summarize_samples(&run.header.scenario, &run.samples, SummaryOptions::default()))
}

/// Cartesian product of competition scenarios: CUBIC against each listed
/// CCA, for every AQM, direction and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub ccas: Vec<CcaKind>,
    pub aqms: Vec<QdiscKind>,
    pub directions: Vec<Direction>,
    pub seeds: Vec<u64>,
}

impl MatrixSpec {
    pub fn full(seeds: Vec<u64>) -> Self {
        MatrixSpec {
            ccas: vec![CcaKind::Bbr1, CcaKind::Bbr2, CcaKind::Bbr3],
            aqms: QdiscKind::ALL.to_vec(),
            directions: Direction::ALL.to_vec(),
            seeds,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let mut errs = Vec::new();
        for (name, empty) in [
            ("ccas", self.ccas.is_empty()),
            ("aqms", self.aqms.is_empty()),
            ("directions", self.directions.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                errs.push(format!("matrix: `{name}` is empty"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &cca in &self.ccas {
            for &aqm in &self.aqms {
                for &dir in &self.directions {
                    for &seed in &self.seeds {
                        out.push(competition(cca, aqm, dir, seed));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixCell {
    pub scenario: String,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok {
        log_path: PathBuf,
        summary_path: PathBuf,
        jain_index: f64,
    },
    Failed {
        error: String,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixReport {
    pub cells: Vec<MatrixCell>,
    pub index_path: PathBuf,
}

impl MatrixReport {
    pub fn failures(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.outcome, CellOutcome::Failed { .. }))
            .count()
    }
}

/// Runs every cell in parallel. A failing cell is recorded and does not stop
/// the others; `matrix-index.json` lists all cells in a stable order.
pub fn run_matrix(spec: &MatrixSpec, out_dir: &Path) -> Result<MatrixReport, Error> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cells: Vec<MatrixCell> = spec
        .scenarios()
        .par_iter()
        .map(|cfg| MatrixCell {
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            outcome: match run_scenario(cfg, out_dir) {
                Ok(r) => CellOutcome::Ok {
                    log_path: r.log_path,
                    summary_path: r.summary_path,
                    jain_index: r.summary.jain_index,
                },
                Err(e) => CellOutcome::Failed { error: e.to_string() },
            },
        })
        .collect();
    let index_path = out_dir.join("matrix-index.json");
    write_json(&index_path, &cells)?;
    Ok(MatrixReport { cells, index_path })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(std::io::Error::from)
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
