//! Run bookkeeping: handles, the in-memory sample buffer each run streams
//! from, and the append-only index that survives restarts.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Semaphore};

use ccsim::harness::run_scenario_with;
use ccsim::{MetricSample, RunSummary, ScenarioConfig};

pub const SCHEMA_VERSION: u32 = 1;
const INDEX_FILE: &str = "index.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    Pending,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl RunState {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunState::Done | RunState::Failed | RunState::Cancelled)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunHandle {
    pub schema_version: u32,
    pub run_id: String,
    pub state: RunState,
    pub scenario: ScenarioConfig,
    /// Simulated seconds completed.
    pub progress: f64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
}

/// One buffered sample: its time and the exact log line.
#[derive(Clone, Debug)]
pub struct Line {
    pub t: f64,
    pub json: Arc<str>,
}

pub struct RunEntry {
    handle: Mutex<RunHandle>,
    lines: RwLock<Vec<Line>>,
    /// Set once no more samples will be appended.
    finished: AtomicBool,
    cancel: AtomicBool,
    /// Bumped on every append and on finish.
    tick: watch::Sender<u64>,
    /// Restored from the index: samples still live only in the log file.
    on_disk: AtomicBool,
}

impl RunEntry {
    fn new(handle: RunHandle, on_disk: bool) -> Self {
        RunEntry {
            finished: AtomicBool::new(handle.state.is_terminal()),
            handle: Mutex::new(handle),
            lines: RwLock::new(Vec::new()),
            cancel: AtomicBool::new(false),
            tick: watch::channel(0).0,
            on_disk: AtomicBool::new(on_disk),
        }
    }

    pub fn handle(&self) -> RunHandle {
        let mut h = self.handle.lock().unwrap().clone();
        if !self.on_disk.load(Ordering::Acquire) {
            h.samples = self.lines.read().unwrap().len();
        }
        h
    }

    pub fn is_finished(&self) -> bool {
        self.finished.load(Ordering::Acquire)
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.tick.subscribe()
    }

    /// Lines from `from` onwards.
    pub fn lines_from(&self, from: usize) -> Vec<Line> {
        let lines = self.lines.read().unwrap();
        lines.get(from..).map(<[Line]>::to_vec).unwrap_or_default()
    }

    fn push(&self, s: &MetricSample) {
        let json: Arc<str> = serde_json::to_string(s).expect("sample serializes").into();
        self.lines.write().unwrap().push(Line { t: s.t, json });
        self.handle.lock().unwrap().progress = s.t;
        self.tick.send_modify(|n| *n += 1);
    }

    fn finish(&self) {
        self.finished.store(true, Ordering::Release);
        self.tick.send_modify(|n| *n += 1);
    }

    /// Loads the sample lines of a restored run from its log.
    pub fn load_from_disk(&self) -> std::io::Result<()> {
        if !self.on_disk.load(Ordering::Acquire) {
            return Ok(());
        }
        let path = self.handle.lock().unwrap().log_path.clone();
        let mut lines = Vec::new();
        if let Some(path) = path {
            let file = fs::File::open(&path)?;
            for line in BufReader::new(file).lines().skip(1) {
                let line = line?;
                let s: MetricSample = serde_json::from_str(&line)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
                lines.push(Line { t: s.t, json: line.into() });
            }
        }
        *self.lines.write().unwrap() = lines;
        self.on_disk.store(false, Ordering::Release);
        Ok(())
    }
}

#[derive(Debug)]
pub enum CancelError {
    NotFound,
    /// Already in a terminal state.
    Conflict(RunState),
}

pub struct Registry {
    data_dir: PathBuf,
    runs: Mutex<HashMap<String, Arc<RunEntry>>>,
    order: Mutex<Vec<String>>,
    index: Mutex<fs::File>,
    slots: Arc<Semaphore>,
}

impl Registry {
    /// Opens (or creates) `data_dir` and restores runs from its index. Runs
    /// that were still pending or running when the service stopped are
    /// marked failed.
    pub fn open(data_dir: &Path, max_concurrent: usize) -> std::io::Result<Arc<Self>> {
        fs::create_dir_all(data_dir)?;
        let index_path = data_dir.join(INDEX_FILE);
        let mut restored: Vec<RunHandle> = Vec::new();
        if index_path.exists() {
            for line in BufReader::new(fs::File::open(&index_path)?).lines() {
                let line = line?;
                let Ok(h) = serde_json::from_str::<RunHandle>(&line) else { continue };
                match restored.iter_mut().find(|r| r.run_id == h.run_id) {
                    Some(slot) => *slot = h,
                    None => restored.push(h),
                }
            }
        }
        let index = OpenOptions::new().create(true).append(true).open(&index_path)?;
        let reg = Registry {
            data_dir: data_dir.to_path_buf(),
            runs: Mutex::new(HashMap::new()),
            order: Mutex::new(Vec::new()),
            index: Mutex::new(index),
            slots: Arc::new(Semaphore::new(max_concurrent.max(1))),
        };
        for mut h in restored {
            if !h.state.is_terminal() {
                h.state = RunState::Failed;
                h.error = Some("service stopped before the run finished".into());
                reg.persist(&h);
            }
            reg.insert(RunEntry::new(h, true));
        }
        Ok(Arc::new(reg))
    }

    fn insert(&self, entry: RunEntry) -> Arc<RunEntry> {
        let id = entry.handle.lock().unwrap().run_id.clone();
        let entry = Arc::new(entry);
        self.runs.lock().unwrap().insert(id.clone(), entry.clone());
        self.order.lock().unwrap().push(id);
        entry
    }

    fn persist(&self, h: &RunHandle) {
        let mut line = serde_json::to_string(h).expect("handle serializes");
        line.push('\n');
        let mut f = self.index.lock().unwrap();
        // The index is advisory for restarts; a failed append must not take
        // the run down with it.
        if let Err(e) = f.write_all(line.as_bytes()).and_then(|_| f.flush()) {
            eprintln!("warning: appending to run index: {e}");
        }
    }

    pub fn get(&self, id: &str) -> Option<Arc<RunEntry>> {
        self.runs.lock().unwrap().get(id).cloned()
    }

    pub fn list(&self) -> Vec<RunHandle> {
        let runs = self.runs.lock().unwrap();
        self.order.lock().unwrap().iter().map(|id| runs[id].handle()).collect()
    }

    /// Queues `cfg` and returns its handle immediately.
    pub fn create(self: &Arc<Self>, cfg: ScenarioConfig) -> RunHandle {
        let handle = RunHandle {
            schema_version: SCHEMA_VERSION,
            run_id: uuid::Uuid::new_v4().simple().to_string(),
            state: RunState::Pending,
            scenario: cfg,
            progress: 0.0,
            samples: 0,
            error: None,
            log_path: None,
            summary: None,
        };
        self.persist(&handle);
        let entry = self.insert(RunEntry::new(handle.clone(), false));
        let reg = self.clone();
        tokio::spawn(async move { reg.execute(entry).await });
        handle
    }

    async fn execute(self: Arc<Self>, entry: Arc<RunEntry>) {
        let _permit = self.slots.clone().acquire_owned().await.expect("semaphore open");
        let (cfg, out_dir) = {
            let mut h = entry.handle.lock().unwrap();
            if entry.cancel.load(Ordering::Acquire) {
                drop(h);
                entry.finish();
                self.persist(&entry.handle());
                return;
            }
            h.state = RunState::Running;
            (h.scenario.clone(), self.data_dir.join("runs").join(&h.run_id))
        };
        let worker = entry.clone();
        let result = tokio::task::spawn_blocking(move || {
            run_scenario_with(&cfg, &out_dir, &worker.cancel, |s| worker.push(s))
        })
        .await;
        {
            let mut h = entry.handle.lock().unwrap();
            match result {
                Ok(Ok(r)) => {
                    if h.state != RunState::Cancelled {
                        h.state = RunState::Done;
                    }
                    h.log_path = Some(r.log_path);
                    h.summary = Some(r.summary);
                }
                Ok(Err(e)) => {
                    h.state = RunState::Failed;
                    h.error = Some(e.to_string());
                }
                Err(e) => {
                    h.state = RunState::Failed;
                    h.error = Some(format!("run panicked: {e}"));
                }
            }
        }
        entry.finish();
        self.persist(&entry.handle());
    }

    /// Requests cancellation. The run keeps the samples produced so far and
    /// its partial log is summarized when the engine stops.
    pub fn cancel(&self, id: &str) -> Result<RunHandle, CancelError> {
        let entry = self.get(id).ok_or(CancelError::NotFound)?;
        {
            let mut h = entry.handle.lock().unwrap();
            if h.state.is_terminal() {
                return Err(CancelError::Conflict(h.state));
            }
            h.state = RunState::Cancelled;
            entry.cancel.store(true, Ordering::Release);
        }
        Ok(entry.handle())
    }
}
