use std::sync::atomic::AtomicBool;

use ccsim::harness::{run_scenario_with, CellOutcome};
use ccsim::metrics::read_jsonl;
use ccsim::{preset, run_matrix, run_scenario, summarize, CcaKind, Direction, MatrixSpec, QdiscKind};

#[test]
fn run_writes_log_and_summary_that_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("fig5c", 4).unwrap();
    cfg.duration = 20.0;
    let r = run_scenario(&cfg, dir.path()).unwrap();
    let log = read_jsonl(&r.log_path).unwrap();
    assert_eq!(log.samples.len(), 200 * 2);
    assert_eq!(log.header.scenario, cfg);
    assert_eq!(summarize(&r.log_path).unwrap(), r.summary);
    let on_disk: ccsim::RunSummary =
        serde_json::from_str(&std::fs::read_to_string(&r.summary_path).unwrap()).unwrap();
    assert_eq!(on_disk, r.summary);
}

#[test]
fn cancelled_run_leaves_a_readable_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("fig7b", 1).unwrap();
    let cancel = AtomicBool::new(false);
    let mut seen = 0;
    let r = run_scenario_with(&cfg, dir.path(), &cancel, |_| {
        seen += 1;
        if seen == 100 {
            cancel.store(true, std::sync::atomic::Ordering::Relaxed);
        }
    })
    .unwrap();
    let log = read_jsonl(&r.log_path).unwrap();
    assert_eq!(log.samples.len(), 100);
    assert!(log.samples.last().unwrap().t < 120.0);
}

#[test]
fn matrix_runs_every_cell_and_writes_an_index() {
    let dir = tempfile::tempdir().unwrap();
    let spec = MatrixSpec {
        ccas: vec![CcaKind::Bbr2, CcaKind::Bbr3],
        aqms: vec![QdiscKind::Pfifo, QdiscKind::FqCodel],
        directions: vec![Direction::Download],
        seeds: vec![1, 2],
    };
    assert_eq!(spec.scenarios().len(), 8);
    let report = run_matrix(&spec, dir.path()).unwrap();
    assert_eq!(report.cells.len(), 8);
    assert_eq!(report.failures(), 0);
    for c in &report.cells {
        let CellOutcome::Ok { log_path, jain_index, .. } = &c.outcome else {
            panic!("cell failed: {c:?}")
        };
        assert!(log_path.exists());
        assert!((0.5..=1.0).contains(jain_index));
    }
    let index: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(&report.index_path).unwrap()).unwrap();
    assert_eq!(index.len(), 8);
    assert_eq!(index[0]["status"], "ok");
}

#[test]
fn empty_matrix_dimension_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = MatrixSpec::full(vec![]);
    spec.aqms.clear();
    let err = run_matrix(&spec, dir.path()).unwrap_err().to_string();
    assert!(err.contains("seeds") && err.contains("aqms"), "{err}");
}
