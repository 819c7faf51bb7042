use std::path::Path;
use std::process::{Command, Output};

fn ccsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccsim"))
        .args(args)
        .env("CCSIM_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_preset_then_summarize_matches() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccsim(&["run", "--preset", "fig5b", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("jain"));
    let log = dir.path().join("fig5b-seed3.jsonl");
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 1 + 2 * 1200);

    let o = ccsim(&["summarize", log.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let printed: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let stored: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig5b-seed3.summary.json")).unwrap()).unwrap();
    assert_eq!(printed, stored);
}

#[test]
fn scenario_file_with_explicit_out() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    std::fs::write(
        &file,
        r#"{"name": "short", "duration": 3, "flows": [{"flow_id": 7, "cca": "bbr2"}], "seed": 5}"#,
    )
    .unwrap();
    let out = dir.path().join("elsewhere");
    let o = ccsim(
        &["run", "--scenario", file.to_str().unwrap(), "--out", out.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("short-seed5.jsonl").exists());
}

#[test]
fn validation_errors_exit_1_and_list_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(
        &file,
        r#"{"name": "bad", "duration": 0, "flows": [{"flow_id": 1, "cca": "cubic"}, {"flow_id": 1, "cca": "bbr3"}]}"#,
    )
    .unwrap();
    let o = ccsim(&["run", "--scenario", file.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("duration") && err.contains("duplicate flow_id"), "{err}");

    assert_eq!(ccsim(&["run", "--preset", "nope"], dir.path()).status.code(), Some(1));
    assert_eq!(ccsim(&["matrix", "--ccas", "reno"], dir.path()).status.code(), Some(1));
    assert_eq!(ccsim(&["run"], dir.path()).status.code(), Some(1));
}

#[test]
fn truncated_log_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ccsim(&["run", "--preset", "bbr3-solo"], dir.path()).status.success());
    let log = dir.path().join("bbr3-solo-seed1.jsonl");
    let text = std::fs::read_to_string(&log).unwrap();
    let cut = &text[..text.len() - 40];
    std::fs::write(&log, cut).unwrap();
    let o = ccsim(&["summarize", log.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn matrix_writes_one_log_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccsim(
        &["matrix", "--ccas", "bbr1,bbr2,bbr3", "--aqms", "pfifo", "--directions", "up", "--seeds", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("ok")).count(), 3);
    let index: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("matrix-index.json")).unwrap()).unwrap();
    assert_eq!(index.len(), 3);
}

#[test]
fn list_presets_includes_figures() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccsim(&["list-presets"], dir.path());
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["fig5a", "fig6c", "fig7b", "cubic-vs-bbr3-pfifo-up", "bbr3-solo"] {
        assert!(s.lines().any(|l| l.starts_with(name)), "missing {name}");
    }
}
