use std::path::Path;
use std::process::{Command, Output};

fn qst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qst"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn qst")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let ens = dir.path().join("ens.json");
    let report = dir.path().join("report.json");

    let out = qst(&["generate", "--q", "3", "--r", "1", "--seed", "5", "--out", p(&state), "--ensemble-out", p(&ens), "--eta", "0.75"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for solver in ["ls", "admm_simple", "admm_robust"] {
        let out = qst(&["solve", "--state", p(&state), "--ensemble", p(&ens), "--solver", solver, "--out", p(&report)]);
        assert!(out.status.success(), "{solver}: {}", String::from_utf8_lossy(&out.stderr));
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(json["solver"], solver);
        assert!(json["error"].as_f64().unwrap() < 0.5);
        assert!(json["rho_hat"].is_object() || json["rho_hat"].is_array());
    }
}

#[test]
fn binary_state_round_trip_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.bin");
    let ens = dir.path().join("ens.json");
    assert!(qst(&["generate", "--q", "2", "--out", p(&state), "--ensemble-out", p(&ens), "--m", "16"]).status.success());
    let out = qst(&["solve", "--state", p(&state), "--ensemble", p(&ens), "--solver", "ls"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["error"].as_f64().unwrap() < 1e-10);
}

#[test]
fn consensus_demo_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let out = qst(&["consensus-demo", "--agents", "3", "--q", "2", "--rounds", "50", "--out", p(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("round,max_disagreement,max_step,measurement_residual"));
    assert!(lines.count() >= 1);
}

#[test]
fn sweep_flags_produce_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = qst(&["sweep", "--q", "2", "--eta", "0.5,1.0", "--trials", "2", "--out", p(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let keys: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_owned(), f.next().unwrap().to_owned())
        })
        .collect();
    assert_eq!(keys.len(), 4);
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.parse::<f64>().unwrap().total_cmp(&b.1.parse().unwrap())));
    assert_eq!(keys, sorted);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let csv = dir.path().join("x.csv");

    // Unreadable input is an I/O failure.
    let out = qst(&["solve", "--state", p(&missing), "--ensemble", p(&missing)]);
    assert_eq!(out.status.code(), Some(4));

    // Invalid parameters.
    let out = qst(&["sweep", "--q", "2", "--eta", "1.5", "--trials", "1", "--out", p(&csv)]);
    assert_eq!(out.status.code(), Some(2));

    let out = qst(&["sweep", "--q", "2", "--eta", "1.0,0.5", "--trials", "1", "--out", p(&csv)]);
    assert_eq!(out.status.code(), Some(2));

    // Too many measurements for the register.
    let out = qst(&["generate", "--q", "1", "--out", p(&dir.path().join("s.json")), "--ensemble-out", p(&dir.path().join("e.json")), "--m", "5"]);
    assert_eq!(out.status.code(), Some(2));

    // Topology that disagrees with --agents.
    let topo = dir.path().join("topo.json");
    std::fs::write(&topo, r#"{"n": 3, "edges": [[0, 1], [1, 2]]}"#).unwrap();
    let out = qst(&["consensus-demo", "--agents", "4", "--topology", p(&topo), "--q", "2"]);
    assert_eq!(out.status.code(), Some(2));

    // Disconnected topology.
    std::fs::write(&topo, r#"{"n": 3, "edges": [[0, 1]]}"#).unwrap();
    let out = qst(&["consensus-demo", "--agents", "3", "--topology", p(&topo), "--q", "2"]);
    assert_eq!(out.status.code(), Some(2));

    // Writing into a directory that does not exist.
    let out = qst(&["sweep", "--q", "1", "--eta", "1.0", "--trials", "1", "--out", p(&dir.path().join("no/such/dir.csv"))]);
    assert_eq!(out.status.code(), Some(4));
}
