use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrecon"))
        .args(args)
        .env_remove("QRECON_SEED")
        .env_remove("QRECON_FORMAT")
        .output()
        .expect("binary runs")
}

fn run_to_file(dir: &Path, name: &str, args: &[&str]) -> (Output, Vec<u8>) {
    let path = dir.join(name);
    let mut all = args.to_vec();
    let p = path.to_str().unwrap();
    all.extend(["--out", p]);
    let out = qrecon(&all);
    let bytes = std::fs::read(&path).unwrap_or_default();
    (out, bytes)
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn verify_table_passes_with_known_cells() {
    let dir = tempfile::tempdir().unwrap();
    let (out, bytes) = run_to_file(dir.path(), "table.json", &["verify-table", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&bytes);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["seed"], 7);
    assert_eq!(doc["pass"], true);
    let rows = doc["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    let cells = |state: &str| {
        rows.iter()
            .find(|r| r["state"] == state)
            .unwrap()["cells"]
            .as_array()
            .unwrap()
            .clone()
    };
    let w = cells("W_ABCD");
    let i_bc = w.iter().find(|c| c["column"] == "I(B:C)").unwrap();
    let want = 3.0 - 1.5 * 3f64.log2();
    assert!((i_bc["measured"].as_f64().unwrap() - want).abs() < 1e-9);
    let g = cells("GHZ_ABCD");
    let k = g.iter().find(|c| c["column"] == "kappa(AB:CD)").unwrap();
    assert!((k["measured"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn json_output_is_deterministic_and_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = run_to_file(dir.path(), "a.json", &["petz-demo", "--pairs", "10", "--seed", "3"]);
    let (_, b) = run_to_file(dir.path(), "b.json", &["petz-demo", "--pairs", "10", "--seed", "3"]);
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    // 17 significant digits: one leading digit and 16 after the point.
    assert!(text.contains("\"mi_tol\":1.0000000000000000e-8"));
    let (_, c) = run_to_file(dir.path(), "c.json", &["petz-demo", "--pairs", "10", "--seed", "4"]);
    assert_ne!(text.as_bytes(), c.as_slice());
}

#[test]
fn matrix_sweep_csv_has_named_and_random_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (out, bytes) = run_to_file(dir.path(), "sweep.csv", &["matrix-sweep", "--count", "40", "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers().unwrap().clone();
    for col in ["seed", "shape", "rank", "eps", "gamma", "tau", "err_measured", "bound_tight", "bound_7eps", "bound_5eps"] {
        assert!(header.iter().any(|h| h == col), "missing column {col}");
    }
    let idx = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.iter().filter(|r| r[idx("instance")].starts_with("random/")).count(), 40);
    assert!(rows.iter().any(|r| r[idx("instance")].starts_with("divergence/")));
    assert!(rows.iter().any(|r| r[idx("instance")].starts_with("optimality/")));
    for r in rows.iter().filter(|r| r[idx("instance")].starts_with("exact/")) {
        assert!(r[idx("err_measured")].parse::<f64>().unwrap() <= 1e-10);
    }
    for r in &rows {
        assert_eq!(&r[idx("seed")], "11");
        assert_eq!(&r[idx("pass")], "true");
    }
    let keys: Vec<&str> = rows.iter().map(|r| r.get(idx("instance")).unwrap()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn chain_demo_outcomes() {
    let ok = qrecon(&["chain-demo", "--state", "cghz", "--scheme", "marginals", "--n", "6"]);
    assert_eq!(ok.status.code(), Some(0));
    let doc = json(&ok.stdout);
    assert_eq!(doc["result"]["observed"], "success");
    assert!(doc["result"]["trace_distance"].as_f64().unwrap() < 1e-9);

    let fail = qrecon(&["chain-demo", "--state", "ghz", "--scheme", "marginals", "--n", "6"]);
    assert_eq!(fail.status.code(), Some(0));
    let doc = json(&fail.stdout);
    assert_eq!(doc["result"]["observed"], "failure");
    assert_eq!(doc["result"]["first_failure"], 5);

    let add = qrecon(&["chain-demo", "--state", "addstate", "--scheme", "swap-longrange", "--n", "6"]);
    assert_eq!(add.status.code(), Some(0));

    let wrong = qrecon(&["chain-demo", "--state", "ghz", "--scheme", "marginals", "--expect", "success"]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn chain_demo_csv_lists_steps() {
    let out = qrecon(&["chain-demo", "--state", "w", "--scheme", "mpo-marginals", "--n", "5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("seed,state,scheme,k,"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(qrecon(&["chain-demo", "--state", "nonsense", "--scheme", "marginals"]).status.code(), Some(2));
    assert_eq!(qrecon(&["chain-demo", "--state", "ghz", "--scheme", "nonsense"]).status.code(), Some(2));
    assert_eq!(qrecon(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(qrecon(&["matrix-sweep", "--max-dim", "3", "--max-rank", "3"]).status.code(), Some(2));
}

#[test]
fn env_overrides_seed() {
    let out = Command::new(env!("CARGO_BIN_EXE_qrecon"))
        .args(["povm-check", "--maps", "4"])
        .env("QRECON_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out.stdout)["seed"], 99);
}

#[test]
fn povm_and_selector_checks_pass() {
    let p = qrecon(&["povm-check", "--maps", "12"]);
    assert_eq!(p.status.code(), Some(0));
    let doc = json(&p.stdout);
    assert!(doc["result"]["non_cp_maps"].as_u64().unwrap() > 0);
    let s = qrecon(&["selector-check", "--n", "4", "--markov", "2"]);
    assert_eq!(s.status.code(), Some(0), "{}", String::from_utf8_lossy(&s.stderr));
}
