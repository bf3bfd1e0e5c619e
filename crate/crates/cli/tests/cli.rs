// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qdi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdi-dpa"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = qdi(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const MULTI_DRIVER: &str = r#"{
  "gates": [
    {"id": "g1", "kind": "BUF", "inputs": ["x"], "output": "y"},
    {"id": "g2", "kind": "BUF", "inputs": ["x"], "output": "y"}
  ],
  "nets": [
    {"id": "x", "c_load_fF": 1, "c_par_fF": 0, "c_sc_fF": 0},
    {"id": "y", "c_load_fF": 1, "c_par_fF": 0, "c_sc_fF": 0}
  ],
  "channels": [],
  "inputs": [],
  "outputs": []
}"#;

const SINGLE_RAIL: &str = r#"{
  "gates": [{"id": "g1", "kind": "BUF", "inputs": ["x"], "output": "y"}],
  "nets": [
    {"id": "x", "c_load_fF": 1, "c_par_fF": 0, "c_sc_fF": 0},
    {"id": "y", "c_load_fF": 1, "c_par_fF": 0, "c_sc_fF": 0}
  ],
  "channels": [{"name": "a", "rails": ["x"]}],
  "inputs": ["a"],
  "outputs": []
}"#;

const UNBALANCED: &str = r#"{
  "gates": [
    {"id": "g1", "kind": "BUF", "inputs": ["a0"], "output": "y0"},
    {"id": "g2", "kind": "BUF", "inputs": ["y0"], "output": "z0"},
    {"id": "g3", "kind": "BUF", "inputs": ["a1"], "output": "y1"}
  ],
  "nets": [
    {"id": "a0", "c_load_fF": 1, "c_par_fF": 0, "c_sc_fF": 0},
    {"id": "a1", "c_load_fF": 1, "c_par_fF": 0, "c_sc_fF": 0},
    {"id": "y0", "c_load_fF": 1, "c_par_fF": 0, "c_sc_fF": 0},
    {"id": "y1", "c_load_fF": 1, "c_par_fF": 0, "c_sc_fF": 0},
    {"id": "z0", "c_load_fF": 1, "c_par_fF": 0, "c_sc_fF": 0}
  ],
  "channels": [{"name": "a", "rails": ["a0", "a1"]}],
  "inputs": ["a"],
  "outputs": []
}"#;

#[test]
fn check_valid_and_invalid() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["check", "builtin:dims-xor"]);
    fs::write(t.path().join("xor.json"), qdi_dpa_netlist_json()).unwrap();
    ok(t.path(), &["check", "xor.json"]);

    let missing = qdi(t.path(), &["check", "nope.json"]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.json"));

    fs::write(t.path().join("multi.json"), MULTI_DRIVER).unwrap();
    let o = qdi(t.path(), &["check", "multi.json"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("multiple drivers on net `y`"), "{err}");
}

fn qdi_dpa_netlist_json() -> String {
    serde_json::to_string_pretty(&qdi_dpa::builtin_dims_xor()).unwrap()
}

#[test]
fn analyze_reports_metrics_and_dot() {
    let t = TempDir::new().unwrap();
    let o = ok(
        t.path(),
        &["analyze", "builtin:dims-xor", "--dot", "--out", "out"],
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("N_c = 4"));
    let g = json(&t.path().join("out/graph.json"));
    assert_eq!(g["n_c"], 4);
    assert_eq!(g["balanced"], true);
    assert_eq!(g["schema_version"], 1);
    assert!(fs::read_to_string(t.path().join("out/graph.dot"))
        .unwrap()
        .starts_with("digraph"));

    fs::write(t.path().join("unbalanced.json"), UNBALANCED).unwrap();
    ok(t.path(), &["graph", "unbalanced.json", "--out", "u"]);
    let u = json(&t.path().join("u/graph.json"));
    assert_eq!(u["balanced"], false);
    assert!(!u["balance"]["offending"].as_array().unwrap().is_empty());
}

#[test]
fn simulate_is_byte_identical_across_reruns() {
    let t = TempDir::new().unwrap();
    let args = |out: &'static str| {
        vec![
            "simulate",
            "--netlist",
            "builtin:dims-xor",
            "--seed",
            "5",
            "--noise",
            "20",
            "--perturb",
            "c_l31=2x",
            "--out",
            out,
        ]
    };
    ok(t.path(), &args("r1"));
    ok(t.path(), &args("r2"));
    let a = fs::read(t.path().join("r1/traces.csv")).unwrap();
    let b = fs::read(t.path().join("r2/traces.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("run,plaintext,s0,"));
    let side = json(&t.path().join("r1/traces.json"));
    assert_eq!(side["target"], "dims-xor");
    assert_eq!(side["perturbations"][0], "c_l31=2x");
    assert_eq!(
        fs::read(t.path().join("r1/traces.json")).unwrap(),
        fs::read(t.path().join("r2/traces.json")).unwrap()
    );
}

#[test]
fn simulate_requires_seed() {
    let t = TempDir::new().unwrap();
    let o = qdi(t.path(), &["simulate", "--out", "x"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
}

#[test]
fn attack_recovers_key_rank_and_flags_symmetric_demo() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &[
            "simulate",
            "--seed",
            "1",
            "--key",
            "3c",
            "--imbalance",
            "c0=1.0",
            "--out",
            "leak",
        ],
    );
    ok(
        t.path(),
        &[
            "attack",
            "--traces",
            "leak/traces.csv",
            "--bit",
            "0",
            "--bias-dump",
            "3c",
            "--out",
            "leak",
        ],
    );
    let r = json(&t.path().join("leak/dpa.json"));
    assert_eq!(r["conclusive"], true);
    let ranking = r["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 256);
    let key = ranking.iter().find(|g| g["guess_hex"] == "3c").unwrap();
    assert_eq!(key["rank"], 1);
    assert_eq!(
        key["n0"].as_u64().unwrap() + key["n1"].as_u64().unwrap(),
        256
    );
    assert!(fs::read_to_string(t.path().join("leak/bias_3c.csv"))
        .unwrap()
        .starts_with("t_ps,T_uA\n"));

    ok(
        t.path(),
        &["simulate", "--seed", "1", "--key", "3c", "--out", "sym"],
    );
    let o = ok(
        t.path(),
        &["attack", "--traces", "sym/traces.csv", "--out", "sym"],
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("inconclusive"));
    assert_eq!(json(&t.path().join("sym/dpa.json"))["conclusive"], false);
}

#[test]
fn attack_config_file_supplies_the_selection() {
    let t = TempDir::new().unwrap();
    fs::write(
        t.path().join("exp.json"),
        r#"{"seed": 3, "key": "3c", "imbalance": ["c4=0.5"], "attack": {"algorithm": "AES-XOR", "bit": 4}, "out": "run"}"#,
    )
    .unwrap();
    ok(t.path(), &["simulate", "--config", "exp.json"]);
    ok(
        t.path(),
        &[
            "attack",
            "--config",
            "exp.json",
            "--traces",
            "run/traces.csv",
        ],
    );
    let r = json(&t.path().join("run/dpa.json"));
    assert_eq!(r["selection"]["bit"], 4);
    assert_eq!(r["conclusive"], true);
    // a flag overrides the config: bit 3 does not leak
    ok(
        t.path(),
        &[
            "attack",
            "--config",
            "exp.json",
            "--traces",
            "run/traces.csv",
            "--bit",
            "3",
            "--out",
            "b3",
        ],
    );
    assert_eq!(json(&t.path().join("b3/dpa.json"))["conclusive"], false);
}

#[test]
fn malformed_trace_csv_names_the_column() {
    let t = TempDir::new().unwrap();
    fs::write(
        t.path().join("bad.csv"),
        "run,plaintext,s0,s1\n0,00,1.0,x\n",
    )
    .unwrap();
    let o = qdi(t.path(), &["attack", "--traces", "bad.csv"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`s1`"));
}

#[test]
fn dissym_reports_are_deterministic() {
    let t = TempDir::new().unwrap();
    let args = |out: &'static str| {
        vec![
            "dissym",
            "builtin:add-round-key",
            "--placement",
            "flat",
            "--seed",
            "42",
            "--out",
            out,
        ]
    };
    ok(t.path(), &args("a"));
    ok(t.path(), &args("b"));
    let a = fs::read(t.path().join("a/dissym.json")).unwrap();
    assert_eq!(a, fs::read(t.path().join("b/dissym.json")).unwrap());
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert!(v["max_d_A"].as_f64().unwrap() > 0.0);
    assert_eq!(v["entries"].as_array().unwrap().len(), 24);

    fs::write(t.path().join("one.json"), SINGLE_RAIL).unwrap();
    let o = qdi(t.path(), &["dissym", "one.json"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rail"));
}

#[test]
fn pnr_compare_reports_area_ratio() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &["pnr-compare", "--seed", "0", "--seeds", "100", "--out", "p"],
    );
    let v = json(&t.path().join("p/pnr_compare.json"));
    assert_eq!(v["n_seeds"], 100);
    assert!((v["area_ratio"].as_f64().unwrap() - 1.2).abs() < 1e-12);
    assert!(v["flat"]["median"].as_f64().unwrap() > v["hierarchical"]["median"].as_f64().unwrap());
    assert_eq!(
        fs::read_to_string(t.path().join("p/flows.csv"))
            .unwrap()
            .lines()
            .count(),
        101
    );
}

#[test]
fn plots_render_from_csv_only() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &[
            "simulate",
            "--seed",
            "1",
            "--key",
            "3c",
            "--imbalance",
            "c0=1.0",
            "--out",
            "s",
        ],
    );
    ok(
        t.path(),
        &[
            "attack",
            "--traces",
            "s/traces.csv",
            "--bias-dump",
            "3c",
            "--out",
            "s",
        ],
    );
    ok(
        t.path(),
        &[
            "attack",
            "--traces",
            "s/traces.csv",
            "--bias-dump",
            "00",
            "--out",
            "s",
        ],
    );
    ok(
        t.path(),
        &["pnr-compare", "--seed", "0", "--seeds", "10", "--out", "s"],
    );

    ok(
        t.path(),
        &[
            "plot",
            "waveform",
            "--input",
            "s/waveform.csv",
            "--output",
            "w.svg",
        ],
    );
    let w = fs::read_to_string(t.path().join("w.svg")).unwrap();
    assert!(w.starts_with("<svg") && w.contains("time (ps)"));
    assert!(w.contains("generated by qdi-dpa"));

    ok(
        t.path(),
        &[
            "plot",
            "bias-overlay",
            "--input",
            "s/bias_3c.csv",
            "--input",
            "s/bias_00.csv",
            "--output",
            "b.svg",
            "--reproducible",
        ],
    );
    ok(
        t.path(),
        &[
            "plot",
            "bias-overlay",
            "--input",
            "s/bias_3c.csv",
            "--input",
            "s/bias_00.csv",
            "--output",
            "b2.svg",
            "--reproducible",
        ],
    );
    let b = fs::read_to_string(t.path().join("b.svg")).unwrap();
    assert_eq!(b, fs::read_to_string(t.path().join("b2.svg")).unwrap());
    assert!(!b.contains("generated by"));
    ok(
        t.path(),
        &[
            "plot",
            "dA-histogram",
            "--input",
            "s/flows.csv",
            "--output",
            "h.svg",
        ],
    );
    ok(
        t.path(),
        &[
            "plot",
            "peak-vs-guess",
            "--input",
            "s/peaks.csv",
            "--output",
            "g.svg",
        ],
    );

    fs::write(t.path().join("empty.csv"), "").unwrap();
    let o = qdi(
        t.path(),
        &[
            "plot",
            "waveform",
            "--input",
            "empty.csv",
            "--output",
            "e.svg",
        ],
    );
    assert_ne!(code(&o), 0);
}

#[test]
fn unknown_flags_are_usage_errors() {
    let t = TempDir::new().unwrap();
    assert_eq!(code(&qdi(t.path(), &["analyze", "--bogus"])), 2);
    assert_eq!(code(&qdi(t.path(), &["check", "builtin:nothing"])), 2);
}
