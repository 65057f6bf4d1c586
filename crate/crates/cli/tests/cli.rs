use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn normbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normbound"))
        .args(args)
        .env_remove("NORMBOUND_THREADS")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = normbound(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON record")
}

fn code(args: &[&str]) -> i32 {
    normbound(args).status.code().expect("exited normally")
}

fn core_file(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel).display().to_string()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn constants_five_zero() {
    let r = json(&["constants", "--alpha", "5", "--beta", "0"]);
    assert_eq!(r["command"], "constants");
    let c = r["result"]["c"].as_f64().unwrap();
    assert!((c - 5.699).abs() < 1e-3, "{c}");
    assert_eq!(r["result"]["k"].as_f64(), Some(1.0));
    assert_eq!(r["result"]["k1"].as_f64(), Some(1.0));
}

#[test]
fn constants_three_zero() {
    let r = json(&["constants", "--alpha", "3", "--beta", "0"]);
    assert!((r["result"]["c"].as_f64().unwrap() - 4.4634).abs() < 1e-4);
}

#[test]
fn constants_on_the_diagonal_report_k2_as_unavailable() {
    let r = json(&["constants", "--alpha", "2", "--beta", "2"]);
    let res = &r["result"];
    assert!(res["k2"].is_null());
    assert!(res["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().starts_with("k2")));
    assert!(close(res["k1"].as_f64().unwrap(), 4.0, 1e-6));
    assert_eq!(res["k1_is_limit"], true);
}

#[test]
fn bound_methods() {
    let r = json(&["bound", "--x", "3", "--s", "1"]);
    let v = r["result"]["value"].as_f64().unwrap();
    assert!(close(v, 0.007693157043477958, 1e-12), "{v}");
    let zero = json(&["bound", "--x", "0", "--s", "1"]);
    assert_eq!(zero["result"]["value"].as_f64(), Some(1.0));
    let all = json(&["bound", "--x", "2", "--s", "1", "--method", "all"]);
    let res = &all["result"];
    let optimal = res["optimal"].as_f64().unwrap();
    assert!(optimal <= res["combined"].as_f64().unwrap());
    assert!(res["combined"].as_f64().unwrap() <= res["hoeffding"].as_f64().unwrap());
    let opt = json(&["bound", "--x", "2", "--s", "1", "--method", "optimal"]);
    assert_eq!(opt["result"]["value"].as_f64(), Some(optimal));
}

#[test]
fn bound_csv_has_fixed_columns() {
    let out = normbound(&["--format", "csv", "bound", "--x", "2", "--s", "1", "--method", "all"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,s,method,value");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("2,1,hoeffding,"));
}

#[test]
fn bound_sequence_round_trips_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seq.json");
    let doc = serde_json::json!({
        "schema": "normbound/1",
        "steps": [
            {"C": -1.0, "D": 1.0},
            {"s": 0.5},
            {"D": 1.0, "var": 0.25}
        ]
    });
    std::fs::write(&path, doc.to_string()).unwrap();
    let r = json(&["bound-sequence", "--file", path.to_str().unwrap(), "--x", "2"]);
    assert_eq!(r["input"]["document"], doc);
    let scales: Vec<f64> = r["result"]["step_scales"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(scales, vec![1.0, 0.5, 0.625]);
    let s = r["result"]["scale"].as_f64().unwrap();
    assert!(close(s, (1.0f64 + 0.25 + 0.390625).sqrt(), 1e-15));
    let expected = json(&["bound", "--x", "2", "--s", &s.to_string()]);
    let combined = r["result"]["combined"].as_f64().unwrap();
    assert!(close(combined, expected["result"]["value"].as_f64().unwrap(), 1e-14));
}

#[test]
fn rademacher_tail_is_below_both_bounds() {
    let r = json(&["rademacher", "--n", "4", "--x", "2"]);
    let res = &r["result"];
    assert_eq!(res["tail"].as_f64(), Some(0.0625));
    assert!(close(res["discrete_comparison"].as_f64().unwrap(), 0.2789657905998287, 1e-12));
    assert!(res["tail"].as_f64().unwrap() <= res["combined"].as_f64().unwrap());
}

#[test]
fn verification_suites_pass() {
    let lemma = json(&["verify", "lemma", "--r-steps", "50", "--t-step", "0.1"]);
    assert_eq!(lemma["result"]["passed"], true);
    assert_eq!(lemma["result"]["checks"].as_u64(), Some(51 * 321));
    let moments = json(&["verify", "moments", "--model", "rademacher:10"]);
    assert_eq!(moments["result"]["passed"], true);
    assert_eq!(moments["result"]["checks"].as_u64(), Some(49));
    let chain = json(&["verify", "constants-chain", "--alphas", "1.5,2,3,5"]);
    assert_eq!(chain["result"]["failed"].as_u64(), Some(0));
    for model in ["sign-adapted:6", "drifted:0.4:0.05:5", "one-sided:0.2:8"] {
        let tails = json(&["verify", "tails", "--model", model]);
        assert_eq!(tails["result"]["passed"], true, "{model}");
    }
    let maximal = json(&["verify", "maximal", "--model", "rademacher:8"]);
    assert_eq!(maximal["result"]["passed"], true);
}

#[test]
fn bundled_model_files_verify() {
    for name in ["sign_adapted", "one_sided", "drifted"] {
        let path = core_file(&format!("models/{name}.json"));
        for suite in ["moments", "tails"] {
            let r = json(&["verify", suite, "--model", &path]);
            assert_eq!(r["result"]["passed"], true, "{name} {suite}");
        }
    }
}

#[test]
fn too_small_a_scale_is_a_violation() {
    let out = normbound(&["verify", "tails", "--model", "rademacher:10", "--scale", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["result"]["passed"], false);
    assert!(r["result"]["failures"].as_array().unwrap().len() > 0);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["bound", "--x", "1", "--s", "-1"]), 2);
    assert_eq!(code(&["constants", "--alpha", "2"]), 2);
    assert_eq!(code(&["bound-sequence", "--file", "/no/such/file", "--x", "1"]), 2);
    assert_eq!(code(&["verify", "moments", "--model", "rademacher:x"]), 2);
    assert_eq!(code(&["verify", "moments", "--model", "rademacher:30"]), 4);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema":"normbound/1","steps":[{"bogus":1}]}"#).unwrap();
    let out = normbound(&["bound-sequence", "--file", bad.to_str().unwrap(), "--x", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("steps[0].bogus"));

    let skewed = dir.path().join("skewed.json");
    std::fs::write(
        &skewed,
        r#"{"schema":"normbound/1","kind":"martingale","steps":[{"type":"iid","support":[1,-1],"probs":[0.6,0.4],"C":-1,"D":1,"s":1}]}"#,
    )
    .unwrap();
    let out = normbound(&["verify", "moments", "--model", skewed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("steps[0].default"));
}

#[test]
fn out_flag_writes_the_record_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("record.json");
    let out = normbound(&["--out", path.to_str().unwrap(), "bound", "--x", "1", "--s", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["command"], "bound");
}

#[test]
fn lipschitz_with_no_thresholds_reports_scales_only() {
    let corpus = core_file("corpus/lipschitz.json");
    let r = json(&["lipschitz", "--file", &corpus]);
    let entries = r["result"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 8);
    let first = &entries[0];
    assert_eq!(first["name"], "sum-signs-4");
    assert_eq!(first["analysis"]["passed"], true);
    assert!(first["tails"].as_array().unwrap().is_empty());

    let with_x = json(&["lipschitz", "--file", &corpus, "--x", "1,2"]);
    for e in with_x["result"]["entries"].as_array().unwrap() {
        assert_eq!(e["tails"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn simulation_does_not_depend_on_thread_count() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_normbound"))
            .args(["simulate", "--model", "rademacher:12", "--paths", "20000", "--seed", "7"])
            .env("NORMBOUND_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    assert_eq!(run("1"), run("4"));
    let explicit = normbound(&["--threads", "2", "simulate", "--model", "rademacher:12", "--paths", "20000", "--seed", "7"]);
    assert_eq!(explicit.stdout, run("1"));
}
