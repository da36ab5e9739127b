use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dagdecode::io::serialize_instance;
use dagdecode::Instance;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dagdecode"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_out(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn i2() -> Instance {
    Instance::from_probabilities(&[vec![0.0, 1.0], vec![0.0, 0.0]], &[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
}

fn i4() -> Instance {
    Instance::from_probabilities(
        &[
            vec![0.0, 0.7, 0.2, 0.1],
            vec![0.0, 0.0, 0.6, 0.4],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0; 4],
        ],
        &[vec![0.9, 0.1], vec![0.4, 0.6], vec![0.8, 0.2], vec![0.3, 0.7]],
    )
    .unwrap()
}

fn write(dir: &Path, name: &str, inst: &Instance) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serialize_instance(inst, None)).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decode_joint_viterbi_i4() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "I4.json", &i4());
    let doc = json_out(&run(&["decode", "--strategy", "joint-viterbi", "--beta", "0", "--input", s(&f)]));
    let h = &doc["hypothesis"];
    assert_eq!(h["path"], serde_json::json!([1, 2, 3, 4]));
    assert_eq!(h["tokens"], serde_json::json!([0, 1, 0, 1]));
    assert!((h["joint_logprob"].as_f64().unwrap() - 0.127008f64.ln()).abs() < 1e-11);
    assert_eq!(doc["chosen_length"], 4);
    assert_eq!(doc["config"]["strategy"], "joint-viterbi");
    assert_eq!(doc["config"]["beta"], 0.0);
    assert_eq!(doc["input"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(doc["length_scores"].as_array().unwrap().len(), 3);
}

#[test]
fn decode_all_lengths_and_usage_errors() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "I4.json", &i4());
    let doc = json_out(&run(&["decode", "--strategy", "viterbi", "--input", s(&f), "--all-lengths"]));
    let all = doc["all_lengths"].as_array().unwrap();
    assert_eq!(all.len(), 3);
    assert_eq!(all[1]["path"], serde_json::json!([1, 2, 4]));

    let out = run(&["decode", "--strategy", "greedy", "--input", s(&f), "--all-lengths"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["decode", "--strategy", "beam", "--input", s(&f)]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["decode", "--strategy", "viterbi", "--beta", "-1", "--input", s(&f)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_is_a_data_error() {
    let out = run(&["decode", "--strategy", "viterbi", "--input", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn invalid_instance_rejected_unless_overridden() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("bad.json");
    fs::write(
        &f,
        r#"{"L": 2, "V": 1, "log_transitions": [[null, -0.6931471805599453], [null, null]], "log_emissions": [[0.0], [0.0]]}"#,
    )
    .unwrap();
    let out = run(&["decode", "--strategy", "greedy", "--input", s(&f)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1 normalization"));
    let doc = json_out(&run(&["decode", "--strategy", "greedy", "--input", s(&f), "--no-validate"]));
    assert_eq!(doc["config"]["validate"], false);
}

#[test]
fn score_i2() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "I2.json", &i2());
    let doc = json_out(&run(&["score", "--input", s(&f), "--path", "1,2", "--tokens", "0,1", "--marginal"]));
    assert!((doc["joint_logprob"].as_f64().unwrap() - 0.72f64.ln()).abs() < 1e-11);
    assert_eq!(doc["path_logprob"], 0.0);
    assert!((doc["marginal_logprob"].as_f64().unwrap() - 0.72f64.ln()).abs() < 1e-11);

    let out = run(&["score", "--input", s(&f), "--path", "1,x", "--tokens", "0,1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["score", "--input", s(&f), "--path", "2,1", "--tokens", "0,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_modes() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "I4.json", &i4());
    let doc = json_out(&run(&["oracle", "--input", s(&f), "--mode", "path"]));
    assert_eq!(doc["result"]["path_count"], 4);
    assert_eq!(doc["result"]["global_best"]["path"], serde_json::json!([1, 2, 3, 4]));
    assert!((doc["result"]["best_per_length"]["3"]["probability"].as_f64().unwrap() - 0.28).abs() < 1e-11);

    let doc = json_out(&run(&["oracle", "--input", s(&f), "--mode", "joint"]));
    assert!((doc["result"]["global_best"]["probability"].as_f64().unwrap() - 0.127008).abs() < 1e-11);
    assert_eq!(doc["global_best_tokens"], serde_json::json!([0, 1, 0, 1]));

    let doc = json_out(&run(&["oracle", "--input", s(&f), "--mode", "marginal", "--tokens", "0,1,0"]));
    assert!((doc["probability"].as_f64().unwrap() - 0.05616).abs() < 1e-11);

    let out = run(&["oracle", "--input", s(&f), "--mode", "marginal"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["oracle", "--input", s(&f), "--mode", "marginal", "--tokens", "0,0,0,0,0"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["oracle", "--input", s(&f), "--mode", "path", "--cap", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_decode_oracle_agree() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("insts");
    let doc = json_out(&run(&[
        "gen", "--length", "7", "--vocab", "3", "--seed", "40", "--count", "5", "--out", s(&out_dir),
    ]));
    assert_eq!(doc["files"].as_array().unwrap().len(), 5);
    for seed in 40..45 {
        let f = out_dir.join(format!("inst_{seed}.json"));
        assert!(f.exists());
        let dec = json_out(&run(&["decode", "--strategy", "joint-viterbi", "--beta", "0", "--input", s(&f)]));
        let orc = json_out(&run(&["oracle", "--input", s(&f), "--mode", "joint"]));
        assert_eq!(dec["hypothesis"]["path"], orc["result"]["global_best"]["path"]);
        let lp = dec["hypothesis"]["joint_logprob"].as_f64().unwrap();
        let p = orc["result"]["global_best"]["probability"].as_f64().unwrap();
        assert!((lp.exp() - p).abs() <= 1e-10 * p);

        let dec = json_out(&run(&["decode", "--strategy", "viterbi", "--beta", "0", "--input", s(&f)]));
        let orc = json_out(&run(&["oracle", "--input", s(&f), "--mode", "path"]));
        assert_eq!(dec["hypothesis"]["path"], orc["result"]["global_best"]["path"]);
    }

    let out = run(&["gen", "--length", "4", "--vocab", "2", "--sparsity", "1.0", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("insts");
    json_out(&run(&["gen", "--length", "6", "--vocab", "4", "--seed", "1", "--count", "12", "--out", s(&out_dir), "--workers", "3"]));
    let args = [
        "analyze", "--inputs", s(&out_dir), "--strategies", "lookahead,joint-viterbi", "--score", "marginal", "--beta", "1",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let mut parallel = args.to_vec();
    parallel.extend(["--workers", "4"]);
    assert_eq!(run(&parallel).stdout, a.stdout);
    let doc = json_out(&a);
    assert_eq!(doc["inputs"].as_array().unwrap().len(), 12);
    assert_eq!(doc["report"]["instance_count"], 12);
    assert_eq!(doc["report"]["score_kind"], "marginal");

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = run(&["analyze", "--inputs", s(&empty)]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn bench_smoke() {
    let doc = json_out(&run(&[
        "bench", "--length", "32", "--vocab", "8", "--count", "3", "--reps", "3", "--strategies", "greedy,joint-viterbi",
    ]));
    let t = &doc["timings"]["per_strategy"];
    assert_eq!(t["greedy"]["ratio_to_baseline"], 1.0);
    assert!(t["joint-viterbi"]["mean_secs"].as_f64().unwrap() > 0.0);
    let out = run(&["bench", "--length", "8", "--vocab", "2", "--reps", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn in_process_entry_point() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = dagdecode::cli::run(["dagdecode", "--help"], &mut out, &mut err);
    assert_eq!(code, 0);
    assert!(String::from_utf8_lossy(&out).contains("decode"));
    let code = dagdecode::cli::run(["dagdecode", "frobnicate"], &mut out, &mut err);
    assert_eq!(code, 1);
}
