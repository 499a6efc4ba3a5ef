use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).display().to_string()
}

fn scratch(test: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("progex-cli-{test}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn progex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_progex")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn compiles_a_small_tree() {
    let out = progex(&["compile", "--kind", "tree", "--file", &fixture("toy_tree.json"), "--schema", &fixture("toy_schema.json")]);
    assert_eq!(stdout(&out), "if A:\n    if B: D\n    else: False\nelse: not C\n");
}

#[test]
fn compiles_and_simplifies_a_linear_model() {
    let args = ["compile", "--kind", "linear", "--file", &fixture("toy_linear.json"), "--schema", &fixture("toy_linear_schema.json")];
    assert_eq!(stdout(&progex(&args)), "10*A - 9*B + 2\n");
    let mut simplified = args.to_vec();
    simplified.push("--simplify");
    assert_eq!(stdout(&progex(&simplified)), "A or not B\n");
}

#[test]
fn compiles_rule_files() {
    let list = progex(&[
        "compile", "--kind", "rule-list", "--file", &fixture("decision_list.json"),
        "--schema", &fixture("clinical_schema.json"), "--positive", "Depression",
    ]);
    assert!(stdout(&list).starts_with("if "));
    let set = progex(&[
        "compile", "--kind", "rule-set", "--file", &fixture("decision_set.json"),
        "--schema", &fixture("clinical_schema.json"), "--positive", "Diabetes",
    ]);
    assert!(stdout(&set).contains(" or "));
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let cases: [&[&str]; 4] = [
        &["compile", "--kind", "tree", "--file", "/nonexistent.json", "--schema", &fixture("toy_schema.json")],
        &["compile", "--kind", "rule-set", "--file", &fixture("decision_set.json"), "--schema", &fixture("clinical_schema.json")],
        &["explain", "--data", &fixture("adult.csv"), "--schema", &fixture("adult.json"), "--loss", "hinge"],
        &["explain", "--data", &fixture("adult.csv"), "--schema", &fixture("adult.json"), "--instance", "999999"],
    ];
    for args in cases {
        let out = progex(args);
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = String::from_utf8_lossy(&out.stderr);
        let last = err.lines().last().unwrap_or_default();
        assert!(last.starts_with("error: "), "{err}");
    }
}

#[test]
fn replayed_batch_reproduces_the_report() {
    let dir = scratch("replay");
    let (batch, first, second) = (dir.join("batch.csv"), dir.join("a.json"), dir.join("b.json"));
    let common = ["explain", "--data", &fixture("adult.csv"), "--schema", &fixture("adult.json"), "--iterations", "5000", "--restarts", "2"];
    let mut a = common.to_vec();
    a.extend(["--instance", "2", "--dump-batch", batch.to_str().unwrap(), "--json-out", first.to_str().unwrap()]);
    stdout(&progex(&a));
    let mut b = common.to_vec();
    b.extend(["--replay-batch", batch.to_str().unwrap(), "--json-out", second.to_str().unwrap()]);
    stdout(&progex(&b));
    let (ra, rb) = (json(&first), json(&second));
    for key in ["program", "weighted_f1", "energy", "node_count", "anchor", "anchor_label"] {
        assert_eq!(ra[key], rb[key], "{key}");
    }
    assert_eq!(rb["model"], "replay");
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn served_model_explains_like_the_local_one() {
    let dir = scratch("remote");
    let model = dir.join("tree.json");
    let (csv, schema) = (fixture("adult.csv"), fixture("adult.json"));
    let data = ["--data", csv.as_str(), "--schema", schema.as_str()];
    let mut train = vec!["train", "--model", "tree", "--out", model.to_str().unwrap()];
    train.extend(&data);
    stdout(&progex(&train));

    let search = ["--instance", "5", "--seed", "3", "--iterations", "5000", "--restarts", "2"];
    let local_out = dir.join("local.json");
    let mut local = vec!["explain", "--model", "tree", "--model-file", model.to_str().unwrap(), "--json-out", local_out.to_str().unwrap()];
    local.extend(&data);
    local.extend(search);
    stdout(&progex(&local));

    let cmd = format!(
        "'{}' serve --schema '{}' --model-file '{}'",
        env!("CARGO_BIN_EXE_progex"),
        fixture("adult.json"),
        model.display()
    );
    let remote_out = dir.join("remote.json");
    let mut remote = vec!["explain", "--model", "remote", "--cmd", &cmd, "--json-out", remote_out.to_str().unwrap()];
    remote.extend(&data);
    remote.extend(search);
    stdout(&progex(&remote));

    let (l, r) = (json(&local_out), json(&remote_out));
    assert_eq!(l["program"], r["program"]);
    assert_eq!(l["weighted_f1"], r["weighted_f1"]);
    assert_eq!(r["model"], "remote");
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn oracle_is_never_beaten() {
    let dir = scratch("oracle");
    let (o, e) = (dir.join("oracle.json"), dir.join("explain.json"));
    let data = ["--data", &fixture("adult.csv"), "--schema", &fixture("adult.json"), "--instance", "1", "--samples", "400", "--seed", "4"];
    let mut oracle = vec!["oracle", "--max-nodes", "3", "--json-out", o.to_str().unwrap()];
    oracle.extend(data);
    stdout(&progex(&oracle));
    let mut explain = vec!["explain", "--max-nodes", "3", "--iterations", "5000", "--json-out", e.to_str().unwrap()];
    explain.extend(data);
    stdout(&progex(&explain));
    let best = json(&o)["energy"].as_f64().unwrap();
    let found = json(&e)["energy"].as_f64().unwrap();
    assert!(found >= best - 1e-12);
    let _ = std::fs::remove_dir_all(dir);
}
