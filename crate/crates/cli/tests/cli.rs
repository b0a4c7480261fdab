use std::path::Path;
use std::process::{Command, Output};

fn qld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qld")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn codes_list_shows_the_library() {
    let o = qld(&["codes", "list"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("name,n,k,generators,distance\n"));
    assert!(out.contains("perfect5,5,1,4,3"));
    assert!(out.contains("steane7,7,1,6,3"));
}

#[test]
fn table_build_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let o = qld(&["table", "build", "--code", "perfect5", "--max-weight", "2", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["L_max"], 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("L_max: 4"));
}

#[test]
fn kl_check_exit_codes() {
    let o = qld(&["kl", "check", "--code", "perfect5", "--max-weight", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    // unknown code is an error, not a verdict
    let o = qld(&["kl", "check", "--code", "nope", "--max-weight", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn moment_and_wg_commands() {
    let o = qld(&["moment", "p0", "--n", "2", "--m", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("2,2,21/85,"));
    let o = qld(&["moment", "fidelity", "--n", "2", "--m", "3", "--sign", "-1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("2,3,-1,3944/5115,"));
    assert_eq!(qld(&["moment", "fidelity", "--n", "2", "--m", "3", "--sign", "2"]).status.code(), Some(2));
    let o = qld(&["wg", "verify", "--d", "4,8"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().count() > 24);
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn protocol_run_emits_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        r#"rounds = 5
seed = "abcd"

[protocol]
n = 2
m = 2
code = "c422^2"
max_weight = 1
key = "beef"

[adversary]
strategy = "worst_in_list"
weight_budget = 1
copy_budget = 0
"#,
    );
    let out = dir.path().join("t.jsonl");
    let o = qld(&["protocol", "run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
    // same config, same transcripts
    let o2 = qld(&["protocol", "run", "--config", &cfg]);
    assert_eq!(stdout(&o2), text);
    let bad = write(dir.path(), "bad.toml", "rounds = 1\nseed = \"ab\"\nextra = 1\n");
    assert_eq!(qld(&["protocol", "run", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn experiment_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        "[[experiment]]\nexperiment = \"wg\"\n[[experiment]]\nexperiment = \"prop1\"\ntrials = 400\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let oa = qld(&["experiment", "run", "--config", &cfg, "--seed", "5eed", "--out", a.to_str().unwrap()]);
    let ob = qld(&["experiment", "run", "--config", &cfg, "--seed", "5eed", "--out", b.to_str().unwrap()]);
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(ob.status.code(), Some(0));
    let ja = std::fs::read(a.join("results.json")).unwrap();
    let jb = std::fs::read(b.join("results.json")).unwrap();
    assert_eq!(ja, jb);
    assert!(a.join("report.md").exists());
    assert!(stdout(&oa).starts_with("experiment,metric,"));
    // a seed is required somewhere
    let o = qld(&["experiment", "run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // length-4 lists with only two tag qubits fail far more than 5% of the time
    let cfg = write(
        dir.path(),
        "f.toml",
        "[[experiment]]\nexperiment = \"thm2\"\ncode = \"c422^2\"\nn = 2\nm = 2\nmax_weight = 1\nlist_length = 4\ntrials = 300\n",
    );
    let out = dir.path().join("f");
    let o = qld(&["experiment", "run", "--config", &cfg, "--seed", "5eed", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("decode_failure_rate_list4"));
}
