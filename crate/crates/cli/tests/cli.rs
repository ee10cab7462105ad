use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dispersive(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispersive"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

const MISDECLARED: &str = r#"{"command": "hypotheses", "relations": [
  {"name": "liar", "phi": "r^2", "dphi": "2*r", "d2phi": "2", "m1": 3, "m2": 2}
]}"#;

fn misdeclared_config(dir: &Path) -> String {
    let p = dir.join("liar.json");
    std::fs::write(&p, MISDECLARED).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(out: &Path) -> Value {
    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn hypotheses_on_klein_gordon_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = dispersive(dir.path(), &["hypotheses", "--relation", "klein_gordon"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    let records = r["records"].as_array().unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|x| x["verdict"] == "pass"));
    assert_eq!(r["status"], "pass");
    assert!(dir.path().join("hypotheses.csv").exists());
}

#[test]
fn unknown_relation_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = dispersive(dir.path(), &["hypotheses", "--relation", "no_such_relation"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_relation"));
}

#[test]
fn malformed_config_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"command\": \"hls\",\n  \"spec\": [1, \n}").unwrap();
    let o = dispersive(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn failing_verdict_exits_one_and_names_record() {
    let dir = tempfile::tempdir().unwrap();
    // r^2 declared with low-frequency order 3 cannot satisfy the comparability bound.
    let cfg = misdeclared_config(dir.path());
    let o = dispersive(dir.path(), &["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FAIL"), "{err}");
    assert_eq!(report(dir.path())["pass"], false);
}

#[test]
fn repeated_runs_are_identical_up_to_timestamp() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = dispersive(d.path(), &["bessel-selftest"]);
        assert_eq!(o.status.code(), Some(0));
    }
    let strip = |mut v: Value| {
        v["generated_at_unix"] = Value::from(0);
        v
    };
    assert_eq!(strip(report(a.path())), strip(report(b.path())));
}

#[test]
fn merge_recomputes_aggregate() {
    let root = tempfile::tempdir().unwrap();
    let ok = root.path().join("ok");
    let bad = root.path().join("bad");
    let merged = root.path().join("merged");
    dispersive(&ok, &["hypotheses", "--relation", "klein_gordon"]);
    let cfg = misdeclared_config(root.path());
    dispersive(&bad, &["run", "--config", &cfg]);
    let o = dispersive(
        &merged,
        &[
            "merge",
            ok.join("report.json").to_str().unwrap(),
            bad.join("report.json").to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let r = report(&merged);
    assert_eq!(r["records"].as_array().unwrap().len(), 8);
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
    assert_eq!(r["pass"], false);

    let o = dispersive(&merged, &["merge", ok.join("report.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn negative_scales_parse() {
    let dir = tempfile::tempdir().unwrap();
    // n = 7 is rejected by the kernel, after the arguments have parsed.
    let o = dispersive(dir.path(), &["kernel-decay", "--n", "7", "--k", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dimension"), "{err}");
}
