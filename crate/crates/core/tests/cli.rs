use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fractrace::presets::{builtin, preset_to_json, BUILTIN};
use jsonschema::JSONSchema;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fractrace"));
    c.env_remove("FRACTRACE_NMAX");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn schema(name: &str) -> JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let v: Value = serde_json::from_str(&text).unwrap();
    JSONSchema::compile(&v).expect("schema compiles")
}

fn assert_valid(name: &str, v: &Value) {
    let s = schema(name);
    let msgs: Vec<String> = match s.validate(v) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("{name}: {msgs:?}\n{v:#}");
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn p(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn exponents_for_every_builtin() {
    for name in BUILTIN {
        let v = stdout_json(&run(&["exponents", "--preset", name]));
        assert_valid("exponents", &v);
        assert_eq!(v["preset"], name);
    }
    let v = stdout_json(&run(&["exponents", "--preset", "gasket2"]));
    assert!((v["d_f"].as_f64().unwrap() - 3f64.ln() / 2f64.ln()).abs() < 1e-12);
    assert!((v["d_w"].as_f64().unwrap() - 5f64.ln() / 2f64.ln()).abs() < 1e-12);
    assert!((v["beta"].as_f64().unwrap() - (10f64 / 3.0).ln() / (2.0 * 2f64.ln())).abs() < 1e-12);
}

#[test]
fn preset_files_round_trip() {
    let dir = tmp();
    for name in BUILTIN {
        let text = preset_to_json(&builtin(name).unwrap());
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_valid("preset", &doc);
        let path = p(&dir, &format!("{name}.json"));
        std::fs::write(&path, &text).unwrap();
        let a = run(&["exponents", "--preset-file", path.to_str().unwrap()]);
        let b = run(&["exponents", "--preset", name]);
        assert_eq!(a.stdout, b.stdout, "{name}");
    }
}

#[test]
fn besov_csv_shape_and_determinism() {
    let a = run(&["besov", "--preset", "gasket2", "--levels", "2..5", "--function", "bump_2_1"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,discrete_term,continuum_term_k1,continuum_term_k2,ratio");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("2,"));
    let b = run(&["besov", "--preset", "gasket2", "--levels", "2..5", "--function", "bump_2_1"]);
    assert_eq!(a.stdout, b.stdout);
    let bad = run(&["besov", "--preset", "gasket2", "--function", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn resistance_window_for_carpet3() {
    let out = run(&["resistance", "--preset", "carpet3", "--levels", "1..3"]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(&r[4], "7/6");
        assert_eq!(&r[5], "3/2");
        assert_eq!(&r[6], "true");
    }
}

#[test]
fn report_commands_match_schemas() {
    assert_valid("trace_check", &stdout_json(&run(&["trace-check", "--preset", "gasket2", "--level", "4", "--seed", "3"])));
    assert_valid("trace_check", &stdout_json(&run(&["trace-check", "--preset", "vicsek", "--level", "3"])));
    assert_valid("decay", &stdout_json(&run(&["decay", "--preset", "gasket2", "--level", "2", "--samples", "3"])));
    for name in ["carpet3", "carpet4", "square3"] {
        let v = stdout_json(&run(&["verify-carpet", "--preset", name]));
        assert_valid("verify_carpet", &v);
        assert_eq!(v["all_pass"], true);
    }
}

#[test]
fn extend_writes_both_artifacts() {
    let dir = tmp();
    let input = p(&dir, "in.csv");
    let mut text = String::from("level,word,value\n");
    for (w, v) in [("000", 0.1), ("001", 0.3), ("010", 0.2), ("011", 0.9), ("100", 0.5), ("101", 0.5), ("110", 0.0), ("111", 0.4)] {
        text.push_str(&format!("3,{w},{v}\n"));
    }
    // a consistent coarser row is accepted
    text.push_str("1,0,0.375\n");
    std::fs::write(&input, &text).unwrap();
    let (out, rep) = (p(&dir, "ext.csv"), p(&dir, "ext.json"));
    let args = ["extend", "--preset", "gasket2", "--level", "2", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--report", rep.to_str().unwrap()];
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    assert_valid("extend_report", &report);
    assert!(report["roundtrip_error"].as_f64().unwrap() < 1e-10);
    let csv_text = std::fs::read_to_string(&out).unwrap();
    assert!(csv_text.starts_with("vertex_id,value\n"));
    let first = std::fs::read(&out).unwrap();
    assert!(run(&args).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), first);

    // inconsistent coarse row: validation failure, nothing written
    std::fs::write(&input, text.replace("1,0,0.375", "1,0,0.9")).unwrap();
    let (out2, rep2) = (p(&dir, "e2.csv"), p(&dir, "e2.json"));
    let o = run(&["extend", "--preset", "gasket2", "--level", "2", "--input", input.to_str().unwrap(), "--out", out2.to_str().unwrap(), "--report", rep2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out2.exists() && !rep2.exists());
}

#[test]
fn numerical_failure_exits_one_with_diagnostic() {
    let dir = tmp();
    let spec = p(&dir, "apart.json");
    // two components that never touch: the walk has nowhere to cross
    std::fs::write(
        &spec,
        r#"{"components": [{"preset": "gasket2", "level": 1},
            {"preset": "gasket2", "level": 1, "placement": {"matrix": [[1, 0], [0, 1]], "translation": [5, 0]}}],
            "steps": 10}"#,
    )
    .unwrap();
    let out = p(&dir, "s.json");
    let o = run(&["simulate", "--spec", spec.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let diag: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_valid("error", &diag);
    assert_eq!(diag["error"], "disconnected");
    assert!(!out.exists());
}

#[test]
fn validation_failures_exit_two() {
    let dir = tmp();
    let out = p(&dir, "x.json");
    for args in [
        vec!["exponents", "--preset", "nope"],
        vec!["exponents"],
        vec!["trace-check", "--preset", "gasket2", "--level", "99"],
        vec!["verify-carpet", "--preset", "gasket2"],
        vec!["resistance", "--preset", "carpet3", "--levels", "3..1"],
        vec!["no-such-command"],
    ] {
        let mut a = args.clone();
        a.extend(["--out", out.to_str().unwrap()]);
        let o = run(&a);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!out.exists(), "{args:?}");
    }
    let o = run(&["exponents", "--preset", "nope"]);
    let diag: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_valid("error", &diag);
}

#[test]
fn level_cap_from_environment() {
    let o = bin().env("FRACTRACE_NMAX", "3").args(["trace-check", "--preset", "gasket2", "--level", "4"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().env("FRACTRACE_NMAX", "3").args(["trace-check", "--preset", "gasket2", "--level", "3"]).output().unwrap();
    assert!(o.status.success());
}

const FIELD: &str = r#"{
  "components": [
    {"preset": "carpet3", "level": 2},
    {"preset": "carpet4", "level": 2, "placement": {"matrix": [[1, 0], [0, 1]], "translation": [1, "0/1"]}}
  ],
  "interfaces": [{"components": [0, 1], "segment": [[1, 0], [1, 1]]}],
  "start": {"component": 0, "point": [0.0, 0.5]},
  "steps": 20000
}"#;

#[test]
fn simulate_is_reproducible() {
    let dir = tmp();
    let spec = p(&dir, "field.json");
    std::fs::write(&spec, FIELD).unwrap();
    assert_valid("complex_spec", &serde_json::from_str(FIELD).unwrap());
    let (a, b, t) = (p(&dir, "a.json"), p(&dir, "b.json"), p(&dir, "t.csv"));
    let s = spec.to_str().unwrap();
    assert!(run(&["simulate", "--spec", s, "--seed", "5", "--out", a.to_str().unwrap(), "--trajectory", t.to_str().unwrap()]).status.success());
    assert!(run(&["simulate", "--spec", s, "--seed", "5", "--out", b.to_str().unwrap()]).status.success());
    let (ja, jb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ja, jb);
    let v: Value = serde_json::from_slice(&ja).unwrap();
    assert_valid("simulate", &v);
    assert_eq!(v["stats"]["occupation"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum::<u64>(), 20000);
    let traj = std::fs::read_to_string(&t).unwrap();
    assert_eq!(traj.lines().count(), 20001);
    let c = run(&["simulate", "--spec", s, "--seed", "6"]);
    assert_ne!(c.stdout, ja);

    // gluing along a segment the components do not share
    std::fs::write(&spec, FIELD.replace("[[1, 0], [1, 1]]", "[[5, 5], [6, 6]]")).unwrap();
    assert_eq!(run(&["simulate", "--spec", s, "--seed", "5"]).status.code(), Some(2));
    // Pentakun has no exact coordinates
    std::fs::write(&spec, r#"{"components": [{"preset": "pentakun", "level": 1}], "steps": 10}"#).unwrap();
    assert_eq!(run(&["simulate", "--spec", s, "--seed", "5"]).status.code(), Some(2));
}
