use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_strider");

fn strider(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SOURCE_DATE_EPOCH").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn recipes_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes")
}

fn batch_into(out: &Path) -> Output {
    let recipe = recipes_dir().join("run_intervals.json");
    strider(&["batch", "--recipes", recipe.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "7"])
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = batch_into(&out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pkg = out.join("run_intervals");

    let o = strider(&["validate", pkg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(strider(&["validate", out.to_str().unwrap()]).status.code(), Some(0));

    let exec = pkg.join("executed.jsonl");
    let text = fs::read_to_string(&exec).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    fs::write(&exec, lines[..lines.len() - 10].join("\n") + "\n").unwrap();
    let o = strider(&["validate", pkg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("executed.jsonl: count_mismatch"), "{}", stdout(&o));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = strider(&["validate", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("not a package"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(strider(&["batch", "--out", "x"]).status.code(), Some(2));
    assert_eq!(strider(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(strider(&["serve", "--backend", "quantum"]).status.code(), Some(2));
}

#[test]
fn bad_sweep_and_bad_recipe_fail() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = recipes_dir().join("run_intervals.json");
    let o = strider(&["batch", "--recipes", recipe.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--sweep", "Run.colour=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"name":"bad","segments":[{"mode":"Squat","duration_s":0.0}]}"#).unwrap();
    let o = strider(&["batch", "--recipes", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duration_s"));
}

#[test]
fn bad_registry_names_the_mode() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/registry.json");
    let text = fs::read_to_string(src).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let modes = doc.get_mut("modes").and_then(|m| m.as_array_mut()).expect("modes array");
    modes[2]["default_speed"] = serde_json::json!(9.0);
    let path = dir.path().join("registry.json");
    fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    let o = strider(&["--registry", path.to_str().unwrap(), "modes"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Run"), "{err}");
}

#[test]
fn inspect_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(batch_into(&out).status.success());
    let o = strider(&["inspect", out.join("run_intervals").to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("350 reference"), "{text}");
    assert!(text.contains("violations 0"));
    let o = strider(&["modes"]);
    assert_eq!(stdout(&o).lines().count(), 26);
}

#[test]
fn report_lists_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let recipe = recipes_dir().join("ground_chain.json");
    let o = strider(&[
        "batch", "--recipes", recipe.to_str().unwrap(), "--out", out.to_str().unwrap(), "--sweep", "Run.speed=1.5,3.0",
    ]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["generated"], 2);
    assert_eq!(report["filtered"], 0);
    let t = &report["runs"][0]["transitions"];
    assert_eq!(t.as_array().unwrap().len(), 2);
    assert_eq!(t[0]["from_mode"], "Squat");
    assert!(t[0]["max_speed_jump"].is_number());
}
