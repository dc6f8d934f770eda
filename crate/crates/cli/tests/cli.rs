use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn callias(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_callias"))
        .args(args)
        .status()
        .expect("binary runs")
        .code()
        .expect("exit code")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    callias(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn spectrum_of_a_pair_has_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run_config(&configs().join("spectrum.toml"), &out, &[]), 0);
    let text = std::fs::read_to_string(out.join("spectrum_pair.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows, ["index,eigenvalue,residual", "0,-7.5000000000000000e-1,0.0000000000000000e0", "1,7.5000000000000000e-1,0.0000000000000000e0"]);
}

#[test]
fn bundled_suite_holds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run_config(&configs().join("eta_suite.toml"), &out, &[]), 0);
    let report = json(&out.join("report.json"));
    assert_eq!(report["all_hold"], Value::Bool(true));
    let cases = report["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 8);
    assert!(cases.iter().all(|c| c["holds"] == Value::Bool(true)));
    let manifest = json(&out.join("manifest.json"));
    for c in cases {
        let key = format!("suite/{}", c["name"].as_str().unwrap());
        assert!(!manifest["provenance"][&key].as_array().unwrap().is_empty(), "{key}");
    }
}

#[test]
fn suite_selector_runs_named_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run_config(&configs().join("eta_suite.toml"), &out, &["--suite", "eta_pair,heat_pair"]), 0);
    let names: Vec<String> = json(&out.join("report.json"))["cases"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["eta_pair", "heat_pair"]);
    let other = dir.path().join("other");
    assert_eq!(run_config(&configs().join("eta_suite.toml"), &other, &["--suite", "nope"]), 2);
    assert!(!other.exists());
}

const PAIR: &str = r#"
[operators.a0]
slice = { kind = "points", count = 1 }
diagonal = [1.0, -1.0]
[operators.a1]
slice = { kind = "points", count = 1 }
diagonal = [1.0, 1.0]
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("{body}\n{PAIR}")).unwrap();
    path
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for (i, body) in [
        "scenario = \"suite\"\nunknown_key = 1",
        "scenario = \"eta\"\n[eta]\npairs = [[\"a0\", \"missing\"]]",
        "scenario = \"suite\"\n[suite.cases.x]\ncheck = \"eta\"\na0 = \"a0\"\na1 = \"a1\"\ncolour = 3",
        "this is not toml",
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(dir.path(), &format!("bad{i}.toml"), body);
        let out = dir.path().join(format!("out{i}"));
        assert_eq!(run_config(&cfg, &out, &[]), 2, "{body}");
        assert!(!out.exists());
    }
    assert_eq!(run_config(&dir.path().join("absent.toml"), &dir.path().join("o"), &[]), 2);
}

#[test]
fn cut_collision_exits_3_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let body = "scenario = \"suite\"\n[suite.cases.collide]\ncheck = \"condition_change\"\nfrom = \"a0\"\nto = \"a1\"\na = -1.0\nb = 0.5";
    let cfg = write_config(dir.path(), "collide.toml", body);
    let out = dir.path().join("out");
    assert_eq!(run_config(&cfg, &out, &[]), 3);
    assert!(!out.exists());
}

#[test]
fn failed_identity_exits_1_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let body = "scenario = \"suite\"\n[suite.cases.wrong]\ncheck = \"eta\"\na0 = \"a0\"\na1 = \"a1\"\nexpect = 4";
    let cfg = write_config(dir.path(), "wrong.toml", body);
    let out = dir.path().join("out");
    assert_eq!(run_config(&cfg, &out, &[]), 1);
    let report = json(&out.join("report.json"));
    assert_eq!(report["all_hold"], Value::Bool(false));
    assert_eq!(report["cases"][0]["detail"]["eta"], Value::from(2));
}

#[test]
fn cache_reuse_and_invalidation() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cache_arg = cache.to_str().unwrap();
    let cfg = configs().join("eta_suite.toml");
    let invocations = |out: &Path| json(&out.join("manifest.json"))["cache"]["solver_invocations"].as_u64().unwrap();

    let first = dir.path().join("first");
    assert_eq!(run_config(&cfg, &first, &["--cache-dir", cache_arg]), 0);
    assert!(invocations(&first) > 0);
    let second = dir.path().join("second");
    assert_eq!(run_config(&cfg, &second, &["--cache-dir", cache_arg]), 0);
    assert_eq!(invocations(&second), 0);
    assert_eq!(std::fs::read(first.join("report.json")).unwrap(), std::fs::read(second.join("report.json")).unwrap());

    let text = std::fs::read_to_string(&cfg).unwrap().replace("diagonal = [1.0, 1.0]", "diagonal = [1.0, 1.25]");
    let perturbed = dir.path().join("perturbed.toml");
    std::fs::write(&perturbed, text).unwrap();
    let third = dir.path().join("third");
    assert_eq!(run_config(&perturbed, &third, &["--cache-dir", cache_arg, "--suite", "eta_pair"]), 0);
    assert!(invocations(&third) > 0);
}

#[test]
fn reports_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("eta_suite.toml");
    let (one, eight) = (dir.path().join("w1"), dir.path().join("w8"));
    assert_eq!(run_config(&cfg, &one, &["--workers", "1"]), 0);
    assert_eq!(run_config(&cfg, &eight, &["--workers", "8"]), 0);
    assert_eq!(std::fs::read(one.join("report.json")).unwrap(), std::fs::read(eight.join("report.json")).unwrap());
}
