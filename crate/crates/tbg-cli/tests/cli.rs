use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use serde_json::Value;
use tbg_cli::cli::{Action, Cli};
use tbg_cli::config::RunConfig;
use tbg_cli::{pretty, schema};

fn tbg(args: &[&str], cache: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tbg"));
    c.args(args);
    if let Some(d) = cache {
        c.env("TBG_CACHE_DIR", d);
    }
    c.output().expect("spawn tbg")
}

fn ok(args: &[&str], cache: Option<&Path>) -> Output {
    let o = tbg(args, cache);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stdout));
    o
}

fn config_of(args: &[&str]) -> RunConfig {
    let mut full = vec!["tbg"];
    full.extend_from_slice(args);
    match Cli::try_parse_from(full).unwrap().action().unwrap() {
        Action::Run(c) => c,
        Action::Schema { .. } => unreachable!(),
    }
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn committed_schemas_are_current() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    for (name, s) in schema::all() {
        let committed = fs::read_to_string(dir.join(schema::file_name(name))).unwrap_or_default();
        assert_eq!(committed, pretty(&s).unwrap(), "schemas/{name} is stale; run `tbg schema --write crates/tbg-cli/schemas`");
    }
}

#[test]
fn reports_validate_against_required_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    ok(&["--quiet", "--out", out.to_str().unwrap(), "magic", "--potential", "u2", "--N", "6", "--max-modulus", "1.5"], None);
    let report: Value = serde_json::from_str(&read(&out, "report.json")).unwrap();
    let s: Value = serde_json::to_value(schema::all().into_iter().find(|(n, _)| *n == "magic").unwrap().1).unwrap();
    for key in s["required"].as_array().unwrap() {
        assert!(report.get(key.as_str().unwrap()).is_some(), "missing {key}");
    }
    let angle = &report["angles"][0];
    for key in s["definitions"]["AngleEntry"]["required"].as_array().unwrap() {
        assert!(angle.get(key.as_str().unwrap()).is_some(), "angle missing {key}");
    }
    assert_eq!(angle["truncation"], 6);
}

#[test]
fn stored_config_replays_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["--quiet", "--seed", "5", "--out", a.to_str().unwrap(), "bands", "--potential", "u2", "--N", "5", "--alpha", "0.6", "--grid", "3"], None);
    ok(&["--quiet", "--out", b.to_str().unwrap(), "run", "--config", a.join("config.json").to_str().unwrap()], None);
    for f in ["report.json", "config.json", "bands.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
}

#[test]
fn cache_hits_only_for_the_same_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let args = |out: &Path, n: &'static str| -> Vec<String> {
        ["--quiet", "--cache", "--out", out.to_str().unwrap(), "magic", "--potential", "u2", "--N", n, "--max-modulus", "1.5"].map(String::from).to_vec()
    };
    let run = |out: &Path, n| {
        let a = args(out, n);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        ok(&refs, Some(&cache));
    };
    let first = tmp.path().join("first");
    run(&first, "6");
    let a = args(&first, "6");
    let refs: Vec<&str> = a.iter().map(String::as_str).collect();
    let hash = config_of(&refs).hash();
    let entry_path = cache.join(format!("{hash}.json"));
    let mut entry: Value = serde_json::from_str(&fs::read_to_string(&entry_path).unwrap()).unwrap();

    // A marked entry that still matches its config is served as is.
    entry["report"]["marker"] = Value::from("cached");
    fs::write(&entry_path, serde_json::to_vec(&entry).unwrap()).unwrap();
    let second = tmp.path().join("second");
    run(&second, "6");
    assert!(read(&second, "report.json").contains("\"marker\": \"cached\""));
    assert_eq!(read(&first, "magic.csv"), read(&second, "magic.csv"));

    // An entry whose stored config no longer hashes to its key is ignored and replaced.
    entry["config"]["truncation"] = Value::from(7);
    fs::write(&entry_path, serde_json::to_vec(&entry).unwrap()).unwrap();
    let third = tmp.path().join("third");
    run(&third, "6");
    assert!(!read(&third, "report.json").contains("marker"));
    assert_eq!(read(&first, "report.json"), read(&third, "report.json"));

    // A different truncation is a different key.
    let other = tmp.path().join("other");
    run(&other, "7");
    assert_ne!(read(&first, "report.json"), read(&other, "report.json"));
}

#[test]
fn sweep_resumes_from_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    let base = ["--quiet", "sweep", "--N", "5", "--steps", "4", "--trace-n", "5"];
    fn with_out<'a>(d: &'a Path, base: &[&'a str]) -> Vec<&'a str> {
        let mut v = vec!["--out", d.to_str().unwrap()];
        v.extend_from_slice(base);
        v
    }
    ok(&with_out(&full, &base), None);
    assert!(!full.join("sweep.checkpoint.jsonl").exists());
    let report: Value = serde_json::from_str(&read(&full, "report.json")).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);

    let hash = config_of(&with_out(&full, &base)).hash();
    let resumed = tmp.path().join("resumed");
    fs::create_dir_all(&resumed).unwrap();
    let mut text = format!("{hash}\n");
    for r in &rows[..2] {
        text += &serde_json::to_string(r).unwrap();
        text.push('\n');
    }
    let torn = serde_json::to_string(&rows[2]).unwrap();
    text += &torn[..torn.len() / 2];
    fs::write(resumed.join("sweep.checkpoint.jsonl"), &text).unwrap();
    ok(&with_out(&resumed, &base), None);
    for f in ["report.json", "sweep.csv", "sweep_angles.csv"] {
        assert_eq!(read(&full, f), read(&resumed, f), "{f}");
    }

    // Recorded rows are reused rather than recomputed.
    let mut marked = rows[0].clone();
    marked["error"] = Value::from("from checkpoint");
    fs::write(resumed.join("sweep.checkpoint.jsonl"), format!("{hash}\n{}\n", serde_json::to_string(&marked).unwrap())).unwrap();
    ok(&with_out(&resumed, &base), None);
    assert!(read(&resumed, "sweep.csv").contains("from checkpoint"));

    // A checkpoint written for another configuration is discarded.
    fs::write(resumed.join("sweep.checkpoint.jsonl"), format!("{}\n{}\n", "0".repeat(64), serde_json::to_string(&marked).unwrap())).unwrap();
    ok(&with_out(&resumed, &base), None);
    assert_eq!(read(&full, "sweep.csv"), read(&resumed, "sweep.csv"));
}

#[test]
fn failures_print_an_error_object() {
    let o = tbg(&["magic", "--potential", "u2", "--N", "5", "--max-modulus", "1.5", "--stability", "1e-300"], None);
    assert_eq!(o.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(e["error"]["kind"], "TruncationUnstable");
    assert_eq!(e["error"]["exit_code"], 2);

    let o = tbg(&["bands", "--potential", r#"{"interp": "x"}"#, "--alpha", "1"], None);
    assert_eq!(o.status.code(), Some(64));
    let e: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(e["error"]["kind"], "Config");

    let o = tbg(&["bands", "--potential", r#"[{"p": [1, 0], "orbit_coeff": "1/0"}]"#, "--alpha", "1"], None);
    assert_eq!(o.status.code(), Some(64));
    let e: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(e["error"]["message"].as_str().unwrap().contains("orbit_coeff"));
}
