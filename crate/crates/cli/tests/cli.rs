use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tapeslicer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tapeslicer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is a JSON object")
}

fn write_design(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let p = path(dir, name);
    fs::write(&p, json).unwrap();
    p
}

const LINE_15: &str = r#"{"features": [{"kind": "line", "start": [0, 0, 0], "end": [0.15, 0, 0]}]}"#;

fn plan_line(dir: &TempDir, extra: &[&str]) -> PathBuf {
    let design = write_design(dir, "line.json", LINE_15);
    let program = path(dir, "program.json");
    let mut args = vec!["plan", s(&design), "-o", s(&program)];
    args.extend_from_slice(extra);
    let out = tapeslicer(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    program
}

#[test]
fn plan_straight_line() {
    let dir = TempDir::new().unwrap();
    let program = read_json(&plan_line(&dir, &[]));
    assert_eq!(program["features"].as_array().unwrap().len(), 1);
    let steps = program["steps"].as_array().unwrap();
    assert!(steps.iter().all(|s| s["compaction_setpoint"].as_f64() == Some(0.0)));
    assert_eq!(steps.iter().filter(|s| s["event"] == "cut").count(), 1);
}

#[test]
fn small_circle_is_a_curvature_violation() {
    let dir = TempDir::new().unwrap();
    let design = write_design(
        &dir,
        "circle.json",
        r#"{"features": [{"kind": "circle", "diameter": 0.04, "center": [0, 0, 0]}]}"#,
    );
    let out = tapeslicer(&["plan", s(&design), "-o", s(&path(&dir, "p.json"))]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "curvature-violation");
    assert_eq!(err["exit_code"], 3);
    assert!(!path(&dir, "p.json").exists());
}

#[test]
fn unknown_tape_is_invalid_input() {
    let dir = TempDir::new().unwrap();
    let design = write_design(&dir, "line.json", LINE_15);
    let out = tapeslicer(&["plan", s(&design), "--tape", "gold-leaf", "-o", s(&path(&dir, "p.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["exit_code"], 2);
}

#[test]
fn malformed_design_is_invalid_input() {
    let dir = TempDir::new().unwrap();
    let design = write_design(&dir, "bad.json", "{\"features\": [");
    let out = tapeslicer(&["plan", s(&design), "-o", s(&path(&dir, "p.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let missing = tapeslicer(&["plan", s(&path(&dir, "nope.json")), "-o", s(&path(&dir, "p.json"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_json_error() {
    let out = tapeslicer(&["simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["exit_code"], 2);
}

#[test]
fn zero_noise_simulation_reproduces_plan() {
    let dir = TempDir::new().unwrap();
    let program = plan_line(&dir, &[]);
    let result = path(&dir, "result.json");
    let out = tapeslicer(&["simulate", s(&program), "--noise", "zero", "-o", s(&result)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&result);
    let report = &r["reports"][0];
    assert_eq!(report["n"], 1);
    assert!(report["length_error"]["mean"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(report["straightness_ratio"]["mean"].as_f64(), Some(0.0));
    // a single sample has no spread
    assert!(report["length_error"]["std"].is_null());
}

#[test]
fn seeded_batches_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let program = plan_line(&dir, &[]);
    let (a, b, c) = (path(&dir, "a.json"), path(&dir, "b.json"), path(&dir, "c.json"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let r = tapeslicer(&["simulate", s(&program), "--n", "9", "--seed", seed, "-o", s(out)]);
        assert_eq!(r.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let r = read_json(&a);
    assert_eq!(r["outcomes"].as_array().unwrap().len(), 9);
    assert!(r["reports"][0]["straightness_deviation"]["std"].as_f64().unwrap() > 0.0);
}

#[test]
fn metrics_table_from_simulation() {
    let dir = TempDir::new().unwrap();
    let program = plan_line(&dir, &[]);
    let result = path(&dir, "result.json");
    let table = path(&dir, "table.csv");
    assert_eq!(tapeslicer(&["simulate", s(&program), "--n", "5", "-o", s(&result)]).status.code(), Some(0));
    let out = tapeslicer(&["metrics", s(&result), "-o", s(&table)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&table).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("metric,length_m,substrate,n,mean,std"));
    assert!(lines.any(|l| l.starts_with("straightness_deviation,") && l.contains(",acrylic,5,")));
}

#[test]
fn profiles_csv_written() {
    let dir = TempDir::new().unwrap();
    let program = plan_line(&dir, &[]);
    let profiles = path(&dir, "profiles.csv");
    let out = tapeslicer(&[
        "simulate",
        s(&program),
        "--profiles",
        s(&profiles),
        "-o",
        s(&path(&dir, "r.json")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_to_string(&profiles).unwrap().lines().count() > 100);
}

#[test]
fn compaction_on_hemisphere() {
    let dir = TempDir::new().unwrap();
    let design = write_design(
        &dir,
        "dome.json",
        r#"{"features": [{"kind": "conformal",
            "surface": {"type": "hemisphere", "center": [0, 0, 0], "radius": 0.05},
            "path": {"kind": "line", "start": [-0.03, 0, 0], "end": [0.03, 0, 0]}}]}"#,
    );
    let program = path(&dir, "dome_program.json");
    let out = tapeslicer(&["plan", s(&design), "--mode", "compaction", "--force", "4", "-o", s(&program)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let p = read_json(&program);
    assert_eq!(p["mode"], "compaction");
    let laying: Vec<&Value> = p["steps"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["phase"] == "lay")
        .collect();
    assert!(!laying.is_empty());
    assert!(laying.iter().all(|s| s["compaction_setpoint"].as_f64() == Some(4.0)));
    assert!(laying.iter().any(|s| s["pose"]["position"][2].as_f64().unwrap() > 0.04));
}

#[test]
fn render_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    let program = plan_line(&dir, &[]);
    let (a, b) = (path(&dir, "a.svg"), path(&dir, "b.svg"));
    for out in [&a, &b] {
        assert_eq!(tapeslicer(&["render", s(&program), "-o", s(out)]).status.code(), Some(0));
    }
    let svg = fs::read_to_string(&a).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("class=\"ribbon\"").count(), 1);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn render_simulation_result() {
    let dir = TempDir::new().unwrap();
    let program = plan_line(&dir, &[]);
    let result = path(&dir, "r.json");
    let svg = path(&dir, "placed.svg");
    assert_eq!(tapeslicer(&["simulate", s(&program), "-o", s(&result)]).status.code(), Some(0));
    let out = tapeslicer(&["render", s(&result), "--exaggeration", "20", "-o", s(&svg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&svg).unwrap().contains("deviations ×20"));
}

#[test]
fn render_rejects_unknown_input() {
    let dir = TempDir::new().unwrap();
    let junk = write_design(&dir, "junk.json", r#"{"hello": 1}"#);
    let out = tapeslicer(&["render", s(&junk), "-o", s(&path(&dir, "x.svg"))]);
    assert_eq!(out.status.code(), Some(2));
}

fn sync_deficit(dir: &TempDir, program: &Path, delay: &str) -> f64 {
    let out_path = path(dir, &format!("sync_{delay}.json"));
    let out = tapeslicer(&["sync", s(program), "--delay", delay, "-o", s(&out_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&out_path);
    assert_eq!(r["trace"]["complete"], true);
    r["feed_deficits"][0]["feed_deficit"].as_f64().unwrap()
}

#[test]
fn sync_deficit_follows_delay() {
    let dir = TempDir::new().unwrap();
    let program = plan_line(&dir, &["--speed", "0.1"]);
    assert!(sync_deficit(&dir, &program, "0").abs() < 6.25e-6);
    assert!((sync_deficit(&dir, &program, "0.02") - 2e-3).abs() < 6.25e-6);
}

#[test]
fn cut_while_feeding_is_a_protocol_violation() {
    let dir = TempDir::new().unwrap();
    let program = plan_line(&dir, &[]);
    let mut p = read_json(&program);
    let steps = p["steps"].as_array_mut().unwrap();
    let mid = steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s["phase"] == "lay" && s["event"] == "none")
        .map(|(i, _)| i)
        .nth(20)
        .unwrap();
    steps[mid]["event"] = "cut".into();
    let broken = path(&dir, "broken.json");
    fs::write(&broken, serde_json::to_string(&p).unwrap()).unwrap();
    let out = tapeslicer(&["sync", s(&broken), "-o", s(&path(&dir, "t.json"))]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(stderr_json(&out)["error"], "protocol-violation");
}

#[test]
fn commands_chain_and_write_manifests() {
    let dir = TempDir::new().unwrap();
    let program = plan_line(&dir, &[]);
    let manifest_path = path(&dir, "program.json.manifest.json");
    let m = read_json(&manifest_path);
    assert_eq!(m["command"], "plan");
    let inputs = m["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    assert_eq!(inputs[0]["sha256"].as_str().unwrap().len(), 64);
    assert!(m["config_hash"].as_str().is_some());

    let result = path(&dir, "r.json");
    assert_eq!(tapeslicer(&["simulate", s(&program), "--seed", "3", "-o", s(&result)]).status.code(), Some(0));
    assert_eq!(read_json(&path(&dir, "r.json.manifest.json"))["seed"], 3);
    assert_eq!(tapeslicer(&["render", s(&program), "-o", s(&path(&dir, "p.svg"))]).status.code(), Some(0));
    assert_eq!(tapeslicer(&["sync", s(&program), "-o", s(&path(&dir, "t.json"))]).status.code(), Some(0));
    for name in ["p.svg.manifest.json", "t.json.manifest.json"] {
        assert!(path(&dir, name).exists(), "{name}");
    }

    // identical reruns give identical outputs
    let first = fs::read(&program).unwrap();
    plan_line(&dir, &[]);
    assert_eq!(fs::read(&program).unwrap(), first);
}

#[test]
fn config_dir_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg");
    fs::create_dir(&cfg).unwrap();
    let builtin = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/config");
    for f in ["substrates.json", "noise.json"] {
        fs::copy(builtin.join(f), cfg.join(f)).unwrap();
    }
    let mut tapes = read_json(&builtin.join("tapes.json"));
    let mut custom = tapes["tapes"][0].clone();
    custom["name"] = "house-tape".into();
    tapes["tapes"].as_array_mut().unwrap().push(custom);
    fs::write(cfg.join("tapes.json"), tapes.to_string()).unwrap();

    let design = write_design(&dir, "line.json", LINE_15);
    let out = Command::new(env!("CARGO_BIN_EXE_tapeslicer"))
        .env("TAPESLICER_CONFIG_DIR", &cfg)
        .args(["plan", s(&design), "--tape", "house-tape", "-o", s(&path(&dir, "p.json"))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&path(&dir, "p.json"))["tape_ref"], "house-tape");
}
