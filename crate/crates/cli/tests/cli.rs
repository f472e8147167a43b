use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bearing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bearing"))
        .args(args)
        .env_remove("BEARING_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of `key=...` in a summary line.
fn field(line: &str, key: &str) -> String {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
        .to_string()
}

fn num(line: &str, key: &str) -> f64 {
    field(line, key).parse().unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        let out = bearing(&["arc", "--out", &ws.path("traj.json")]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).starts_with("samples=441 "));
        ws
    }

    fn path(&self, name: &str) -> String {
        p(self.dir.path(), name)
    }

    fn write(&self, name: &str, text: &str) -> String {
        let path = self.path(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    fn simulate(&self, scene_json: &str, name: &str, extra: &[&str]) -> String {
        let scene = self.write(&format!("{name}.scene.json"), scene_json);
        let record = self.path(&format!("{name}.record.json"));
        let traj = self.path("traj.json");
        let mut args = vec!["simulate", &scene, &traj, "--out", &record];
        args.extend_from_slice(extra);
        let out = bearing(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        record
    }
}

const CLEAN_SCENE: &str = r#"{"tx_position": [40.0, 30.0, 0.0], "cfo_enabled": true}"#;

#[test]
fn estimate_writes_outputs_and_summary() {
    let ws = Workspace::new();
    let record = ws.simulate(CLEAN_SCENE, "clean", &[]);
    let out_dir = ws.path("full");
    let out = bearing(&["estimate", &record, "--resolution", "360x180", "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let line = stdout(&out);
    assert_eq!(line.lines().count(), 1);
    let keys: Vec<&str> = line
        .split_whitespace()
        .map(|kv| kv.split('=').next().unwrap())
        .collect();
    assert_eq!(
        keys,
        ["aoa_deg", "variance", "accepted", "runtime_s", "elevation_deg", "packets", "peaks"]
    );
    // two decimals for angles
    assert_eq!(field(&line, "aoa_deg").split('.').nth(1).unwrap().len(), 2);
    assert_eq!(field(&line, "accepted"), "true");
    assert_eq!(field(&line, "packets"), "880");
    let truth = 30.0f64.atan2(40.0).to_degrees();
    assert!((num(&line, "aoa_deg") - truth).abs() <= 1.0, "{line}");
    assert!(num(&line, "runtime_s") > 0.0);
    assert!(PathBuf::from(&out_dir).join("profile.csv").is_file());
    assert!(PathBuf::from(&out_dir).join("metrics.json").is_file());

    let low = bearing(&["estimate", &record, "--resolution", "180x90"]);
    assert_eq!(low.status.code(), Some(0), "{}", stderr(&low));
    let low_line = stdout(&low);
    assert!((num(&low_line, "aoa_deg") - num(&line, "aoa_deg")).abs() <= 2.0);

    let sub = bearing(&["estimate", &record, "--resolution", "180x90", "--subsample", "2"]);
    assert_eq!(field(&stdout(&sub), "packets"), "440");
}

#[test]
fn thread_count_does_not_change_the_result() {
    let ws = Workspace::new();
    let record = ws.simulate(CLEAN_SCENE, "clean", &[]);
    let strip = |o: &Output| -> Vec<String> {
        stdout(o)
            .split_whitespace()
            .filter(|kv| !kv.starts_with("runtime_s="))
            .map(str::to_string)
            .collect()
    };
    let one = bearing(&["estimate", &record, "--resolution", "90x45", "--threads", "1"]);
    let env = Command::new(env!("CARGO_BIN_EXE_bearing"))
        .args(["estimate", &record, "--resolution", "90x45"])
        .env("BEARING_THREADS", "3")
        .output()
        .unwrap();
    assert!(one.status.success() && env.status.success());
    assert_eq!(strip(&one), strip(&env));
    let zero = bearing(&["estimate", &record, "--threads", "0"]);
    assert_eq!(zero.status.code(), Some(1));
}

#[test]
fn noise_only_record_is_rejected_with_exit_2() {
    let ws = Workspace::new();
    let scene = r#"{"tx_position": [3000.0, 0.0, 0.0], "noise_std": 1.0, "cfo_enabled": true, "rng_seed": 5}"#;
    let record = ws.simulate(scene, "noise", &[]);
    let out = bearing(&["estimate", &record, "--resolution", "90x45"]);
    assert_eq!(out.status.code(), Some(2), "{}{}", stdout(&out), stderr(&out));
    assert_eq!(field(&stdout(&out), "accepted"), "false");
}

#[test]
fn estimate_errors_exit_1() {
    let ws = Workspace::new();
    let missing = bearing(&["estimate", &ws.path("nope.json")]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("nope.json"));

    let bad = ws.write(
        "bad.json",
        r#"{"schema_version": 1,
            "meta": {"rx_id": 0, "tx_id": 1},
            "packets": {"forward": [{"counter": "x", "t": 0.0, "re": 1.0, "im": 0.0}], "reverse": []},
            "trajectories": {}}"#,
    );
    let out = bearing(&["estimate", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("packets.forward[0].counter"), "{err}");

    let record = ws.simulate(CLEAN_SCENE, "clean", &[]);
    let no_camera = bearing(&["estimate", &record, "--traj", "camera"]);
    assert_eq!(no_camera.status.code(), Some(1));
    assert!(stderr(&no_camera).contains("tracking_camera"), "{}", stderr(&no_camera));
    let bad_res = bearing(&["estimate", &record, "--resolution", "360by180"]);
    assert_ne!(bad_res.status.code(), Some(0));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let ws = Workspace::new();
    let scene = r#"{"tx_position": [5.0, 5.0, 1.0], "noise_std": 0.05, "cfo_enabled": true, "loss_rate": 0.1}"#;
    let a = ws.simulate(scene, "a", &["--seed", "11"]);
    let b = ws.simulate(scene, "b", &["--seed", "11"]);
    let c = ws.simulate(scene, "c", &["--seed", "12"]);
    let read = |f: &str| std::fs::read(f).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    let scene_path = ws.write("loss.json", scene);
    let out = bearing(&[
        "simulate",
        &scene_path,
        &ws.path("traj.json"),
        "--seed",
        "11",
        "--out",
        &ws.path("loss.record.json"),
    ]);
    let line = stdout(&out);
    let forward = num(&line, "forward");
    // binomial(880, 0.9): mean 792, sd ≈ 8.9
    assert!((760.0..=824.0).contains(&forward), "{line}");
}

#[test]
fn multipath_scene_reports_three_peaks() {
    let ws = Workspace::new();
    let scene = r#"{
        "tx_position": [50.0, 0.0, 0.0],
        "reflectors": [
            {"virtual_source_position": [0.0, 50.0, 0.0], "gain": 0.9},
            {"virtual_source_position": [-50.0, 0.0, 0.0], "gain": 0.8},
            {"virtual_source_position": [0.0, -50.0, 0.0], "gain": 0.7}
        ]
    }"#;
    let record = ws.simulate(scene, "multi", &[]);
    let out = bearing(&[
        "estimate",
        &record,
        "--resolution",
        "180x90",
        "--phase-factor",
        "single-trip",
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", stderr(&out));
    assert!(num(&stdout(&out), "peaks") >= 3.0, "{}", stdout(&out));
}

fn bearings_csv(rows: &[(f64, f64, f64, f64)]) -> String {
    let mut s = String::from("anchor_x,anchor_y,bearing_deg,variance\n");
    for (x, y, b, v) in rows {
        s.push_str(&format!("{x},{y},{b},{v}\n"));
    }
    s
}

fn toward(a: (f64, f64), t: (f64, f64)) -> f64 {
    (t.1 - a.1).atan2(t.0 - a.0).to_degrees()
}

#[test]
fn localize_exact_triangle() {
    let ws = Workspace::new();
    let target = (1.5, 2.0);
    let anchors = [(0.0, 0.0), (6.0, 0.0), (3.0, 5.0)];
    let rows: Vec<_> = anchors
        .iter()
        .map(|&a| (a.0, a.1, toward(a, target), 0.2))
        .collect();
    let file = ws.write("exact.csv", &bearings_csv(&rows));
    let json = ws.path("fix.json");
    let out = bearing(&["localize", &file, "--out", &json]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let line = stdout(&out);
    assert_eq!(field(&line, "x"), "1.5000");
    assert_eq!(field(&line, "y"), "2.0000");
    assert_eq!(field(&line, "used"), "3");
    let fix: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    let pos = fix["position"].as_array().unwrap();
    assert!((pos[0].as_f64().unwrap() - 1.5).abs() <= 1e-9);
    assert!((pos[1].as_f64().unwrap() - 2.0).abs() <= 1e-9);
}

#[test]
fn localize_single_survivor_fails() {
    let ws = Workspace::new();
    let rows = [(0.0, 0.0, 45.0, 0.2), (4.0, 0.0, 135.0, 1.3), (0.0, 4.0, -45.0, 1.1)];
    let file = ws.write("one.csv", &bearings_csv(&rows));
    let out = bearing(&["localize", &file, "--tau", "0.9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("insufficient observations"), "{}", stderr(&out));
    let loose = bearing(&["localize", &file, "--tau", "1.5"]);
    assert_eq!(loose.status.code(), Some(0));
}

#[test]
fn localize_noisy_seven_anchors() {
    let ws = Workspace::new();
    let target = (0.5, -0.3);
    let noise_deg = [4.1, -6.3, 2.2, -1.7, 5.5, -3.9, 0.8];
    let rows: Vec<_> = (0..7)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 7.0;
            let anchor = (8.0 * a.cos(), 8.0 * a.sin());
            (anchor.0, anchor.1, toward(anchor, target) + noise_deg[k], 0.3)
        })
        .collect();
    let file = ws.write("seven.csv", &bearings_csv(&rows));
    let out = bearing(&["localize", &file]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let line = stdout(&out);
    assert_eq!(field(&line, "used"), "7");
    let err = ((num(&line, "x") - target.0).powi(2) + (num(&line, "y") - target.1).powi(2)).sqrt();
    assert!(err < 1.2, "{line}");
    assert!(num(&line, "residual") > 0.0);
}

#[test]
fn bench_csv_rows() {
    let out = bearing(&["bench", "--config", "lowsub", "--threads", "1,2", "--csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "config,threads,resolution,subsample,packets,runtime_s,aoa_deg");
    assert_eq!(lines.len(), 3);
    for (line, threads) in lines[1..].iter().zip(["1", "2"]) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[..5], ["lowsub", threads, "180x90", "2", "440"]);
        assert!(cols[5].parse::<f64>().unwrap() > 0.0);
    }
    let bad = bearing(&["bench", "--config", "turbo"]);
    assert_ne!(bad.status.code(), Some(0));
}
