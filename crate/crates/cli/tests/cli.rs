use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn plandos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plandos"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_v1(out: &Path) -> Value {
    let o = plandos(&[
        "run",
        "--subject",
        "v1",
        "--rng-seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap()
}

#[test]
fn listings() {
    let o = plandos(&["list-subjects"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 9);
    let o = plandos(&["list-pis"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for i in 1..=7 {
        assert!(text.contains(&format!("PI{i} ")));
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(plandos(&["run", "--subject", "v10"]).status.code(), Some(2));
    assert_eq!(plandos(&["run", "--subject", "v1", "--mode", "fast"]).status.code(), Some(2));
    assert_eq!(plandos(&[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let o = plandos(&["experiment", "/nonexistent/spec.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/spec.json"));
    let o = plandos(&["run", "--subject", "v1", "--pi", "PI3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_then_replay_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v1.json");
    let result = run_v1(&out);
    assert_eq!(result["outcome"]["status"], "found");
    let o = plandos(&["replay", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS v1 PI1"));
}

fn tampered(result: &Value, f: impl Fn(&mut Value)) -> Value {
    let mut v = result["outcome"]["violation"].clone();
    for o in v["scenario"]["objects"].as_array_mut().unwrap() {
        if o["id"].as_u64().unwrap() >= 1000 {
            f(o);
        }
    }
    v
}

#[test]
fn tampered_violations_fail_replay() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_v1(&dir.path().join("v1.json"));

    // Attacker objects dropped onto the lane centre: the premise no longer holds.
    let on_lane = tampered(&result, |o| o["center"][1] = 0.0.into());
    let p = dir.path().join("on_lane.json");
    std::fs::write(&p, on_lane.to_string()).unwrap();
    let o = plandos(&["replay", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("FAIL") && stdout(&o).contains("premise"));

    // Attacker objects moved far to the side: the lane is clear again.
    let far = tampered(&result, |o| {
        let y = o["center"][1].as_f64().unwrap();
        o["center"][1] = (y.signum() * 25.0).into();
    });
    let p = dir.path().join("far.json");
    std::fs::write(&p, far.to_string()).unwrap();
    let o = plandos(&["replay", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("decision Clear"), "{}", stdout(&o));
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"entries":[{"seed_file":"v3_lane_borrow.json","subject":"v3"}],
            "modes":["full","no_guide"],"runs":3,"budget":2000,"base_seed":7}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let args = ["experiment", spec.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let o = plandos(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("no-guide"));
    let report_a = std::fs::read_to_string(out.join("report.json")).unwrap();
    let report: Value = serde_json::from_str(&report_a).unwrap();
    assert_eq!(report["summaries"][0]["found"], 3);
    assert_eq!(std::fs::read_to_string(out.join("results.jsonl")).unwrap().lines().count(), 6);
    assert!(out.join("report.txt").is_file());

    let o = plandos(&["replay", out.join("results.jsonl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    // Same base seed, same report apart from timing.
    plandos(&args);
    let report_b = std::fs::read_to_string(out.join("report.json")).unwrap();
    let strip = |s: &str| -> Value {
        let mut v: Value = serde_json::from_str(s).unwrap();
        for m in v["summaries"].as_array_mut().unwrap() {
            m["mean_wall_time_secs"] = 0.into();
        }
        v
    };
    assert_eq!(strip(&report_a), strip(&report_b));

    // A single run cannot be tested for significance.
    let o = plandos(&[
        "experiment",
        spec.to_str().unwrap(),
        "--runs",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("insufficient runs"));
}

#[test]
fn missed_full_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"entries":[{"seed_file":"v1_narrow_lane.json","subject":"v1"}],
            "modes":["full"],"runs":1,"budget":5,"base_seed":0}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = plandos(&["experiment", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = plandos(&["run", "--subject", "v1", "--budget", "5"]);
    assert_eq!(o.status.code(), Some(2));
}
