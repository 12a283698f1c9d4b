use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn rrrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrrp")).args(args).output().unwrap()
}

fn json_out(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn exact_solve_of_tiny_instance_costs_ten() {
    let tiny = data("tiny.json");
    let v = json_out(&rrrp(&["solve", tiny.to_str().unwrap(), "--algo", "exact"]));
    assert_eq!(v["cost"], 10.0);
    assert_eq!(v["schedule"], serde_json::json!([0]));
    assert_eq!(v["manifest_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn bicriteria_solve_of_tiny_instance_costs_ten_without_violations() {
    let tiny = data("tiny.json");
    let v = json_out(&rrrp(&["solve", tiny.to_str().unwrap(), "--algo", "bicriteria", "--epsilon", "1"]));
    assert_eq!(v["cost"], 10.0);
    assert_eq!(v["violation_count"], 0);
}

#[test]
fn impossible_risk_level_exits_two() {
    // ln(1/0.9) is below the lightest edge weight of 0.5.
    let tiny = data("tiny.json");
    let out = rrrp(&["solve", tiny.to_str().unwrap(), "--algo", "feasible", "--rho-override", "0.9"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_json_exits_one_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"uav_groups\": [[0]], \"edges\": [").unwrap();
    let out = rrrp(&["solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parsing") && err.contains("EOF"), "{err}");
}

#[test]
fn missing_files_and_bad_flags_exit_one() {
    assert_eq!(rrrp(&["simulate", "/nonexistent/demo.json"]).status.code(), Some(1));
    assert_eq!(rrrp(&["solve", "/nonexistent/tiny.json"]).status.code(), Some(1));
    assert_eq!(rrrp(&["solve", "--algo", "magic", "x.json"]).status.code(), Some(1));
    assert_eq!(rrrp(&["--version"]).status.code(), Some(0));
}

#[test]
fn simulate_twice_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let scn = data("shuttle.json");
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = rrrp(&[
            "simulate",
            scn.to_str().unwrap(),
            "--policy",
            "greedy:0.5",
            "--trials",
            "1",
            "--seed",
            "7",
            "--format",
            "csv",
            "--events",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let csv_a = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(csv_a.starts_with("policy,rho,seed,ttff_s,overhead,nodes,rdv_per_horizon\ngreedy-50,,7,"));
    assert_eq!(csv_a, std::fs::read_to_string(b.join("metrics.csv")).unwrap());
    let log = |d: &Path| std::fs::read(d.join("events/greedy-50_seed7.ndjson")).unwrap();
    assert!(!log(&a).is_empty());
    assert_eq!(log(&a), log(&b));

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let other: serde_json::Value = serde_json::from_slice(&std::fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], other["config_hash"]);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 3);
}

#[test]
fn rho_list_runs_one_cell_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let scn = data("shuttle.json");
    let out = rrrp(&[
        "simulate",
        scn.to_str().unwrap(),
        "--policy",
        "rrrp,greedy-30",
        "--rho",
        "0.05,0.2",
        "--trials",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3 * 2);
    let summary = String::from_utf8_lossy(&out.stdout);
    assert_eq!(summary.lines().count(), 3, "{summary}");
}

#[test]
fn generated_evenodd_instance_solves() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("eo.json");
    let out = rrrp(&["gen", "evenodd", "--list", "3,1,1,3", "-o", inst.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("eo.json.manifest.json").exists());
    let v = json_out(&rrrp(&["solve", inst.to_str().unwrap(), "--algo", "exact"]));
    assert_eq!(v["cost"], 4.0);
}

#[test]
fn generated_random_instance_is_reproducible() {
    let gen = || rrrp(&["gen", "random", "--uavs", "3", "--seed", "11"]).stdout;
    let a = gen();
    assert!(!a.is_empty());
    assert_eq!(a, gen());
}

#[test]
fn generated_scenario_simulates() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("scn.json");
    let out = rrrp(&["gen", "scenario", "--uavs", "2", "--reach", "3000", "-o", scn.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&scn).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["sim"]["max_time_s"] = 600.0.into();
    std::fs::write(&scn, v.to_string()).unwrap();
    let out = rrrp(&["simulate", scn.to_str().unwrap(), "--trials", "1", "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bench_reports_gap_for_small_sizes_only() {
    let out = rrrp(&["bench", "--sizes", "40,3000", "--trials", "2", "--format", "csv", "--node-cap", "100000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let gap = &r[8];
        if &r[0] == "40" {
            assert!(gap.parse::<f64>().unwrap() >= -1e-9);
        } else {
            assert!(gap.is_empty());
        }
    }
}
