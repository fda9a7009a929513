use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_percobound")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn phi_unit_ball_is_four_p() {
    let out = run(&["phi", "--graph", "lattice:2", "--p", "0.5", "--ball", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["value"], 2.0);
    assert_eq!(v["result"]["exact"], "2");
    assert_eq!(v["result"]["method"], "exact");
    assert_eq!(v["config"]["truncation"], 2);
    assert_eq!(v["tool"], "percobound");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn phi_away_from_origin_grows_truncation() {
    let out = run(&["phi", "--graph", "lattice:2", "--p", "0.25", "--ball", "1", "--origin", "(3,2)"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["result"]["value"], 1.0);
    assert_eq!(v["result"]["vertex"], "(3,2)");
    assert!(v["config"]["truncation"].as_u64().unwrap() >= 6);
}

#[test]
fn verify_on_empty_set_is_degenerate() {
    let out = run(&["verify-bound", "--graph", "lattice:2", "--p", "0.7", "--segment-length", "0", "--pc-estimate", "0.6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn parameter_and_usage_errors_exit_one() {
    assert_eq!(run(&["phi", "--graph", "lattice:2", "--p", "1.5"]).status.code(), Some(1));
    assert_eq!(run(&["phi", "--graph", "lattice:2", "--p", "0.5", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["phi", "--graph", "ring:2", "--p", "0.5"]).status.code(), Some(1));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn truncation_errors_exit_two() {
    let out = run(&["phi", "--graph", "lattice:2", "--p", "0.5", "--ball", "3", "--truncation", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

fn outputs(dir: &Path, args: &[&str]) -> Vec<(String, Vec<u8>)> {
    let mut full: Vec<&str> = args.to_vec();
    let d = dir.to_str().unwrap();
    full.extend(["--out", d]);
    let out = run(&full);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "pack", "--graph", "lattice:2", "--p", "0.7", "--segment-length", "16", "--spacing", "4", "--eps", "0.3",
        "--c", "0.5", "--rproxy", "8", "--replicas", "3000", "--seed", "9",
    ];
    let a = outputs(&tmp.path().join("a"), &args);
    let b = outputs(&tmp.path().join("b"), &args);
    assert_eq!(a, b);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["pack.json", "pack_steps.csv"]);
    let csv = String::from_utf8(a[1].1.clone()).unwrap();
    assert!(csv.starts_with("index,w,label,d,q_ball,q_ball_low,q_inf,q_far,excess_high,margin,"));
}

#[test]
fn monte_carlo_phi_is_reproducible() {
    let args = ["phi", "--graph", "tree:2", "--p", "0.4", "--ball", "3", "--method", "mc", "--replicas", "5000", "--seed", "3"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    let (lo, hi) = (v["result"]["ci"][0].as_f64().unwrap(), v["result"]["ci"][1].as_f64().unwrap());
    // (2p)^3 on the binary tree
    let exact = 0.8f64.powi(3);
    assert!(lo <= exact && exact <= hi, "{lo} {exact} {hi}");
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "graph = lattice:2\np = 0.3\n[phi]\nball = 1\n[pack]\nball = 9\n").unwrap();
    let c = cfg.to_str().unwrap();
    let v = json(&run(&["phi", "--config", c]));
    assert!((v["result"]["value"].as_f64().unwrap() - 1.2).abs() < 1e-12);
    let v = json(&run(&["phi", "--config", c, "--p", "0.25"]));
    assert_eq!(v["result"]["value"], 1.0);
    assert_eq!(v["config"]["p"], 0.25);
    std::fs::write(&cfg, "graph lattice:2\n").unwrap();
    assert_eq!(run(&["phi", "--config", c]).status.code(), Some(1));
}

#[test]
fn pc_bound_on_tree() {
    let out = run(&["pc-bound", "--graph", "tree:2", "--rmax", "3", "--tolerance", "0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let p = v["result"]["value"].as_f64().unwrap();
    assert!(p > 0.3 && p <= 0.5, "{p}");
}

#[test]
fn simulate_profile_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let files = outputs(
        tmp.path(),
        &["simulate", "--graph", "lattice:2", "--p", "0.6", "--set", "(0,0);(1,0)", "--radii", "2,4,8", "--replicas", "2000"],
    );
    let csv = String::from_utf8(files[0].1.clone()).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("radius,successes,replicas,point,ci_low,ci_high"));
    let counts: Vec<u64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(counts.len(), 3);
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn verify_bound_writes_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let files = outputs(
        tmp.path(),
        &[
            "verify-bound", "--graph", "lattice:2", "--p", "0.75", "--segment-length", "8", "--rproxy", "8",
            "--replicas", "2000", "--pc-estimate", "0.6", "--grid-p1", "0.62,0.7", "--eps", "0.2", "--delta", "0.2,0.4",
        ],
    );
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["verify.json", "verify_grid.csv", "verify_profile.csv"]);
    let grid = String::from_utf8(files[1].1.clone()).unwrap();
    assert_eq!(grid.lines().count(), 1 + 4);
    let v: serde_json::Value = serde_json::from_slice(&files[0].1).unwrap();
    assert_eq!(v["result"]["verdict"], "consistent");
}
