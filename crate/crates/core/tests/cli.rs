use std::fs;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigid-coverage")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn graph_gen_prints_a_laman_graph() {
    let out = cli(&["graph", "gen", "--n", "7", "--seed", "3"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["graph"]["edges"].as_array().unwrap().len(), 11);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let out = cli(&["graph", "gen", "--n", "7", "--seed", "3", "--split-prob", "0.5", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let g: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(g, v["graph"]);
}

#[test]
fn recover_and_rigidity_check() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    fs::write(&graph, r#"{"n": 6, "edges": [[0,1],[0,2],[0,3],[0,4],[0,5],[1,2],[2,3],[3,4],[4,5]]}"#).unwrap();
    let out = cli(&["recover", "--graph", graph.to_str().unwrap(), "--lose", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["laman"], true);
    assert_eq!(v["repair"]["new_edges"].as_array().unwrap().len(), 3);

    let plan = dir.path().join("plan.json");
    let out = cli(&["recover", "plan", "--graph", graph.to_str().unwrap(), "--out", plan.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(v.as_object().unwrap().len(), 18);
    assert!(v.get("1:0").is_some());

    let fw = dir.path().join("fw.json");
    fs::write(&fw, r#"{"n": 3, "edges": [[0,1],[1,2],[0,2]], "dim": 2, "positions": [[0,0],[1,0],[0,1]]}"#).unwrap();
    let out = cli(&["rigidity", "check", fw.to_str().unwrap(), "--tol", "1e-8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["ibr"], true);
    assert_eq!(v["rank"], 3);
    assert_eq!(v["trivial_bound"], 3);
    assert!(v["smallest_nontrivial_singular_value"].as_f64().unwrap() > 0.1);
}

#[test]
fn coverage_cost_of_one_centered_robot() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(&config, r#"{"density": {"type": "uniform"}}"#).unwrap();
    let positions = dir.path().join("p.json");
    fs::write(&positions, "[[0.5, 0.5]]").unwrap();
    let out = cli(&["coverage", "cost", "--config", config.to_str().unwrap(), "--positions", positions.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cost = stdout_json(&out)["cost"].as_f64().unwrap();
    assert!((cost - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["graph", "gen"]).status.code(), Some(1));
    let missing = cli(&["validate", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/cfg.json"));
    // a lost vertex that does not exist is an input error
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    fs::write(&graph, r#"{"n": 3, "edges": [[0,1],[1,2],[0,2]]}"#).unwrap();
    assert_eq!(cli(&["recover", "--graph", graph.to_str().unwrap(), "--lose", "7"]).status.code(), Some(1));
}

#[test]
fn simulate_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"steps": 2}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = cli(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 2 * 6);
    assert_eq!(cli(&["validate", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
}
