use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavsched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .display()
        .to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn exact_solvers_agree_on_tiny() {
    let tiny = scenario("tiny.toml");
    let mut totals = Vec::new();
    for solver in ["exact", "bruteforce"] {
        let out = bin(&["solve", "--scenario", &tiny, "--solver", solver]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = String::from_utf8(out.stdout).unwrap();
        let total: f64 = text
            .split_whitespace()
            .skip_while(|w| *w != "total")
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        totals.push(total);
    }
    assert!((totals[0] - totals[1]).abs() < 1e-6, "{totals:?}");
}

#[test]
fn sweep_writes_energy_table() {
    let dir = scratch("sweep");
    let out = bin(&[
        "sweep",
        "--scenario",
        &scenario("tiny.toml"),
        "--solver",
        "greedy,gss-heu",
        "--axis",
        "T_max",
        "--values",
        "4,5",
        "--seed",
        "0,1",
        "--out",
        dir.to_str().unwrap(),
        "--no-timing",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("energy_vs_T_max.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "solver,T_max,seed,status,total_J,comm_J,hover_J,delivered_ratio,wall_ms"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.ends_with(",NA")));
}

#[test]
fn train_then_eval_round_trips() {
    let dir = scratch("train");
    let params = dir.join("agent.json");
    let curve = dir.join("curve.csv");
    let tiny = scenario("tiny.toml");
    let out = bin(&[
        "train",
        "--scenario",
        &tiny,
        "--episodes",
        "5",
        "--out",
        params.to_str().unwrap(),
        "--curve",
        curve.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(fs::read_to_string(&curve).unwrap().lines().count(), 6);
    let out = bin(&[
        "eval",
        "--scenario",
        &tiny,
        "--agent",
        params.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8(out.stdout).unwrap().contains("delivered"));
}

#[test]
fn unknown_scenario_key_is_named() {
    let dir = scratch("badkey");
    let path = dir.join("bad.toml");
    fs::write(&path, "[radio]\nbandwith_hz = 1e6\n").unwrap();
    let out = bin(&[
        "solve",
        "--scenario",
        path.to_str().unwrap(),
        "--solver",
        "greedy",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bandwith_hz"));
}

#[test]
fn dump_trace_is_deterministic() {
    let tiny = scenario("tiny.toml");
    let a = bin(&["dump-trace", "--scenario", &tiny, "--seed", "7"]);
    let b = bin(&["dump-trace", "--scenario", &tiny, "--seed", "7"]);
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}
