use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oneshot"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/bench").join(name)
}

fn scratch(test: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("oneshot-cli-{}-{test}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn manifest(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn solve_three_point_line() {
    let path = fixture("line3_uniform.json");
    let m = manifest(&run(&["solve", path.to_str().unwrap(), "--oracle", "exact"]));
    assert_eq!(m["command"], "solve");
    let r = &m["result"];
    let p: Vec<f64> = r["p"].as_array().unwrap().iter().map(f).collect();
    for (got, want) in p.iter().zip([0.25, 0.5, 0.25]) {
        assert!((got - want).abs() < 1e-9, "{p:?}");
    }
    assert!((f(&r["upper"]) - 0.25).abs() < 1e-9);
    assert!((f(&r["deterministic_baseline"]) - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(r["converged"], true);
    for key in ["lower_bound", "iterations", "active_set_size"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn lower_bound_with_beta_one() {
    let path = fixture("line3_uniform.json");
    let m = manifest(&run(&["lower-bound", path.to_str().unwrap(), "--beta", "1"]));
    // m = 1/3 on the uniform 3-point line, so m / 24 = 1/72.
    assert!((f(&m["result"]["lower_bound"]) - 1.0 / 72.0).abs() < 1e-15);
}

#[test]
fn interval_constants() {
    let m = manifest(&run(&["interval"]));
    let r3 = 3f64.sqrt();
    assert!((f(&m["result"]["c"]) - (2.0 - r3)).abs() < 1e-12);
    assert!((f(&m["result"]["value"]) - (1.0 - r3 / 2.0)).abs() < 1e-12);

    let v = manifest(&run(&["interval", "verify", "--grid-n", "21", "--gamma", "0.01"]));
    let gap = f(&v["result"]["gap"]);
    assert!((gap - (f(&v["result"]["numeric"]) - f(&v["result"]["closed_form"])).abs()).abs() < 1e-15);
}

#[test]
fn eval_reproduces_the_adversary_value() {
    let dir = scratch("roundtrip");
    let metric = fixture("matrix4_star.json");
    let metric = metric.to_str().unwrap();
    let solved = manifest(&run(&["solve", metric, "--oracle", "exact"]));
    let upper = f(&solved["result"]["upper"]);

    let dist = dir.join("p.json");
    std::fs::write(&dist, serde_json::json!({ "p": solved["result"]["p"] }).to_string()).unwrap();
    let adv = manifest(&run(&["adversary", metric, dist.to_str().unwrap(), "--oracle", "exact"]));
    let func = dir.join("f.json");
    std::fs::write(&func, adv["result"]["witness"].to_string()).unwrap();

    let ev = manifest(&run(&["eval", metric, func.to_str().unwrap(), dist.to_str().unwrap()]));
    assert_eq!(ev["result"]["lipschitz"], true);
    assert!((f(&ev["result"]["error"]) - upper).abs() < 1e-9);
    assert!((f(&adv["result"]["value"]) - upper).abs() < 1e-9);
}

#[test]
fn payload_is_reproducible() {
    let path = fixture("points6_hexagon.json");
    let a = manifest(&run(&["solve", path.to_str().unwrap()]));
    let b = manifest(&run(&["solve", path.to_str().unwrap()]));
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["input_digest"], b["input_digest"]);
}

#[test]
fn bench_is_deterministic_and_sandwiched() {
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/bench");
    let suite = suite.to_str().unwrap();
    let a = run(&["bench", suite, "--seed", "3"]);
    let b = run(&["bench", suite, "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# oneshot bench v1"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        let num = |name: &str| row[col(name)].parse::<f64>().unwrap();
        assert!(num("lower_bound") <= num("value") + 1e-9, "{row:?}");
        assert!(num("value") <= num("deterministic_m") + 1e-9, "{row:?}");
    }
}

#[test]
fn empty_suite_gives_header_only() {
    let dir = scratch("empty");
    let out = run(&["bench", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("# oneshot bench v1\nname,"));
}

#[test]
fn generated_fixtures_are_seeded_and_loadable() {
    let a = run(&["gen-fixture", "--kind", "line", "--n", "7", "--seed", "11"]);
    let b = run(&["gen-fixture", "--kind", "line", "--n", "7", "--seed", "11"]);
    let c = run(&["gen-fixture", "--kind", "line", "--n", "7", "--seed", "12"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);

    let dir = scratch("gen");
    let path = dir.join("line7.json");
    std::fs::write(&path, &a.stdout).unwrap();
    let m = manifest(&run(&["solve", path.to_str().unwrap()]));
    assert_eq!(m["result"]["p"].as_array().unwrap().len(), 7);
}

#[test]
fn exit_codes() {
    let dir = scratch("exit");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"kind":"matrix","dist":[[0,1],[2,0]]}"#).unwrap();
    assert_eq!(run(&["solve", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["solve", "/nonexistent/metric.json"]).status.code(), Some(1));
    assert_eq!(run(&["solve"]).status.code(), Some(1));

    let big = fixture("line16_uniform.json");
    let big = big.to_str().unwrap();
    // Resource cap: 16 points is over the exact oracle's limit.
    assert_eq!(run(&["solve", big, "--oracle", "exact"]).status.code(), Some(3));

    // Non-convergence still prints the manifest.
    let out = run(&["solve", big, "--oracle", "line-dp", "--gamma", "0.01", "--max-iters", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let m: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["result"]["converged"], false);

    let out = bin().args(["interval"]).env("ONESHOT_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["interval"]).env("ONESHOT_THREADS", "2").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
