use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn dopt(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dopt"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn dopt");
    if let Some(text) = stdin {
        child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    }
    child.wait_with_output().unwrap()
}

fn json_out(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn solve_two_parameter_model() {
    let v = json_out(&dopt(&["solve", "--m", "2"], None));
    assert!((v["objective"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert_eq!(floats(&v["design"]["support"]), vec![0.0, 1.0]);
    for w in floats(&v["design"]["weights"]) {
        assert!((w - 0.5).abs() < 1e-6);
    }
    for key in ["design", "canonical_moments", "objective", "diagnostics"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn oracle_agrees_with_solve() {
    let problem = r#"{"kind": "dopt", "payload": {"m": 2, "beta": [2.0], "b": [1]}}"#;
    let solved = json_out(&dopt(&["solve", "-"], Some(problem)));
    let oracle = json_out(&dopt(&["oracle", "-", "--grid", "101"], Some(problem)));
    let (a, b) = (solved["objective"].as_f64().unwrap(), oracle["objective"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-5 * b, "{a} vs {b}");

    let plain = json_out(&dopt(&["oracle", "--m", "2", "--mode", "rational"], None));
    assert_eq!(floats(&plain["design"]["support"]), vec![0.0, 1.0]);
    assert_eq!(plain["diagnostics"]["exact_objective"], "1/4");
}

#[test]
fn seed_makes_runs_reproducible() {
    let args = ["solve", "--m", "3", "--beta", "-0.5", "--b", "1", "--seed", "11", "--restarts", "4"];
    let a = dopt(&args, None);
    let b = dopt(&args, None);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn canonical_moments_reproduce_the_design() {
    let v = json_out(&dopt(&["solve", "--m", "3", "--beta", "1.5", "--b", "1"], None));
    let p = floats(&v["canonical_moments"]);
    let terminal = if *p.last().unwrap() == 0.0 {
        dopt_core::Terminal::Zero
    } else {
        dopt_core::Terminal::One
    };
    let seq = dopt_core::CanonicalSequence::new(p[..p.len() - 1].to_vec(), Some(terminal)).unwrap();
    let mu = dopt_core::optimize::reconstruct_design(&seq).unwrap();
    let support = floats(&v["design"]["support"]);
    let weights = floats(&v["design"]["weights"]);
    assert_eq!(mu.len(), support.len());
    for i in 0..mu.len() {
        assert!((mu.support()[i] - support[i]).abs() < 1e-8);
        assert!((mu.weights()[i] - weights[i]).abs() < 1e-8);
    }
}

#[test]
fn robust_and_maximin_commands() {
    let robust = r#"{"kind": "robust", "payload": {"m": 2, "alpha": 0, "d": 0.25}, "options": {"restarts": 2}}"#;
    let v = json_out(&dopt(&["robust", "-"], Some(robust)));
    assert_eq!(v["design"]["domain"], "symmetric");
    assert!(v["diagnostics"]["constraint"].as_f64().unwrap() <= 0.25);

    let maximin = r#"{"m": 2, "g": [[0, 1], [0, 0, 1]], "theta_box": [[1, 2], [1, 2]]}"#;
    let v = json_out(&dopt(&["maximin", "-", "--pschedule", "-1,-4", "--nodes", "8", "--restarts", "2"], Some(maximin)));
    let path = v["path"].as_array().unwrap();
    assert_eq!(path.len(), 2);
    assert_eq!(path[1]["diagnostics"]["pmean_exponent"], -4.0);
}

#[test]
fn check_reports_counts() {
    let v = json_out(&dopt(&["check", "--instances", "5", "--seed", "2"], None));
    assert_eq!(v["failed"], 0);
    assert!(v["passed"].as_u64().unwrap() >= 5);
}

#[test]
fn writes_to_out_path() {
    let path = std::env::temp_dir().join(format!("dopt-out-{}.json", std::process::id()));
    let out = dopt(&["solve", "--m", "2", "--out", path.to_str().unwrap()], None);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert!((v["objective"].as_f64().unwrap() - 0.25).abs() < 1e-9);
}

fn error_of(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).expect("JSON on stderr");
    v["error"].clone()
}

#[test]
fn invalid_input_exits_with_two() {
    let out = dopt(&["solve", "--m", "0"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "InvalidSpec");

    let out = dopt(&["solve", "-"], Some("{not json"));
    assert_eq!(out.status.code(), Some(2));

    let out = dopt(&["solve", "-"], Some(r#"{"kind": "robust", "payload": {"m": 2, "alpha": 0, "d": 1}}"#));
    assert_eq!(out.status.code(), Some(2));

    let out = dopt(&["maximin", "-", "--pschedule", "-1,-0.5"], Some(r#"{"m": 1, "g": [[0, 1]], "theta_box": [[0, 1]]}"#));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_budget_exits_with_one() {
    // The constraint is p_1^2 here, and the box keeps p_1 >= epsilon.
    let robust = r#"{"m": 2, "alpha": 0, "d": 1e-300}"#;
    let out = dopt(&["robust", "-", "--restarts", "1"], Some(robust));
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(error_of(&out)["kind"], "InfeasibleBudget");
}
