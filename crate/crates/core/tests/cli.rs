use std::process::{Command, Output};

use serde_json::Value;

fn gsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsr"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn xi_command() {
    let v = json(&gsr(&["xi", "--mu", "0.2"]));
    assert!((v["xi"].as_f64().unwrap() - 0.89004).abs() < 5e-5);
    assert!(v["terms"].as_u64().unwrap() > 0);
    let neg = gsr(&["xi", "--mu", "-0.5"]);
    let pos = gsr(&["xi", "--mu", "0.5"]);
    assert_eq!(neg.stdout, pos.stdout);
}

#[test]
fn zero_shift_is_a_usage_error() {
    let out = gsr(&["xi", "--mu", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn calibrate_seed_uses_xi() {
    let xi = json(&gsr(&["xi", "--mu", "1.0"]))["xi"].as_f64().unwrap();
    let cal = json(&gsr(&[
        "calibrate",
        "--mu",
        "1.0",
        "--gamma",
        "100",
        "--r",
        "3.05",
        "--resolution",
        "256",
    ]));
    assert_eq!(cal["seed"].as_f64().unwrap(), xi * 103.05);
    assert!((cal["arl"].as_f64().unwrap() - 100.0).abs() <= 1e-2);
}

#[test]
fn evaluate_report_fields() {
    let out = gsr(&[
        "evaluate", "--mu", "0.2", "--r", "37.42", "--limit", "122.02",
    ]);
    let v = json(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    let keys: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("  \"").and_then(|l| l.split('"').next()))
        .collect();
    assert_eq!(
        keys,
        [
            "mu",
            "r",
            "limit",
            "resolution",
            "arl",
            "add0",
            "sadd",
            "sadd_argmax",
            "iadd",
            "riadd",
            "stadd",
            "lower_bound",
            "profile"
        ]
    );
    assert!((v["arl"].as_f64().unwrap() - 100.0).abs() < 0.1);
    assert!((v["sadd"].as_f64().unwrap() - 30.9).abs() < 0.05);
    assert!((v["lower_bound"].as_f64().unwrap() - 30.62).abs() < 0.01);
    assert!(v["lower_bound"].as_f64().unwrap() <= v["sadd"].as_f64().unwrap());
    let surv: f64 = v["profile"]["survival_k"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .sum();
    let total = surv + v["profile"]["survival_tail"].as_f64().unwrap();
    assert!((total - v["arl"].as_f64().unwrap()).abs() / total < 1e-3);
    assert_eq!(
        v["profile"]["k"].as_array().unwrap().len(),
        v["profile"]["add_k"].as_array().unwrap().len()
    );
}

#[test]
fn evaluate_without_headstart() {
    let v = json(&gsr(&[
        "evaluate",
        "--mu",
        "0.5",
        "--gamma",
        "100",
        "--resolution",
        "256",
    ]));
    assert_eq!(v["stadd"], v["riadd"]);
    assert_eq!(v["sadd_argmax"], 0);
}

#[test]
fn headstart_above_limit_is_rejected() {
    let out = gsr(&["evaluate", "--mu", "0.5", "--r", "90", "--limit", "82.14"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn conflicting_design_flags_are_rejected() {
    let out = gsr(&["evaluate", "--mu", "0.5", "--limit", "80", "--gamma", "100"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn table_marks_failed_cells() {
    let out = gsr(&[
        "table",
        "--mu",
        "1.0",
        "--gamma",
        "1",
        "100",
        "--resolution",
        "256",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "gamma,mu,r_star,a_star,sadd,lower_bound,arl_achieved,gap"
    );
    assert_eq!(lines[1], "1,1,error,error,error,error,error,error");
    assert!(lines[2].starts_with("100,1,3.0"), "{}", lines[2]);
    assert!(!text.contains('\r'));
}

#[test]
fn table_orders_cells() {
    let out = gsr(&[
        "table",
        "--mu",
        "1.0",
        "0.9",
        "--gamma",
        "200",
        "100",
        "--resolution",
        "256",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let keys: Vec<String> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(keys, ["100,0.9", "100,1", "200,0.9", "200,1"]);
}

#[test]
fn simulate_reports_side_by_side() {
    let args = [
        "simulate",
        "--mu",
        "1.0",
        "--r",
        "3.05",
        "--limit",
        "57.31",
        "--change-point",
        "0",
        "3",
        "--replications",
        "5000",
        "--seed",
        "5",
        "--resolution",
        "256",
    ];
    let out = gsr(&args);
    let v = json(&out);
    let est = v["estimates"].as_array().unwrap();
    let names: Vec<&str> = est
        .iter()
        .map(|e| e["quantity"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["arl", "add_0", "add_3", "survival_3"]);
    assert_eq!(est[1]["effective_replications"], 5000);
    for e in est {
        assert!(e["z"].as_f64().unwrap().abs() < 3.0, "{e}");
    }
    assert_eq!(gsr(&args).stdout, out.stdout);
}

#[test]
fn simulate_needs_survivors() {
    let out = gsr(&[
        "simulate",
        "--mu",
        "1.0",
        "--limit",
        "1.0",
        "--change-point",
        "50",
        "--replications",
        "150",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("survived"));
}

#[test]
fn output_file() {
    let path = std::env::temp_dir().join(format!("gsr-xi-{}.csv", std::process::id()));
    let out = gsr(&[
        "--out",
        path.to_str().unwrap(),
        "xi",
        "--mu",
        "0.5",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.starts_with("mu,xi,terms,tail\n0.5,0.7476"));
}
