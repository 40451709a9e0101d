use std::path::PathBuf;
use std::process::{Command, Output};

fn radjump(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radjump")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("radjump-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn gaussian_all_checks_exit_zero() {
    let cfg = scratch("gauss.json");
    std::fs::write(
        &cfg,
        r#"{"profiles":[{"id":"g","type":"gaussian_mixture","d":2,"weights":[1],"variances":[1]}],
            "checks":"all","mc":{"samples":20000,"seed":5}}"#,
    )
    .unwrap();
    let (csv, json) = (scratch("gauss.csv"), scratch("gauss.out.json"));
    let out = radjump(&["run", cfg.to_str().unwrap(), "--jobs", "2", "--csv", csv.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "profile_id,d,check,epsilon,lhs,rhs,constant,margin,tolerance,pass");
    for line in lines {
        assert!(line.starts_with("g,2,") && line.ends_with(",true"), "{line}");
    }
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(doc["summary"]["failed"], 0);
}

#[test]
fn negative_weight_names_the_field() {
    let cfg = scratch("bad.json");
    std::fs::write(&cfg, r#"{"profiles":[{"type":"gaussian_mixture","d":2,"weights":[0.5,-0.5],"variances":[1,2]}]}"#)
        .unwrap();
    let out = radjump(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("profiles[0].weights[1]"), "{err}");
}

#[test]
fn malformed_config_reports_line() {
    let cfg = scratch("malformed.json");
    std::fs::write(&cfg, "{\n  \"profiles\": [\n    {\"type\": \"gaussian_mixture\", \"d\": 2,,}\n  ]\n}").unwrap();
    let out = radjump(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn corpus_is_deterministic_per_seed() {
    let a = radjump(&["corpus", "--seed", "0"]);
    let b = radjump(&["corpus", "--seed", "0"]);
    let c = radjump(&["corpus", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let parse = |o: &Output| -> Vec<serde_json::Value> { serde_json::from_slice(&o.stdout).unwrap() };
    let (a, c) = (parse(&a), parse(&c));
    assert_eq!(a.len(), 14);
    assert_eq!(a[..12], c[..12]);
    assert_ne!(a[12], c[12]);
    assert_ne!(a[13], c[13]);
}

#[test]
fn eval_prints_one_number() {
    let p = scratch("g3.json");
    std::fs::write(&p, r#"{"type":"gaussian_mixture","d":3,"weights":[1],"variances":[2]}"#).unwrap();
    let out = radjump(&["eval", p.to_str().unwrap(), "--functional", "J"]);
    assert!(out.status.success());
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((v - 1.5).abs() < 1e-10, "{v}");
    let out = radjump(&["eval", p.to_str().unwrap(), "--functional", "h"]);
    let h: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    let exact = 1.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 2.0).ln();
    assert!((h - exact).abs() < 1e-10);
}
