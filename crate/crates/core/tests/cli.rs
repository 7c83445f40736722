use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("bayesmatch-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayesmatch"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn missing_seed_is_a_config_error() {
    let d = tmp("noseed");
    assert_eq!(run(&["generate"], &d).status.code(), Some(2));
}

#[test]
fn malformed_config_is_a_config_error() {
    let d = tmp("badcfg");
    let cfg = write_config(&d, r#"{"seed": 1, "nn": [4]}"#);
    assert_eq!(run(&["marginals", "--config", &cfg], &d).status.code(), Some(2));
}

#[test]
fn engine_over_cap_exits_3() {
    let d = tmp("cap");
    let cfg = write_config(&d, r#"{"n": [14], "reps": 1}"#);
    let out = run(&["marginals", "--config", &cfg, "--seed", "1", "--engine", "bruteforce"], &d);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flags_override_config() {
    let d = tmp("override");
    let cfg = write_config(&d, r#"{"n": [5], "reps": 4, "seed": 1}"#);
    let out = run(&["generate", "--config", &cfg, "--reps", "2", "--seed", "7"], &d);
    assert!(out.status.success());
    let manifest = std::fs::read_to_string(d.join("out/manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(m["entries"].as_array().unwrap().len(), 2);
    assert_eq!(m["seed"], 7);
}

#[test]
fn marginals_from_generated_instance() {
    let d = tmp("roundtrip");
    let cfg = write_config(&d, r#"{"n": [6], "reps": 1, "seed": 3}"#);
    assert!(run(&["generate", "--config", &cfg], &d).status.success());
    let inst = d.join("out/instances/exact_n6_r0.json");
    let direct = run(&["marginals", "--config", &cfg], &d);
    assert!(direct.status.success());
    let a = std::fs::read_to_string(d.join("out/marginals/exact_n6_r0.csv")).unwrap();
    let from_file = run(&["marginals", "--config", &cfg, inst.to_str().unwrap()], &d);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let b = std::fs::read_to_string(d.join("out/marginals/exact_n6_r0.csv")).unwrap();
    let body = |t: &str| t.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&a), body(&b));
    assert!(a.lines().any(|l| l == "i,j,prob"));
}
