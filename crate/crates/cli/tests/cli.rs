use std::path::Path;
use std::process::{Command, Output};

fn glshrink(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glshrink"))
        .current_dir(dir)
        .env_remove("GLSHRINK_CONFIG")
        .env_remove("GLSHRINK_OUT")
        .env_remove("GLSHRINK_SEED")
        .env_remove("GLSHRINK_THREADS")
        .env_remove("GLSHRINK_SCENARIO")
        .args(args)
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

const SMALL: &str = "scenario = \"mse_eb\"\nn = [100, 200]\nreplicates = 2\n";

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    for out in ["a", "b"] {
        let o = glshrink(dir.path(), &["simulate", "--config", "c.toml", "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("a/report.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/report.csv")).unwrap();
    assert_eq!(a, b);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["root_seed"], 1);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_precedence_is_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), format!("{SMALL}seed = 5\n")).unwrap();
    let seed_of = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_glshrink"));
        cmd.current_dir(dir.path()).env_remove("GLSHRINK_SEED").args(args);
        if let Some(s) = env {
            cmd.env("GLSHRINK_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
        m["root_seed"].as_u64().unwrap()
    };
    let base = ["simulate", "--config", "c.toml", "--out", "o"];
    assert_eq!(seed_of(&base, None), 5);
    assert_eq!(seed_of(&base, Some("6")), 6);
    let with_flag = [&base[..], &["--seed", "7"]].concat();
    assert_eq!(seed_of(&with_flag, Some("6")), 7);
}

#[test]
fn config_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "scenario = \"mse_eb\"\neb = { c1 = 1.5 }\nextra = 1\n").unwrap();
    let e = error_json(&glshrink(dir.path(), &["simulate", "--config", "bad.toml"]));
    assert_eq!(e["error"]["kind"], "config");
    let details = e["error"]["details"].as_array().unwrap();
    assert_eq!(details.len(), 2);
    assert!(details.iter().any(|d| d.as_str().unwrap().contains("c1 >= 2")));

    let e = error_json(&glshrink(dir.path(), &["simulate"]));
    assert_eq!(e["error"]["kind"], "config");
    let e = error_json(&glshrink(dir.path(), &["nonsense"]));
    assert_eq!(e["error"]["kind"], "usage");
}

#[test]
fn plot_on_empty_csv_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    std::fs::write(
        dir.path().join("header.csv"),
        "scenario,n,q_n,p,psi2,C,replicate,seed,metric,value\n",
    )
    .unwrap();
    for input in ["empty.csv", "header.csv"] {
        error_json(&glshrink(dir.path(), &["plot", "--input", input, "--out", "plots"]));
        assert!(!dir.path().join("plots").exists());
    }
}

#[test]
fn simulate_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    assert!(glshrink(dir.path(), &["simulate", "--config", "c.toml", "--out", "o"]).status.success());
    let o = glshrink(dir.path(), &["plot", "--input", "o/report.csv", "--out", "plots"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(dir.path().join("plots/median_mse_ratio.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn estimate_and_test_on_observations() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("id,x\n");
    for i in 0..100 {
        let x = if i < 3 { 9.0 + i as f64 * 0.1 } else { ((i * 37 % 100) as f64 - 50.0) / 50.0 };
        text.push_str(&format!("{i},{x}\n"));
    }
    std::fs::write(dir.path().join("obs.csv"), text).unwrap();
    let o = glshrink(dir.path(), &["estimate", "--input", "obs.csv", "--method", "both", "--out", "o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let est = std::fs::read_to_string(dir.path().join("o/estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 201);
    assert!(est.starts_with("index,x,method,tau,mean,variance,weight"));

    let o = glshrink(dir.path(), &["test", "--input", "obs.csv", "--rule", "eb", "--out", "o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dec = std::fs::read_to_string(dir.path().join("o/decisions.csv")).unwrap();
    let rejected: Vec<&str> = dec.lines().skip(1).filter(|l| l.ends_with(",1")).collect();
    assert_eq!(rejected.len(), 3, "{dec}");

    let e = error_json(&glshrink(dir.path(), &["test", "--input", "obs.csv", "--rule", "fixed-tau"]));
    assert_eq!(e["error"]["kind"], "usage");
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = glshrink(dir.path(), &["verify", "--out", "v"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("8/8 checks passed"));
    assert!(dir.path().join("v/verify.json").exists());
}
