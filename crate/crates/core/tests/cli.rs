use std::path::Path;
use std::process::Command;

fn maxconv(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_maxconv"))
        .args(args)
        .output()
        .unwrap()
}

fn simulate(seed: &str, out: &Path) -> std::process::Output {
    maxconv(&[
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
        "simulate",
        "--family",
        "M3",
        "--params",
        "r_upper=0.4,theta_r=0.25",
        "--random-sites",
        "5",
        "--n",
        "20",
    ])
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    assert!(simulate("9", &a).status.success());
    assert!(simulate("9", &b).status.success());
    assert!(simulate("10", &c).status.success());
    let read = |d: &Path| std::fs::read(d.join("realizations.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn missing_seed_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let r = maxconv(&[
        "--out",
        out.to_str().unwrap(),
        "simulate",
        "--family",
        "M3",
        "--random-sites",
        "3",
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("seed"));
    assert!(!out.exists());
}

#[test]
fn failed_fit_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(simulate("3", &sim).status.success());
    let out = dir.path().join("fit");
    let r = maxconv(&[
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
        "fit",
        "--data",
        sim.join("realizations.csv").to_str().unwrap(),
        "--sites",
        sim.join("sites.csv").to_str().unwrap(),
        "--family",
        "M3",
        "--d-max",
        "0.000001",
    ]);
    assert_eq!(
        r.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(!out.exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 1, "simulate": {"family": "M3", "radius": 2}}"#,
    )
    .unwrap();
    let r = maxconv(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "simulate",
    ]);
    assert_eq!(r.status.code(), Some(2));
}
