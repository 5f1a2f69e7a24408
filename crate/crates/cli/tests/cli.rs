use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
        .to_string_lossy()
        .into_owned()
}

fn ruin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruin"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn check_reports_regime() {
    let o = ruin(&["check", "--model", &fixture("example1")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "NetProfit, E S_N=3, κN=4, margin=1");
    let o = ruin(&["check", "--model", &fixture("degenerate")]);
    assert!(stdout(&o).starts_with("Degenerate"));
}

#[test]
fn survive_reproduces_table_one() {
    let o = ruin(&["survive", "--model", &fixture("example1"), "--u-max", "15"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u,phi"));
    let phi: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(phi.len(), 16);
    for (u, v) in [
        (0, 0.442),
        (1, 0.650),
        (2, 0.790),
        (3, 0.876),
        (4, 0.928),
        (5, 0.958),
        (10, 0.997),
        (15, 1.0),
    ] {
        assert!((phi[u] - v).abs() < 1e-3, "u={u}");
    }
}

#[test]
fn survive_grid_has_horizon_rows() {
    let o = ruin(&[
        "survive",
        "--model",
        &fixture("example4"),
        "--u-max",
        "5",
        "--horizon",
        "3",
        "--precision",
        "3",
    ]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "T,0,1,2,3,4,5");
    assert_eq!(lines[1], "1,0.532,0.703,0.831,0.913,0.96,0.983");
    assert!(lines[4].starts_with("inf,"));
}

#[test]
fn roots_and_boundary_csv() {
    let o = ruin(&["roots", "--model", &fixture("example3")]);
    let text = stdout(&o);
    assert!(text.starts_with("re,im,modulus,multiplicity,residual,at_zero"));
    let mult: usize = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(mult, 5);

    let o = ruin(&["boundary", "--model", &fixture("example2")]);
    let text = stdout(&o);
    assert!(text.starts_with("season,index,mass,state"));
    assert!(text.contains("zero_column"));
    assert!(text.contains("# condition="));
}

#[test]
fn genfun_eval_and_series() {
    let o = ruin(&["genfun", "--model", &fixture("example3"), "--eval", "-0.5,0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    let s = num_complex::Complex64::new(-0.5, 0.25);
    let expect = 1.0 / (1.0 - s) - 0.0016;
    assert!((row[2] - expect.re).abs() < 1e-5 && (row[3] - expect.im).abs() < 1e-5);

    let o = ruin(&[
        "genfun",
        "--model",
        &fixture("example1"),
        "--series",
        "5",
        "--precision",
        "3",
    ]);
    let text = stdout(&o);
    let vals: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(vals, ["0.65", "0.79", "0.876", "0.928", "0.958"]);
}

#[test]
fn simulate_is_reproducible_json() {
    let args = [
        "simulate",
        "--model",
        &fixture("example1"),
        "--u",
        "2",
        "--horizon",
        "10",
        "--paths",
        "20000",
        "--seed",
        "3",
    ];
    let a = ruin(&args);
    let b = ruin(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["rng"], "chacha8");
    assert_eq!(v["seed"], 3);
    let p = v["p_hat"].as_f64().unwrap();
    let ci = v["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() <= p && p <= ci[1].as_f64().unwrap());
}

#[test]
fn trajectory_dump() {
    let o = ruin(&[
        "trajectory",
        "--model",
        &fixture("example1"),
        "--u",
        "3",
        "--n",
        "8",
        "--seed",
        "1",
    ]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,season,claim,surplus");
    assert_eq!(lines[1], "0,0,0,3");
    assert_eq!(lines.len(), 10);
}

#[test]
fn probe_conjecture_json() {
    let o = ruin(&["probe-conjecture", "--trials", "20", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["trials"], 20);
    assert!(v["findings"].is_array());
}

#[test]
fn exit_codes() {
    assert_eq!(ruin(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        ruin(&["survive", "--model", &fixture("example1")]).status.code(),
        Some(2)
    );
    let o = ruin(&["genfun", "--model", &fixture("example1"), "--eval", "1.5,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain"));
    assert_eq!(
        ruin(&["check", "--model", "/nonexistent.json"]).status.code(),
        Some(1)
    );
}

#[test]
fn invalid_model_file_reports_path() {
    let dir = std::env::temp_dir().join(format!("ruin-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(
        &path,
        r#"{"kappa":2,"seasons":[{"type":"table","probs":[0.5,0.6]}]}"#,
    )
    .unwrap();
    let o = ruin(&["check", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seasons[0].probs"));
    std::fs::remove_dir_all(&dir).unwrap();
}
