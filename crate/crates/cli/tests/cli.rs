use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pnc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].clone()).collect()
}

#[test]
fn simulate_writes_one_row_per_slot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let res = pnc(&[
        "simulate",
        "--scenario",
        "builtin:generic",
        "--policy",
        "mw",
        "--slots",
        "100",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows) = read_csv(&out);
    assert_eq!(
        header,
        ["t", "sigma", "q_1", "q_2", "u_1", "u_2", "u_3", "s_1", "s_2", "s_3", "a_1", "a_2"]
    );
    assert_eq!(rows.len(), 100);
    let q1: Vec<i64> = column(&header, &rows, "q_1")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(
        q1[99] > q1[0] + 20,
        "MaxWeight should fall behind at rate 2.4"
    );
}

#[test]
fn one_step_quadratic_matches_maxweight() {
    let dir = tempfile::tempdir().unwrap();
    let run = |policy: &str| {
        let out = dir.path().join(format!("{policy}.csv"));
        let res = pnc(&[
            "simulate",
            "--scenario",
            "builtin:generic",
            "--policy",
            policy,
            "--horizon",
            "1",
            "--slots",
            "300",
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success());
        read_csv(&out)
    };
    let (h_mw, r_mw) = run("mw");
    let (h_q, r_q) = run("qpnc");
    for col in ["q_1", "q_2", "u_1", "u_2", "u_3"] {
        assert_eq!(column(&h_mw, &r_mw, col), column(&h_q, &r_q, col), "{col}");
    }
}

#[test]
fn missing_scenario_is_a_config_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let res = pnc(&[
        "simulate",
        "--scenario",
        "does-not-exist.json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn bad_policy_and_horizon_are_config_errors() {
    assert_eq!(
        pnc(&[
            "simulate",
            "--scenario",
            "builtin:generic",
            "--policy",
            "greedy"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        pnc(&[
            "simulate",
            "--scenario",
            "builtin:generic",
            "--policy",
            "qpnc",
            "--horizon",
            "0"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        pnc(&[
            "simulate",
            "--scenario",
            "builtin:generic",
            "--policy",
            "qpnc",
            "--horizon",
            "2",
            "--tau-hard",
            "3"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn empty_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("region.csv");
    let res = pnc(&[
        "sweep",
        "--scenario",
        "builtin:generic",
        "--a1",
        "2:1:0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
    let res = pnc(&["sweep", "--scenario", "builtin:generic", "--a1", "0:1:0"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn maxweight_sweep_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("region.csv");
    let res = pnc(&[
        "sweep",
        "--scenario",
        "builtin:generic",
        "--policy",
        "mw",
        "--a1",
        "0:3.5:0.25",
        "--slots",
        "20000",
        "--seeds",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["a1", "a2", "stable_fraction", "stable"]);
    assert_eq!(rows.len(), 15);
    let a1 = column(&header, &rows, "a1");
    let stable = column(&header, &rows, "stable");
    let first_unstable = stable.iter().position(|s| s == "false").unwrap();
    let boundary: f64 = a1[first_unstable - 1].parse().unwrap();
    assert!((boundary - 2.0).abs() <= 0.25, "boundary {boundary}");
}

#[test]
fn duplicate_policies_give_identical_rows() {
    let res = pnc(&[
        "compare",
        "--scenario",
        "builtin:natural",
        "--policies",
        "qpnc:2,qpnc:2,mw",
        "--slots",
        "500",
        "--seeds",
        "3",
    ]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0..3], rows[3..6]);
    assert!(rows[6].starts_with("mw,1,1,"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}.csv"));
        let res = pnc(&[
            "simulate",
            "--scenario",
            "builtin:natural",
            "--alternating",
            "--policy",
            "qpnc",
            "--horizon",
            "3",
            "--slots",
            "400",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(!outputs[0].contains(&b'\r'));
    assert_eq!(outputs[0].last(), Some(&b'\n'));
}

#[test]
fn scenario_files_match_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("natural.json");
    let sc = pnc_core::scenario::builtin("natural").unwrap();
    fs::write(&file, pnc_core::ScenarioFile::from_scenario(&sc).to_json()).unwrap();
    let run = |scenario: &str, out: &Path| {
        let res = pnc(&[
            "simulate",
            "--scenario",
            scenario,
            "--policy",
            "lpnc",
            "--horizon",
            "2",
            "--slots",
            "200",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
        fs::read(out).unwrap()
    };
    let a = run("builtin:natural", &dir.path().join("a.csv"));
    let b = run(file.to_str().unwrap(), &dir.path().join("b.csv"));
    assert_eq!(a, b);
}

#[test]
fn malformed_scenario_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    fs::write(&file, "{\n  \"n\": 2,\n  \"m\": oops\n}\n").unwrap();
    let res = pnc(&["simulate", "--scenario", file.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}
