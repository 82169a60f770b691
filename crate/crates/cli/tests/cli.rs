use std::path::Path;
use std::process::Command;

use dualdiv::dividend::optimal_barrier_a;
use dualdiv::presets::{bundled_model, DISCOUNT_Q};
use dualdiv_cli::report::data_rows;

fn dualdiv(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dualdiv")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    let idx = header.split(',').position(|c| c == name).unwrap();
    data_rows(text).into_iter().map(|r| r[idx].clone()).collect()
}

fn reals(text: &str, name: &str) -> Vec<f64> {
    column(text, name).iter().map(|s| s.parse().unwrap()).collect()
}

#[test]
fn figure1_structure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, stdout, _) = dualdiv(&["figure1", "--out", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("summary.csv"));
    let summary = read(dir.path(), "summary.csv");
    let a = reals(&summary, "a_star");
    assert_eq!(a.len(), 4);
    assert!(a.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(a[3], 0.0);
    let mu = reals(&summary, "mu");
    let at = reals(&summary, "value_at_barrier");
    for i in 0..4 {
        if mu[i] > 0.0 {
            assert!((at[i] - mu[i] / DISCOUNT_Q).abs() < 1e-12);
        } else {
            assert_eq!((a[i], at[i]), (0.0, 0.0));
        }
    }
}

#[test]
fn figure1_values_match_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = dualdiv(&["figure1", "--sigma", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let values = read(dir.path(), "values.csv");
    let (d, x, v) = (reals(&values, "drift_d"), reals(&values, "x"), reals(&values, "value"));
    let mut sols = std::collections::HashMap::new();
    for i in 0..d.len() {
        let sol = sols
            .entry(d[i].to_bits())
            .or_insert_with(|| optimal_barrier_a(&bundled_model(d[i], 1.0).unwrap(), DISCOUNT_Q).unwrap());
        assert!((v[i] - sol.value_opt(x[i])).abs() < 1e-12);
    }
}

#[test]
fn figure2_structure() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = dualdiv(&["figure2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let summary = read(dir.path(), "summary.csv");
    let b = reals(&summary, "b_star");
    assert!(b.windows(2).all(|w| w[1] > w[0]));
    let at = reals(&summary, "value_at_barrier");
    let mu = reals(&summary, "mu");
    for i in 0..4 {
        assert!((at[i] - mu[i] / DISCOUNT_Q).abs() < 1e-10);
    }
    let values = read(dir.path(), "values.csv");
    let v = reals(&values, "value");
    let n = v.len() / 4;
    for k in 0..n {
        for j in 0..3 {
            assert!(v[(j + 1) * n + k] <= v[j * n + k], "row {k}");
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    for cmd in ["figure1", "figure2"] {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert_eq!(dualdiv(&[cmd, "--out", d1.path().to_str().unwrap()]).0, 0);
        assert_eq!(dualdiv(&[cmd, "--out", d2.path().to_str().unwrap()]).0, 0);
        for f in ["values.csv", "summary.csv"] {
            assert_eq!(read(d1.path(), f), read(d2.path(), f));
        }
    }
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sim = |d: &Path| dualdiv(&["simulate", "--paths", "500", "--seed", "3", "--phi", "2", "--out", d.to_str().unwrap()]);
    assert_eq!(sim(d1.path()).0, 0);
    assert_eq!(sim(d2.path()).0, 0);
    assert_eq!(read(d1.path(), "simulate.csv"), read(d2.path(), "simulate.csv"));
}

#[test]
fn header_embeds_the_resolved_configuration() {
    let dir = tempfile::tempdir().unwrap();
    dualdiv(&["solve-injection", "--phi", "2", "--drift", "2.0", "--out", dir.path().to_str().unwrap()]);
    let text = read(dir.path(), "values.csv");
    assert!(text.starts_with("# dualdiv solve-injection\n"));
    let toml: String = text
        .lines()
        .skip(1)
        .take_while(|l| l.starts_with('#'))
        .map(|l| format!("{}\n", l.trim_start_matches('#').trim_start()))
        .collect();
    let cfg = dualdiv_cli::config::parse_config(&toml).unwrap();
    assert_eq!(cfg.phi, Some(2.0));
    assert_eq!(cfg.model.drift_d, 2.0);
    assert_eq!(cfg.model.alpha.unwrap().len(), 6);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[sweep]\ndrift = [2.0, 2.33, 2.67, 3.0]\n").unwrap();
    let out = dir.path().join("ok");
    let (code, _, _) = dualdiv(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(column(&read(&out, "summary.csv"), "verdict").iter().all(|v| v == "pass"));
    assert_eq!(column(&read(&out, "vi_report.csv"), "x").len(), 800);
    // a tolerance below roundoff turns every check into a failure
    std::fs::write(&cfg, "phi = 2.0\n[verify]\ntolerance = 1e-300\n").unwrap();
    let out = dir.path().join("strict");
    let (code, _, stderr) = dualdiv(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("FAIL"));
    assert!(column(&read(&out, "summary.csv"), "verdict").iter().all(|v| v == "fail"));
}

#[test]
fn simulate_reports_z_scores() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(&cfg, "phi = 5.0\n[sim]\npaths = 2000\nseed = 9\ntrace = true\n").unwrap();
    let (code, _, _) = dualdiv(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = read(dir.path(), "simulate.csv");
    assert_eq!(column(&text, "problem"), vec!["dividend", "injection"]);
    assert!(reals(&text, "z_score").iter().all(|z| z.abs() < 4.0));
    assert!(dir.path().join("trace_00_dividend.csv").exists());
    assert!(dir.path().join("trace_01_injection.csv").exists());
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "q = 0.05\nunknown = true\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["figure1", "--config", bad.to_str().unwrap(), "--out", out],
        vec!["figure1", "--sigma", "-1", "--out", out],
        vec!["solve-injection", "--phi", "1.0", "--out", out],
        vec!["solve-injection", "--out", out],
        vec!["simulate", "--sigma", "1", "--dt", "0.01", "--paths", "10", "--out", out],
        vec!["figure1", "--config", "/nonexistent/run.toml"],
        vec!["figure3"],
    ];
    for args in cases {
        assert_eq!(dualdiv(&args).0, 2, "{args:?}");
    }
}
