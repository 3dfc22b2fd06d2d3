use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_descent-mesh"))
}

fn run_ok(cmd: &mut Command) -> (String, String) {
    let out = cmd.output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(out.status.success(), "stderr: {stderr}");
    (stdout, stderr)
}

fn write_graph(dir: &Path, args: &[&str]) -> PathBuf {
    let (text, _) = run_ok(bin().arg("graph").args(args));
    let path = dir.join("g.txt");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn params_on_complete_graph() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), &["complete", "5"]);
    let (out, _) = run_ok(bin().arg("params").arg(&g));
    let theta: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("theta = "))
        .unwrap()
        .parse()
        .unwrap();
    // mu = 1, p = 1/10, sigma = L = 1 on K5
    assert!((theta - 0.25).abs() < 1e-12);
}

#[test]
fn timing_emits_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), &["ring", "10"]);
    let (csv, report) = run_ok(bin().args(["timing"]).arg(&g).args(["--trials", "4", "--iterations", "200"]));
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "k,t_max");
    assert_eq!(lines.len(), 202);
    let mut prev = 0.0;
    for l in &lines[1..] {
        let v: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v >= prev);
        prev = v;
    }
    assert!(report.contains("measured_c = "));
    assert!(report.contains("bound_holds = true"));
}

#[test]
fn check_assumptions_on_star() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), &["star", "10"]);
    let (out, _) = run_ok(bin().arg("check-assumptions").arg(&g));
    assert!(out.contains("c_regularity = 9.0"));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
        seeds = [4, 5]
        record_every = 20
        [topology]
        kind = "grid2d"
        n = 9
        [objective]
        family = "averaging"
        [algorithms]
        list = ["esdacd", "gossip"]
        iterations = 100
        "#,
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(bin().arg("run").arg(&cfg).arg("--outdir").arg(&out));
    let trace = std::fs::read_to_string(out.join("esdacd_5.csv")).unwrap();
    assert!(trace.starts_with("t,sim_time,max_subopt,consensus_err,lyapunov,messages,gradients\n"));
    assert_eq!(trace.lines().count(), 1 + 6);
    assert!(out.join("gossip_4.csv").exists());
    assert!(out.join("summary.csv").exists());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "3 1\n0 1 1 1 1\n").unwrap();
    let out = bin().arg("params").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let out = bin().arg("run").arg(dir.path().join("missing.toml")).output().unwrap();
    assert!(!out.status.success());
}
