use std::path::Path;
use std::process::{Command, Output};

use critbd_cli::{read_records, OutcomeCounts};
use tempfile::TempDir;

fn critbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critbd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = critbd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .parse()
        .unwrap()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> String {
    let out = dir.join(name);
    let path = out.to_str().unwrap().to_string();
    let mut args = vec!["simulate", "--out", &path];
    args.extend_from_slice(extra);
    ok(&args);
    path
}

#[test]
fn simulate_is_byte_identical_across_threads() {
    let dir = TempDir::new().unwrap();
    let common = ["--p", "0.02", "--repeats", "5000", "--seed", "1"];
    let files: Vec<Vec<u8>> = ["1", "3", "8"]
        .iter()
        .map(|t| {
            let mut args = common.to_vec();
            args.extend(["--threads", t]);
            let path = simulate(dir.path(), &format!("t{t}.csv"), &args);
            std::fs::read(path).unwrap()
        })
        .collect();
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn manifest_reconciles_with_rows() {
    let dir = TempDir::new().unwrap();
    let path = simulate(
        dir.path(),
        "d.csv",
        &["--mode", "direct", "--step-cap", "200", "--repeats", "3000", "--seed", "4"],
    );
    let rows = read_records(Path::new(&path)).unwrap();
    let counts = OutcomeCounts::tally(rows.iter().map(|r| &r.record.outcome));
    let manifest = std::fs::read_to_string(format!("{path}.manifest")).unwrap();
    assert_eq!(report_value(&manifest, "count_direct") as u64, counts.direct);
    assert_eq!(report_value(&manifest, "count_tail") as u64, counts.tail);
    assert_eq!(report_value(&manifest, "count_censored") as u64, counts.censored);
    assert_eq!(counts.total(), 3000);
    assert!(counts.censored > 0);
    for r in rows.iter().filter(|r| r.record.outcome == critbd::Outcome::Censored) {
        assert!(r.record.final_state > 1);
        assert_eq!(r.record.steps, 200);
    }
}

#[test]
fn survival_shape_and_conditional_flag() {
    let dir = TempDir::new().unwrap();
    let hy = simulate(dir.path(), "h.csv", &["--p", "0.01", "--repeats", "4000", "--seed", "2"]);
    let di = simulate(
        dir.path(),
        "d.csv",
        &["--mode", "direct", "--step-cap", "100", "--repeats", "4000", "--seed", "3"],
    );
    let out = ok(&["survival", &hy, &hy, &di, "--grid", "10,100,1000"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "source,t,survival,log_survival,conditional");
    assert_eq!(lines.len(), 1 + 9);
    let body = |i: usize| lines[i].split_once(',').unwrap().1;
    for i in 1..=3 {
        assert_eq!(body(i), body(i + 3));
        assert!(lines[i].ends_with(",false"));
        assert!(lines[i + 6].ends_with(",true"));
    }
}

#[test]
fn ks_same_file_is_degenerate() {
    let dir = TempDir::new().unwrap();
    let hy = simulate(dir.path(), "h.csv", &["--p", "0.01", "--repeats", "3000", "--seed", "5"]);
    let report = ok(&["ks", &hy, &hy, "--window", "0,1e9"]);
    assert_eq!(report_value(&report, "d_stat"), 0.0);
    assert_eq!(report_value(&report, "p_value"), 1.0);
}

#[test]
fn tailfit_and_hitting_times() {
    let dir = TempDir::new().unwrap();
    let hy = simulate(dir.path(), "h.csv", &["--p", "0.01", "--repeats", "20000", "--seed", "6"]);
    let report = ok(&["tailfit", &hy, "--window", "10,100"]);
    let slope = report_value(&report, "slope");
    assert!((-1.3..-0.7).contains(&slope), "{slope}");

    let csv = ok(&["hitting-times", "--ceilings", "10,20,100,1000,10000"]);
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert!(r[2].abs() < 1e-10, "{r:?}");
    }
    assert!((rows[1][1] - rows[0][1] - std::f64::consts::LN_2).abs() < 0.025);
}

#[test]
fn dominating_report() {
    let out = ok(&["dominating", "--lambda", "3", "--delta", "0.5", "--horizon", "8", "--reps", "200", "--seed", "1"]);
    assert!(report_value(&out, "p_hat") < 0.05);
    assert_eq!(report_value(&out, "reps"), 200.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = critbd(&["simulate", "--p", "1.5", "--seed", "1", "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = critbd(&["simulate", "--lambda", "2", "--seed", "1", "--repeats", "10", "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    // missing mandatory seed
    let out = critbd(&["simulate", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = critbd(&["tailfit", "/definitely/not/here.csv", "--window", "1,2"]);
    assert_eq!(out.status.code(), Some(4));

    let hy = simulate(dir.path(), "h.csv", &["--p", "0.5", "--repeats", "50", "--seed", "1"]);
    let out = critbd(&["tailfit", &hy, "--window", "1e8,1e9"]);
    assert_eq!(out.status.code(), Some(3));
    let out = critbd(&["ks", &hy, &hy, "--window", "1e8,1e9"]);
    assert_eq!(out.status.code(), Some(3));
    let garbage = dir.path().join("bad.csv");
    std::fs::write(&garbage, "not,a,record\n").unwrap();
    let out = critbd(&["survival", garbage.to_str().unwrap(), "--grid", "1"]);
    assert_eq!(out.status.code(), Some(4));
}
