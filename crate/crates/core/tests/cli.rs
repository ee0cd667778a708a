use std::path::Path;
use std::process::{Command, Output};

use gnlab_core::cli::plot::rearrangement_csv;
use gnlab_core::cli::{Context, RunConfig};
use gnlab_core::rearrange::StepFunction;
use serde_json::Value;

fn gnlab(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gnlab"));
    cmd.args(args);
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_suite_exits_2() {
    let o = gnlab(&["check", "--space", "cycle:8", "--suite", "everything"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown suite"), "{}", stderr(&o));
}

#[test]
fn malformed_file_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.graph");
    std::fs::write(&path, "v a 1\nv b 1\ne a b -2\n").unwrap();
    let o = gnlab(&["space", "--file", path.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn bad_parameters_exit_2() {
    let o = gnlab(
        &["check", "--space", "torus:6x6", "--suite", "gn", "--p", "3", "--l", "2"],
        None,
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = gnlab(&["check", "--space", "cycle:8", "--suite", "nonlinear"], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn plotdata_without_reports_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = gnlab(&["plotdata", "--dir", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let o = gnlab(
        &["plotdata", "--dir", dir.path().join("missing").to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn space_summary_of_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let o = gnlab(&["space", "--space", "cycle:8", "--rmax", "2"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n"], 8);
    assert_eq!(v["diameter"], 4);
    // mu(B(x, 4)) / mu(B(x, 2)) = 8 / 5 at r = 2, 5 / 3 at r = 1
    let c = v["doubling"]["constant"].as_f64().unwrap();
    assert!((c - 5.0 / 3.0).abs() < 1e-12, "{c}");
    let file: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("space.json")).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn plotdata_rearrangements_match_step_functions() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("r");
    let o = gnlab(
        &[
            "check",
            "--space",
            "grid:3",
            "--suite",
            "core",
            "--corpus-size",
            "6",
            "--seed",
            "5",
        ],
        Some(&reports),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let plots = dir.path().join("p");
    let o = gnlab(
        &[
            "plotdata",
            "--dir",
            reports.to_str().unwrap(),
            "--out",
            plots.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let report: Value = serde_json::from_str(&std::fs::read_to_string(reports.join("gn_besov.json")).unwrap()).unwrap();
    let cfg: RunConfig = serde_json::from_value(report["config"].clone()).unwrap();
    let ctx = Context::prepare(&cfg).unwrap();
    let mu = ctx.space.measure();
    let mut checked = 0;
    for f in &ctx.corpus.functions {
        let Ok(text) = std::fs::read_to_string(plots.join(format!("rearrangement_{}.csv", f.id))) else {
            continue;
        };
        assert_eq!(text, rearrangement_csv(&StepFunction::rearrange(&f.values, mu)));
        // unit measure on P3: f* is |f| sorted, f** the running mean
        let mut sorted: Vec<f64> = f.values.iter().map(|v| v.abs()).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut rows = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>());
        let first = rows.next().unwrap();
        assert_eq!(first[2], sorted[0]);
        assert!((first[3] - sorted[..first[1] as usize].iter().sum::<f64>() / first[1]).abs() < 1e-12);
        checked += 1;
    }
    assert!(checked > 0, "no witness rearrangements written");
    assert!(plots.join("curve_symmetrization_besov.csv").exists());
}
