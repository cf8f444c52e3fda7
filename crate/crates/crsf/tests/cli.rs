//! Black-box tests of the `crsf` binary: file emission, exit codes, CSV
//! shape, determinism, and round-tripping of the on-disk formats.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_crsf")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).args(args).current_dir(dir).output().expect("spawn failed")
}

#[test]
fn mksurf_emits_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["mksurf", "kind=torus", "n=5", "m=4", "--out-prefix", "t"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for ext in ["graph", "surface", "conn"] {
        assert!(dir.path().join(format!("t.{ext}")).exists(), "missing t.{ext}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("vertices"), "stdout should summarize the surface: {stdout}");
}

#[test]
fn sample_writes_csv_with_header_and_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &["mksurf", "kind=torus", "n=5", "m=5", "--out-prefix", "t"]);
    let args = [
        "sample", "--surface", "t.surface", "--measure", "inc", "--seed", "3", "--samples", "25",
        "--out", "s.csv",
    ];
    let out = run_in(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(first.starts_with("# crsf "), "version header: {first}");
    assert!(first.contains("sample_id,n_loops"), "column header");
    // 25 data rows after the comment and column headers
    let rows = first.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 26);

    let out = run_in(dir.path(), &args);
    assert!(out.status.success());
    let second = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(first, second, "same seed must reproduce the CSV byte for byte");

    let out = run_in(
        dir.path(),
        &["sample", "--surface", "t.surface", "--measure", "inc", "--seed", "4", "--samples", "25",
          "--out", "s2.csv"],
    );
    assert!(out.status.success());
    let third = std::fs::read_to_string(dir.path().join("s2.csv")).unwrap();
    assert_ne!(
        first.lines().skip(3).collect::<Vec<_>>(),
        third.lines().skip(3).collect::<Vec<_>>(),
        "different seeds should give different samples"
    );
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["sample", "--surface", "missing.surface", "--measure", "bogus"],
        &["mksurf"],
        &["closedform", "nope"],
        &["--definitely-not-a-flag"],
    ];
    for args in cases {
        let out = run_in(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "args {args:?} should be a usage error");
    }
}

#[test]
fn missing_input_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["sample", "--surface", "missing.surface", "--measure", "inc"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn inc_on_sphere_reports_empty_support() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &["mksurf", "kind=sphere", "k=3", "--out-prefix", "s"]);
    let out = run_in(dir.path(), &["sample", "--surface", "s.surface", "--measure", "inc"]);
    assert_eq!(out.status.code(), Some(2), "a measure with empty support is a usage error");
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("support") || err.contains("noncontractible"), "stderr: {err}");
}

#[test]
fn graph_file_round_trips_and_mismatch_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &["mksurf", "kind=cylinder_wired", "n=4", "m=3", "--out-prefix", "c"]);
    // the emitted graph file must agree with the surface-derived graph
    let ok = run_in(
        dir.path(),
        &["sample", "--surface", "c.surface", "--graph", "c.graph", "--measure", "inc",
          "--samples", "2", "--out", "ok.csv"],
    );
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    // a different graph must be rejected
    std::fs::write(dir.path().join("bad.graph"), "graph 2\ne 0 1 1\n").unwrap();
    let bad = run_in(
        dir.path(),
        &["sample", "--surface", "c.surface", "--graph", "bad.graph", "--measure", "inc",
          "--samples", "2", "--out", "bad.csv"],
    );
    assert_eq!(bad.status.code(), Some(2), "a graph/surface mismatch is a usage error");
}

#[test]
fn verify_quick_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["markov", "restriction", "domination", "pgf"] {
        let out = run_in(dir.path(), &["verify", "--suite", suite]);
        assert!(
            out.status.success(),
            "suite {suite}: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    }
}

#[test]
fn closedform_outputs_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["closedform", "pgf", "--n", "6", "--m", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let pgf = crsf::closed_form::wired_cylinder_loop_pgf(6, 5).unwrap();
    // every probability the library computes appears in the table
    let mut seen = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("k,")) {
        let mut parts = line.split(',');
        let k: usize = parts.next().unwrap().trim().parse().unwrap();
        let p: f64 = parts.next().unwrap().trim().parse().unwrap();
        assert!((p - pgf[k]).abs() <= 1e-12);
        seen += 1;
    }
    assert_eq!(seen, pgf.len());
}

#[test]
fn svg_output_is_written_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &["mksurf", "kind=torus", "n=6", "m=6", "--out-prefix", "t"]);
    let out = run_in(
        dir.path(),
        &["sample", "--surface", "t.surface", "--measure", "inc", "--samples", "1",
          "--out", "s.csv", "--svg", "pic.svg", "--cycles-only"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(dir.path().join("pic.svg")).unwrap();
    assert!(svg.starts_with("<svg "));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("<line "));
}
