// End-to-end checks of the command-line surface: output contracts, exit
// codes and determinism.
use std::process::{Command, Output};

fn memcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memcap"))
        .args(args)
        .output()
        .expect("spawn memcap")
}

#[test]
fn spectrum_csv_header_is_stable() {
    let out = memcap(&["spectrum", "--protocol", "unbroadened", "--d", "10"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,sigma,efficiency"));
    let first = lines.next().unwrap();
    assert!(first.starts_with("1,"), "first row is mode 1: {first}");
}

#[test]
fn invalid_tooth_count_exits_2_with_named_invariant() {
    let out = memcap(&[
        "capacity",
        "--protocol",
        "afc",
        "--d",
        "20",
        "-M",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.lines().count() == 1, "single-line error: {err}");
    assert!(err.contains("tooth count"), "names the invariant: {err}");
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let dir = tempdir("determinism");
    let args = [
        "capacity",
        "--protocol",
        "tcrib",
        "--d",
        "100",
        "--delta0",
        "180",
        "--format",
        "json",
        "--cache-dir",
        dir.to_str().unwrap(),
    ];
    let first = memcap(&args);
    let second = memcap(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn fit_rejects_insufficient_points() {
    let dir = tempdir("fit-short");
    let csv = dir.join("sweep.csv");
    std::fs::write(&csv, "d,delta0,n_modes,lambda1,sigma1,stable\n100,0,3,0.9,0.97,\n").unwrap();
    let out = memcap(&["fit", "--model", "sqrt", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("at least 3"), "names the requirement: {err}");
}

#[test]
fn fit_rejects_malformed_row_by_number() {
    let dir = tempdir("fit-bad");
    let csv = dir.join("sweep.csv");
    std::fs::write(
        &csv,
        "d,delta0,n_modes,lambda1,sigma1,stable\n100,0,3,0.9,0.97,\nnot,a,row\n",
    )
    .unwrap();
    let out = memcap(&["fit", "--model", "sqrt", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("row 3"), "names the first bad row: {err}");
}

#[test]
fn lcrib_analytic_capacity_is_refused() {
    let out = memcap(&[
        "capacity",
        "--protocol",
        "lcrib-analytic",
        "--d",
        "60",
        "--delta0",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_svg_is_a_chart() {
    let out = memcap(&[
        "sweep",
        "--protocol",
        "unbroadened",
        "--d-range",
        "50:100:2",
        "--format",
        "svg",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("<polyline"));
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("memcap-cli-test-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
