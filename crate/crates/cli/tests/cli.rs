//! End-to-end tests of the binary: exit codes, artifact layout, seed
//! resolution, and determinism of emitted reports.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use wedgecp_core::strip_volatile;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wedgecp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout should be JSON: {e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process should exit, not be signalled")
}

fn load_stripped(path: &Path) -> Value {
    let text = fs::read_to_string(path).expect("report file should exist");
    let mut v: Value = serde_json::from_str(&text).expect("report file should be JSON");
    strip_volatile(&mut v);
    v
}

#[test]
fn integer_solution_prints_known_smallest_solution() {
    let out = run(&["geometry", "integer-solution", "--alpha", "2", "--alpha-l", "1/2", "--alpha-r", "1"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["m"], 3, "branch count");
    assert_eq!(v["c"], 5, "step count");
    assert_eq!(v["beta"], "1/3", "band width");
    assert_eq!(v["ell"], 7, "spine length");
    assert_eq!(v["d"], 2, "cap depth");
}

#[test]
fn unknown_flag_exits_one() {
    let out = run(&["edge-speed", "--no-such-flag"]);
    assert_eq!(code(&out), 1, "unknown flags are usage errors");
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0, "help is a successful output");
    assert_eq!(code(&run(&["--version"])), 0, "version is a successful output");
    assert_eq!(code(&run(&["simulate", "--help"])), 0, "subcommand help too");
}

#[test]
fn strong_type_spreading_faster_than_arrows_exits_one() {
    let out = run(&[
        "gbt-coexistence",
        "--lambda1",
        "1.0",
        "--lambda2",
        "2.0",
        "--horizon",
        "4",
        "--replicas",
        "5",
    ]);
    assert_eq!(code(&out), 1, "lambda2 > lambda1 is rejected as invalid");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("error"),
        "a diagnostic is printed"
    );
}

#[test]
fn missing_config_file_exits_two() {
    let out = run(&["edge-speed", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(code(&out), 2, "an unreadable config file is a runtime error");
}

#[test]
fn malformed_config_file_exits_one() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("cfg.json");
    fs::write(&path, "{\"experiment\": \"edge-speed\", \"bogus_field\": 1}").expect("write");
    let out = run(&["edge-speed", "--config", path.to_str().expect("utf-8 path")]);
    assert_eq!(code(&out), 1, "unknown config fields are usage errors");
}

#[test]
fn check_failure_exits_three() {
    // Two replicas can never reach the 30-survivor floor.
    let out = run(&[
        "edge-speed", "--lambda", "2", "--horizon", "5", "--replicas", "2", "--seed", "1", "--check",
    ]);
    assert_eq!(code(&out), 3, "--check maps a threshold miss to exit 3");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("check: FAILED"),
        "the verdict names the failure"
    );
}

#[test]
fn perturbed_band_fails_containment_check() {
    let out = run(&[
        "geometry",
        "containment",
        "--alpha",
        "2",
        "--alpha-l",
        "1/2",
        "--alpha-r",
        "1",
        "--rows",
        "6",
        "--m-wedge",
        "20",
        "--perturb-beta",
        "13/30",
        "--check",
    ]);
    assert_eq!(code(&out), 3, "a perturbed band must escape the envelope");
    let v = stdout_json(&out);
    assert_eq!(v["ok"], false, "the report records the failure");
    assert!(v["failure"].is_object(), "the escaping corner is identified");
}

#[test]
fn out_dir_reruns_are_byte_identical_after_stripping_volatile_fields() {
    let dir = tempfile::tempdir().expect("tempdir");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&[
            "survival-curve",
            "--lambda",
            "3",
            "--m-list",
            "2,5",
            "--horizon",
            "6",
            "--replicas",
            "12",
            "--seed",
            "42",
            "--out-dir",
            d.to_str().expect("utf-8 path"),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        for f in ["manifest.json", "report.json", "survival_curve.csv"] {
            assert!(d.join(f).exists(), "{f} should be written");
        }
    }
    let ra = load_stripped(&a.join("report.json"));
    let rb = load_stripped(&b.join("report.json"));
    let (sa, sb) = (ra.to_string(), rb.to_string());
    assert_eq!(sa, sb, "reports must match byte-for-byte after stripping timestamps");
    assert!(
        !sa.contains("timestamp_unix") && !sa.contains("runtime_ms"),
        "no volatile keys survive stripping"
    );
    let csv_a = fs::read_to_string(a.join("survival_curve.csv")).expect("csv");
    let csv_b = fs::read_to_string(b.join("survival_curve.csv")).expect("csv");
    assert_eq!(csv_a, csv_b, "derived CSVs are deterministic outright");
}

#[test]
fn env_seed_matches_explicit_flag() {
    let via_env = bin()
        .args(["edge-speed", "--lambda", "2", "--horizon", "6", "--replicas", "15"])
        .env("WEDGECP_SEED", "314")
        .output()
        .expect("binary should spawn");
    let via_flag = run(&[
        "edge-speed", "--lambda", "2", "--horizon", "6", "--replicas", "15", "--seed", "314",
    ]);
    assert_eq!(code(&via_env), 0);
    assert_eq!(code(&via_flag), 0);
    let mut a = stdout_json(&via_env);
    let mut b = stdout_json(&via_flag);
    strip_volatile(&mut a);
    strip_volatile(&mut b);
    assert_eq!(a, b, "the environment seed and the flag produce identical runs");
    assert_eq!(a["repro"]["master_seed"], 314, "the resolved seed is recorded");
}

#[test]
fn flag_seed_overrides_config_and_env() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, "{\"experiment\": \"edge-speed\", \"seed\": 1}").expect("write");
    let out = bin()
        .args([
            "edge-speed",
            "--config",
            cfg.to_str().expect("utf-8 path"),
            "--lambda",
            "2",
            "--horizon",
            "5",
            "--replicas",
            "8",
            "--seed",
            "99",
        ])
        .env("WEDGECP_SEED", "2")
        .output()
        .expect("binary should spawn");
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["repro"]["master_seed"], 99, "flag wins over config and env");
}

#[test]
fn survival_curve_csv_has_expected_header_and_rows() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(&[
        "survival-curve",
        "--lambda",
        "4",
        "--m-list",
        "2,4,8",
        "--horizon",
        "8",
        "--replicas",
        "20",
        "--seed",
        "7",
        "--out-dir",
        dir.path().to_str().expect("utf-8 path"),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("survival_curve.csv")).expect("csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("m,survivors,used,discards,point,wilson_lo,wilson_hi"),
        "header row"
    );
    let widths: Vec<i64> = lines
        .map(|l| l.split(',').next().expect("m column").parse().expect("integer width"))
        .collect();
    assert_eq!(widths, vec![2, 4, 8], "one row per requested width, in order");
}

#[test]
fn zero_rate_simulation_emits_deaths_only() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(&[
        "simulate",
        "--lambda",
        "0",
        "--sites",
        "11",
        "--horizon",
        "5",
        "--initial",
        "interval:-2,2",
        "--seed",
        "3",
        "--out-dir",
        dir.path().to_str().expect("utf-8 path"),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let events = fs::read_to_string(dir.path().join("events.jsonl")).expect("events");
    let mut kinds = events.lines().map(|l| {
        let v: Value = serde_json::from_str(l).expect("each line is one JSON record");
        v["kind"].as_str().expect("kind field").to_owned()
    });
    assert_eq!(kinds.next().as_deref(), Some("header"), "first record describes the run");
    assert!(
        kinds.all(|k| k == "death"),
        "rate zero admits no arrows, only deaths"
    );
    let report = load_stripped(&dir.path().join("report.json"));
    assert_eq!(report["survived"], false, "everything dies without infection");
}

#[test]
fn simulate_rejects_bad_initial_and_region_specs() {
    for (flag, value) in [("--initial", "bogus"), ("--initial", "single:x"), ("--region", "wedge:1")] {
        let out = run(&["simulate", flag, value]);
        assert_eq!(code(&out), 1, "{flag} {value} is a usage error");
    }
}

#[test]
fn wedge_restricted_simulation_honours_the_region() {
    let out = run(&[
        "simulate",
        "--lambda",
        "6",
        "--sites",
        "41",
        "--horizon",
        "4",
        "--initial",
        "interval:0,3",
        "--region",
        "wedge:1/2,3/2,3",
        "--seed",
        "5",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let occupied: Vec<i64> =
        v["final_occupied"].as_array().expect("site list").iter().map(|x| x.as_i64().expect("site")).collect();
    // At t = 4 the wedge spans [-alpha_l t, m + alpha_r t] = [-2, 9].
    for x in occupied {
        assert!((-2..=9).contains(&x), "site {x} must lie inside the wedge at the horizon");
    }
}

#[test]
fn corners_dump_writes_exact_csv_and_svg() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(&[
        "geometry",
        "corners",
        "--alpha",
        "2",
        "--alpha-l",
        "1/2",
        "--alpha-r",
        "1",
        "--rows",
        "1",
        "--out-dir",
        dir.path().to_str().expect("utf-8 path"),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("corners.csv")).expect("csv");
    let header = csv.lines().next().expect("header");
    assert!(header.starts_with("j,k,stage,lean,small"), "corner columns present");
    assert!(
        csv.lines().skip(1).all(|l| !l.is_empty()),
        "no blank rows"
    );
    let rows = csv.lines().count() - 1;
    let svg = fs::read_to_string(dir.path().join("corners.svg")).expect("svg");
    assert_eq!(
        svg.matches("<polygon").count(),
        rows,
        "one polygon per cell row"
    );
    let report = load_stripped(&dir.path().join("report.json"));
    assert_eq!(report["cells"].as_u64().expect("cell count") as usize, rows, "report counts the cells");
}

#[test]
fn lambda_c_check_passes_and_probe_csv_brackets_the_estimate() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(&[
        "lambda-c",
        "--window-min",
        "-10",
        "--window-max",
        "10",
        "--horizon",
        "6",
        "--replicas",
        "20",
        "--tolerance",
        "0.6",
        "--seed",
        "11",
        "--check",
        "--out-dir",
        dir.path().to_str().expect("utf-8 path"),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = load_stripped(&dir.path().join("report.json"));
    let (lo, hi) = (
        report["bracket"][0].as_f64().expect("bracket lo"),
        report["bracket"][1].as_f64().expect("bracket hi"),
    );
    let hat = report["lambda_c_hat"].as_f64().expect("estimate");
    assert!(lo <= hat && hat <= hi, "estimate {hat} must sit inside the bracket [{lo}, {hi}]");
    assert!(hi - lo <= 0.6 + 1e-12, "bracket respects the tolerance");
    let csv = fs::read_to_string(dir.path().join("probes.csv")).expect("csv");
    assert_eq!(csv.lines().next(), Some("lambda,survival"), "probe header");
    assert!(csv.lines().count() >= 4, "both bracket ends plus bisection probes recorded");
}

#[test]
fn threads_flag_is_accepted_but_zero_is_rejected() {
    let ok = run(&[
        "edge-speed", "--lambda", "2", "--horizon", "4", "--replicas", "5", "--threads", "4",
    ]);
    assert_eq!(code(&ok), 0, "a thread count is accepted for interface stability");
    let bad = run(&["edge-speed", "--threads", "0"]);
    assert_eq!(code(&bad), 1, "zero threads is a usage error");
}
