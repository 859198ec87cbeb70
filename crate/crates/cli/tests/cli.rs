use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fermiflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermiflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn walsh_reports_the_exact_covariances() {
    let out = fermiflow(&["walsh"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["report"]["covariance_first"], "-1/4");
    assert_eq!(v["report"]["covariance_second"], "0");
    assert_eq!(v["report"]["falsified_rhs"].as_f64(), Some(0.0));
    assert!(v["report"]["tv_exact"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_lemma_default_passes() {
    let out = fermiflow(&["verify-lemma"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["summary"]["instances"], 10);
    assert_eq!(v["summary"]["violations"], 0);
}

#[test]
fn verify_lemma_corrupted_kernel_is_caught() {
    let out = fermiflow(&["verify-lemma", "--corrupt", "--set", "verify.seeds=3"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["summary"]["violations"], 3);
}

#[test]
fn verify_lemma_small_cap_reports_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "# tiny budget\nenumeration_cap = 10\n");
    let out = fermiflow(&["verify-lemma", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("requires 36"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "verify.nn = 3\n");
    let out = fermiflow(&["walsh", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
    assert_eq!(fermiflow(&["walsh", "--set", "nope=1"]).status.code(), Some(2));
    assert_eq!(fermiflow(&["walsh", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn bounds_exit_code_follows_violations() {
    let out = fermiflow(&["bounds", "--set", "bounds.seeds=40"]);
    let v = json(&out);
    let s = &v["summary"];
    let violations = s["tv_violations"].as_u64().unwrap() + s["wsharp_violations"].as_u64().unwrap();
    let want = if violations > 0 { 1 } else { 0 };
    assert_eq!(out.status.code(), Some(want));
    assert_eq!(v["instances"].as_array().unwrap().len(), 40);
    assert_eq!(s["tv_violations"], 0);
    assert_eq!(s["wsharp_corrected_violations"], 0);
}

#[test]
fn bounds_identical_specs_have_zero_distance() {
    let out = fermiflow(&["bounds", "--set", "bounds.identical=true", "--set", "bounds.seeds=4"]);
    assert_eq!(out.status.code(), Some(0));
    for r in json(&out)["instances"].as_array().unwrap() {
        assert_eq!(r["tv"]["value"].as_f64(), Some(0.0));
        assert_eq!(r["wsharp"]["value"].as_f64(), Some(0.0));
    }
}

#[test]
fn bounds_empirical_mode_prints_intervals() {
    let out = fermiflow(&[
        "bounds", "--mode", "empirical", "--format", "csv", "--set", "bounds.seeds=2", "--set", "bounds.samples=500",
        "--set", "bounds.bootstrap=50",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let lo = header.iter().position(|h| *h == "tv_lo").unwrap();
    let hi = header.iter().position(|h| *h == "tv_hi").unwrap();
    let tv = header.iter().position(|h| *h == "tv").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows[..2] {
        assert_eq!(r[3], "empirical");
        let (l, v, h): (f64, f64, f64) = (r[lo].parse().unwrap(), r[tv].parse().unwrap(), r[hi].parse().unwrap());
        assert!(l <= v && v <= h);
    }
    assert_eq!(rows[2][3], "summary");
}

#[test]
fn rdm_identical_rows_vanish() {
    let out = fermiflow(&["rdm-monotonicity", "--identical", "--set", "rdm.seeds=2"]);
    assert_eq!(out.status.code(), Some(0));
    for row in json(&out)["rows"].as_array().unwrap() {
        for v in row["values"].as_array().unwrap() {
            assert!(v.as_f64().unwrap().abs() < 1e-9);
        }
    }
}

#[test]
fn rdm_small_sweep_is_monotone() {
    let out = fermiflow(&["rdm-monotonicity", "--set", "rdm.seeds=3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["summary"]["non_monotone"], 0);
    assert_eq!(v["rows"][0]["values"].as_array().unwrap().len(), 2);
}

#[test]
fn example_gap_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = fermiflow(&["example-gap", "--format", "csv", "--n-max", "5", "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,determinant,mean_overlap,stabilizer_overlap,trace_distance,w1_upper_over_n");
    assert_eq!(lines.len(), 6);
    // n = 1: the upper bound coincides with the trace distance
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert!((first[4] - first[5]).abs() < 1e-12);
}

#[test]
fn seeded_json_is_reproducible() {
    let args = ["bounds", "--seed", "5", "--set", "bounds.seeds=6"];
    assert_eq!(fermiflow(&args).stdout, fermiflow(&args).stdout);
    let other = fermiflow(&["bounds", "--seed", "6", "--set", "bounds.seeds=6"]);
    assert_ne!(fermiflow(&args).stdout, other.stdout);
}

#[test]
fn selftest_subset_passes() {
    let out = fermiflow(&["selftest", "--criteria", "2,7,9"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
    assert_eq!(fermiflow(&["selftest", "--criteria", "10"]).status.code(), Some(2));
}
