use std::path::Path;
use std::process::{Command, Output};

use ccd_core::eval::EvalReport;
use tempfile::tempdir;

fn ccd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccd")).args(args).output().unwrap()
}

fn synth(out: &Path, cases: &str, extra: &[&str]) {
    let mut args = vec!["synth", "--out", out.to_str().unwrap(), "--cases", cases, "--seed", "0", "--width", "256", "--height", "256"];
    args.extend_from_slice(extra);
    let o = ccd(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_then_eval_prints_both_tables() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, "3", &[]);
    assert!(data.join("case_0002").join("manifest.json").is_file());
    assert!(data.join("case_0002").join("truth.json").is_file());

    let report = dir.path().join("report.json");
    let d = data.to_str().unwrap();
    let o = ccd(&["eval", "--pred", d, "--truth", d, "--cutoff", "0.9", "--seed", "0", "--report", report.to_str().unwrap(), "--text"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{text}");
    for row in ["Left shaft centerline", "Left neck centerline", "Right neck centerline", "Right shaft centerline", "Left Femur", "Right Femur"] {
        assert_eq!(text.lines().filter(|l| l.starts_with(row)).count(), 1, "{row}\n{text}");
    }
    assert!(text.contains("cases: 3  failed cases: 0"));

    let raw = std::fs::read_to_string(&report).unwrap();
    let parsed: EvalReport = serde_json::from_str(&raw).unwrap();
    assert_eq!(parsed.cases.len(), 3);
    assert_eq!(parsed.to_json(), raw);
}

#[test]
fn failed_case_exits_two_and_io_error_exits_one() {
    let dir = tempdir().unwrap();
    let truth = dir.path().join("truth");
    synth(&truth, "2", &[]);
    let pred = dir.path().join("pred");
    std::fs::create_dir_all(pred.join("case_0000")).unwrap();
    std::fs::create_dir_all(pred.join("case_0001")).unwrap();
    for f in std::fs::read_dir(truth.join("case_0000")).unwrap() {
        let f = f.unwrap().path();
        std::fs::copy(&f, pred.join("case_0000").join(f.file_name().unwrap())).unwrap();
    }
    let report = dir.path().join("r.json");
    let o = ccd(&["eval", "--pred", pred.to_str().unwrap(), "--truth", truth.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(report.is_file());

    let o = ccd(&["eval", "--pred", "/no/such", "--truth", "/no/such/either", "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = ccd(&["eval", "--pred", "x", "--truth", "y", "--cutoff", "1.5", "--report", "r.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fit_prints_text_and_json() {
    let dir = tempdir().unwrap();
    synth(dir.path(), "1", &["--outliers", "0.2", "--noise", "0.05"]);
    let manifest = dir.path().join("case_0000").join("manifest.json");
    let m = manifest.to_str().unwrap();

    let o = ccd(&["fit", m]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("Left") && l.contains("CCD")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("Right") && l.contains("CCD")), "{text}");

    let o = ccd(&["fit", m, "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let sides = v["sides"].as_array().unwrap();
    assert_eq!(sides.len(), 2);
    for s in sides {
        let ccd = s["measurement"]["ccd_degrees"].as_f64().unwrap();
        assert!(ccd > 100.0 && ccd < 155.0);
    }

    let o = ccd(&["fit", "/no/such/manifest.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_rejects_bad_spec() {
    let dir = tempdir().unwrap();
    let o = ccd(&["synth", "--out", dir.path().to_str().unwrap(), "--cases", "1", "--outliers", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn serve_rejects_missing_folders() {
    let o = ccd(&["serve", "--port", "0", "--watch-folder", "/no/such/dir"]);
    assert_eq!(o.status.code(), Some(1));
}
