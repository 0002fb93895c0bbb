mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::write_cli_fixture;
use stexceed::exceedance::RegionClass;
use stexceed::grid::{make_grid, Rect};
use stexceed::io::{read_mask_csv, render_svg, write_mask_csv};

fn stexceed(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stexceed"))
        .args(args)
        .env("STEXCEED_OUTPUT_DIR", out)
        .output()
        .unwrap()
}

fn stderr_record(o: &Output) -> serde_json::Value {
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).expect("json error record on stderr")
}

#[test]
fn exceed_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cli_fixture(
        dir.path(),
        "thresholds = [2.0, 3.5, 5.0]\nalpha = 0.1\nsamples = 200\nseed = 1",
        false,
    );
    let out = dir.path().join("out");
    let o = stexceed(&["exceed", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["fit_report.json", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    for u in ["2", "3.5", "5"] {
        let rows = read_mask_csv(&out.join(format!("mask_u{u}.csv"))).unwrap();
        assert_eq!(rows.len(), 120);
        let svg = fs::read_to_string(out.join(format!("regions_u{u}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["thresholds"].as_array().unwrap().len(), 3);
    assert!(!out.join("ensemble.bin").exists());
}

#[test]
fn threshold_below_every_value_is_all_confident() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cli_fixture(
        dir.path(),
        "thresholds = [-100.0]\nalpha = 0.05\nsamples = 100\nseed = 2",
        false,
    );
    let out = dir.path().join("out");
    assert!(stexceed(&["exceed", cfg.to_str().unwrap()], &out).status.success());
    let rows = read_mask_csv(&out.join("mask_u-100.csv")).unwrap();
    assert!(rows.iter().all(|r| r.region == RegionClass::ConfidentExceed));
}

#[test]
fn below_direction_mirrors_above() {
    let dir = tempfile::tempdir().unwrap();
    let base = "thresholds = [3.0]\nalpha = 0.1\nsamples = 300\nseed = 5";
    let cfg = write_cli_fixture(dir.path(), &format!("{base}\ndirection = \"below\""), false);
    let out = dir.path().join("out");
    assert!(stexceed(&["exceed", cfg.to_str().unwrap()], &out).status.success());
    for r in read_mask_csv(&out.join("mask_u3.csv")).unwrap() {
        match r.region {
            RegionClass::ConfidentExceed => assert!(r.z_hat <= 3.0),
            RegionClass::ConfidentNotExceed => assert!(r.z_hat > 3.0),
            RegionClass::PossibleExceed => {}
        }
    }
}

#[test]
fn fit_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cli_fixture(
        dir.path(),
        "thresholds = [3.0]\nalpha = 0.1\nsamples = 100\nseed = 1",
        true,
    );
    let out = dir.path().join("out");
    let o = stexceed(&["fit", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["n_obs"], 90);
}

#[test]
fn config_error_exits_2_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cli_fixture(
        dir.path(),
        "thresholds = [3.0]\nalpha = 1.5\nsamples = 100\nseed = 1",
        false,
    );
    let o = stexceed(&["exceed", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_record(&o)["error"], "config");
}

#[test]
fn data_error_exits_3_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cli_fixture(
        dir.path(),
        "thresholds = [3.0]\nalpha = 0.1\nsamples = 100\nseed = 1",
        false,
    );
    let csv = fs::read_to_string(dir.path().join("obs.csv")).unwrap();
    let broken: Vec<String> = csv
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 4 {
                "0.5,0.5,1,abc".to_string()
            } else {
                l.to_string()
            }
        })
        .collect();
    fs::write(dir.path().join("obs.csv"), broken.join("\n")).unwrap();
    let o = stexceed(&["exceed", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    let rec = stderr_record(&o);
    assert_eq!(rec["error"], "data");
    assert_eq!(rec["exit_code"], 3);
    assert!(rec["message"].as_str().unwrap().contains('4'));
}

#[test]
fn missing_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = stexceed(&["fit", "/nonexistent/analysis.toml"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_record(&o)["error"], "io");
}

#[test]
fn mask_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cli_fixture(
        dir.path(),
        "thresholds = [3.0]\nalpha = 0.1\nsamples = 100\nseed = 3",
        false,
    );
    let out = dir.path().join("out");
    assert!(stexceed(&["exceed", cfg.to_str().unwrap()], &out).status.success());
    let path = out.join("mask_u3.csv");
    let rows = read_mask_csv(&path).unwrap();
    let copy = dir.path().join("copy.csv");
    write_mask_csv(&copy, &rows).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&copy).unwrap());
}

#[test]
fn svg_matches_golden() {
    let grid = make_grid(Rect::unit(), 5, 5).unwrap();
    let classes: Vec<RegionClass> = (0..25).map(|k| RegionClass::ALL[(k * 7 / 5) % 3]).collect();
    let svg = render_svg(&grid, &classes, "golden 5 x 5").unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/regions_5x5.svg");
    if std::env::var_os("STEXCEED_BLESS").is_some() {
        fs::write(&path, &svg).unwrap();
    }
    assert_eq!(svg, fs::read_to_string(&path).unwrap());
}
