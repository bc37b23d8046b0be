//! End-to-end tests of the command-line interface against the shipped
//! fixture files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zonoreach"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("zonoreach-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn boundary_on_worked_example() {
    let dir = temp_dir("boundary");
    let status = bin()
        .args(["boundary"])
        .arg(fixture("example1_zonotope.json"))
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(dir.join("example1_zonotope.boundary.csv")).unwrap();
    let mut rows: Vec<&str> = csv.lines().collect();
    rows.sort_unstable();
    let mut expected = vec![
        "0,0,0,-1", "0,0,0,1", "0,1,1,0", "0,-1,-1,0", "-1,0,-1,0", "1,0,1,0", "-1,1,0,0",
        "1,-1,0,0",
    ];
    expected.sort_unstable();
    assert_eq!(rows, expected);
    let facets: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("example1_zonotope.facets.json")).unwrap())
            .unwrap();
    assert_eq!(facets.as_array().unwrap().len(), 8);
}

#[test]
fn tile_on_worked_example() {
    let dir = temp_dir("tile");
    let status = bin()
        .args(["tile"])
        .arg(fixture("example1_zonotope.json"))
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let tiles: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("example1_zonotope.tiles.json")).unwrap())
            .unwrap();
    let centers: Vec<Vec<f64>> = tiles
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            t["center"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect()
        })
        .collect();
    assert_eq!(
        centers,
        vec![vec![3.0, 3.0, 2.0], vec![4.0, 5.0, 2.0], vec![5.0, 4.0, 2.0]]
    );
    let csv = fs::read_to_string(dir.join("example1_zonotope.tiling.csv")).unwrap();
    assert_eq!(csv, "0,0,-1,0\n0,1,0,0\n1,0,0,0\n");
}

#[test]
fn grid_split_requires_parallelotope() {
    let dir = temp_dir("grid");
    // the worked example has four generators in 3-d: not a parallelotope
    let status = bin()
        .args(["tile"])
        .arg(fixture("example1_zonotope.json"))
        .args(["--grid-k", "2", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn reach_eval_render_roundtrip() {
    let dir = temp_dir("reach");
    let config = dir.join("run.json");
    fs::write(
        &config,
        format!(
            r#"{{"system": "{}", "h": 0.1, "N": 3, "seed": 1, "out_dir": "out"}}"#,
            fixture("constant2d_system.json").display()
        ),
    )
    .unwrap();
    let status = bin().args(["reach"]).arg(&config).status().unwrap();
    assert!(status.success());
    let run_dir = dir.join("out");
    assert!(run_dir.join("summary.json").is_file());
    assert!(run_dir.join("step_0000.json").is_file());
    assert!(run_dir.join("step_0002.json").is_file());

    let status = bin()
        .args(["eval"])
        .arg(&run_dir)
        .args(["--samples", "200", "--seed", "9"])
        .status()
        .unwrap();
    assert!(status.success());
    let report_bytes = fs::read(run_dir.join("eval_report.json")).unwrap();
    let report: serde_json::Value =
        serde_json::from_slice(&report_bytes).unwrap();
    assert_eq!(report["soundness"].as_f64().unwrap(), 1.0);
    assert!(report["gamma_min"].as_f64().unwrap() > 0.9);
    // re-running eval reproduces the report bytes
    let status = bin()
        .args(["eval"])
        .arg(&run_dir)
        .args(["--samples", "200", "--seed", "9"])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(report_bytes, fs::read(run_dir.join("eval_report.json")).unwrap());

    // render twice; the bytes must be identical
    let status = bin().args(["render"]).arg(&run_dir).status().unwrap();
    assert!(status.success());
    let first = fs::read(run_dir.join("projection_1_2.svg")).unwrap();
    let other = dir.join("again.svg");
    let status = bin()
        .args(["render"])
        .arg(&run_dir)
        .arg("--out")
        .arg(&other)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(first, fs::read(&other).unwrap());
    assert!(String::from_utf8(first).unwrap().starts_with("<svg"));
}

#[test]
fn reach_with_flags_only() {
    let dir = temp_dir("flags");
    let status = bin()
        .args(["reach", "--system"])
        .arg(fixture("constant2d_system.json"))
        .args(["--h", "0.1", "--N", "2", "--out"])
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("out/summary.json").is_file());
    assert!(dir.join("out/step_0001.json").is_file());
}

#[test]
fn usage_errors_exit_2() {
    // missing run directory
    let status = bin()
        .args(["eval", "/nonexistent/run/dir"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    // config with unknown keys is rejected
    let dir = temp_dir("badcfg");
    let config = dir.join("bad.json");
    fs::write(&config, r#"{"system": "ElectroOsc", "out_dir": "x", "frobnicate": 1}"#).unwrap();
    let status = bin().args(["reach"]).arg(&config).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    // bench without a selection
    let status = bin().args(["bench"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn degenerate_zonotope_exits_4() {
    let dir = temp_dir("degenerate");
    let path = dir.join("flat.json");
    fs::write(&path, r#"{"center": [0, 0], "generators": [[1, 2], [0, 0]]}"#).unwrap();
    let status = bin().args(["boundary"]).arg(&path).output().unwrap();
    assert_eq!(status.status.code(), Some(4));
}

#[test]
fn bench_lists_bundled_benchmarks() {
    let out = bin().args(["bench", "--list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "ElectroOsc",
        "Rossler",
        "Lotka-Volterra",
        "Tank6",
        "BiologicalSystemI",
        "BiologicalSystemII",
        "Tank12",
    ] {
        assert!(text.contains(name), "missing {name} in --list output");
    }
}

#[test]
fn bench_single_benchmark_row() {
    let out = bin().args(["bench", "--name", "ElectroOsc"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ElectroOsc"));
    assert!(text.contains("1.000"), "soundness column expected:\n{text}");
}
