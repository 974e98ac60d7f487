#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn trajcap<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_trajcap")).args(args).output().expect("spawn trajcap")
}

/// Runs and requires exit 0; returns stdout.
pub fn run_ok<I, S>(args: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = trajcap(args);
    assert!(
        out.status.success(),
        "trajcap failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Parses `key value` lines of an alignment report.
pub fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no {key} in report"))
        .trim()
        .parse()
        .unwrap()
}

/// Manifest data lines, headers stripped.
pub fn pose_lines(manifest: &str) -> Vec<&str> {
    manifest.lines().filter(|l| !l.starts_with('#')).collect()
}

pub fn header_lines(manifest: &str) -> Vec<&str> {
    manifest.lines().filter(|l| l.starts_with('#')).collect()
}

/// Densifies the worked example at walking pace 8 units/s so captures stay small.
pub fn densify_example(dir: &Path) -> PathBuf {
    let dense = dir.join("trajectory_dense.txt");
    run_ok([
        "densify",
        "--vertex",
        p(&data("vertex.txt")),
        "--order",
        p(&data("vertex_order.txt")),
        "--speed",
        "8",
        "--out",
        p(&dense),
    ]);
    dense
}

pub fn capture(dense: &Path, out_dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["capture", "--dense", p(dense), "--out-dir", p(out_dir), "--landmarks", "400"];
    args.extend_from_slice(extra);
    run_ok(args);
    out_dir.join("6dpose_list.txt")
}
