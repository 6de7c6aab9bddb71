//! Command-line interface contract: exit codes, diagnostics on stderr, and
//! the files each subcommand promises.

use std::path::Path;
use std::process::{Command, Output};

fn csimap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csimap"))
        .args(args)
        .output()
        .unwrap()
}

fn write_quick_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("quick.cfg");
    std::fs::write(
        &path,
        "[quantizer]\ntraining_sessions = 40\n\n[experiment]\nnum_sessions = 200\nwindow = 50\nseed = 3\n",
    )
    .unwrap();
    path
}

#[test]
fn missing_config_exits_1_and_names_the_path() {
    let out = csimap(&[
        "run",
        "--config",
        "/nonexistent/x.cfg",
        "--codebook",
        "b",
        "--out-dir",
        "d",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/x.cfg"), "stderr: {stderr}");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flag_prints_usage_and_exits_1() {
    let out = csimap(&["run", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "stderr: {stderr}");
}

#[test]
fn unknown_subcommand_exits_1() {
    let out = csimap(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let out = csimap(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep"));
}

#[test]
fn design_with_oversized_codebook_exits_1_with_quantizer_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("big.cfg");
    // 64x64 codewords from a single training session of 48 samples.
    std::fs::write(
        &config,
        "[quantizer]\nshadow_levels = 64\ndistance_levels = 64\ntraining_sessions = 1\n",
    )
    .unwrap();
    let out = csimap(&[
        "design-codebook",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("book.cb").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("training samples"), "stderr: {stderr}");
}

#[test]
fn bad_config_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "[system]\ncells = 6\nmystery = 1\n").unwrap();
    let out = csimap(&[
        "design-codebook",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("book.cb").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn full_pipeline_design_run_sweep_dump() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_quick_config(dir.path());
    let book = dir.path().join("book.cb");

    let out = csimap(&[
        "design-codebook",
        "--config",
        config.to_str().unwrap(),
        "--out",
        book.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(book.exists());

    let run_dir = dir.path().join("run");
    let out = csimap(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--codebook",
        book.to_str().unwrap(),
        "--out-dir",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "fig7.csv",
        "alpha.csv",
        "run_meta.txt",
        "map_cell0.map",
        "map_cell5.map",
    ] {
        assert!(run_dir.join(name).exists(), "{name} missing after run");
    }
    let fig7 = std::fs::read_to_string(run_dir.join("fig7.csv")).unwrap();
    assert!(fig7.starts_with("session,windowed_hit_ratio\n"));
    assert_eq!(fig7.lines().count(), 201, "header plus one row per session");

    let sweep_dir = dir.path().join("sweep");
    let out = csimap(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--codebook",
        book.to_str().unwrap(),
        "--out-dir",
        sweep_dir.to_str().unwrap(),
        "--force-hit-ratio",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let fig6 = std::fs::read_to_string(sweep_dir.join("fig6.csv")).unwrap();
    assert!(fig6.starts_with("snr_db,hit_band,sum_rate_bits\n"));
    // 5 sweep points x 5 bands by default.
    assert_eq!(fig6.lines().count(), 26);

    let out = csimap(&[
        "map-dump",
        "--map",
        run_dir.join("map_cell0.map").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("nodes"), "stdout: {stdout}");
    assert!(stdout.contains("edges"), "stdout: {stdout}");
}

#[test]
fn map_dump_rejects_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.map");
    std::fs::write(&path, "CSIMAP v1 0.1 0.02 1\nN 0 0 0\nE 0 9 1.0\n").unwrap();
    let out = csimap(&["map-dump", "--map", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}
