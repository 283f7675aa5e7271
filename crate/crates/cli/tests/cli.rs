//! End-to-end tests of the `timesync` binary (the determinism acceptance
//! criterion lives in `tests/acceptance.rs`).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use timesync_cli::output::{parse_samples, SAMPLES_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_timesync"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn expect_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const BASE_CONFIG: &str = r#"
name = "itest"
scheme = "ahts"
si_seconds = 1.0
duration_seconds = 60.0
bundle_size = 5
measurements_per_si = 5
hops = 1
rng_seed = 42
trim_fraction = 0.1

[clocks]
skew_ppm_max = 50.0
offset_max_seconds = 0.5

[delay]
propagation_seconds = 1e-6
interrupt_tx = { kind = "gaussian", mean_seconds = 5e-6, std_seconds = 1.5e-6 }
interrupt_rx = { kind = "gaussian", mean_seconds = 5e-6, std_seconds = 1.5e-6 }
"#;

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario.toml", BASE_CONFIG);
    let out = dir.path().join("o");
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "7"])
        .output()
        .unwrap();
    expect_success(&output);
    assert!(out.join("itest-ahts-si1-h1-seed7.samples.csv").exists());
}

#[test]
fn validate_config_accepts_good_and_names_bad_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", BASE_CONFIG);
    let output = bin()
        .args(["validate-config", "--config"])
        .arg(&good)
        .output()
        .unwrap();
    expect_success(&output);

    let bad = write_config(
        dir.path(),
        "bad.toml",
        &BASE_CONFIG.replace("si_seconds = 1.0", "si_seconds = 0.0"),
    );
    let output = bin()
        .args(["validate-config", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("si_seconds"), "stderr: {stderr}");
}

#[test]
fn csv_and_summary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario.toml", BASE_CONFIG);
    let out = dir.path().join("o");
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    expect_success(&output);

    let rows = parse_samples(&out.join("itest-ahts-si1-h1-seed42.samples.csv")).unwrap();
    assert!(!rows.is_empty());
    // Recompute the trimmed stats from the re-parsed samples; shortest
    // round-trip float formatting makes this reproduce the summary exactly.
    let samples: Vec<_> = rows.iter().map(|r| r.sample).collect();
    let stats = timesync_core::metrics::trimmed_stats(&samples, 60.0, 0.1).unwrap();
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("itest-ahts-si1-h1-seed42.summary.json")).unwrap(),
    )
    .unwrap();
    let group = &summary["groups"]["ahts|si=1|hop=1"];
    assert_eq!(group["mae_s"].as_f64().unwrap(), stats.mae);
    assert_eq!(group["mse_s2"].as_f64().unwrap(), stats.mse);
    assert_eq!(group["count"].as_u64().unwrap() as usize, stats.count);
}

#[test]
fn messages_log_written_human_readable() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario.toml", BASE_CONFIG);
    let out = dir.path().join("o");
    expect_success(
        &bin()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap(),
    );
    let log = std::fs::read_to_string(out.join("itest-ahts-si1-h1-seed42.messages.log")).unwrap();
    let beacons = log.lines().filter(|l| l.starts_with("BEACON")).count();
    let reports = log.lines().filter(|l| l.starts_with("REPORT")).count();
    assert_eq!(beacons, 60);
    assert_eq!(reports, 60);
    assert!(log.lines().next().unwrap().contains("send_ref_s="));
}

#[test]
fn sweep_manifest_lists_every_point_once() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "sweep.toml",
        &format!(
            "{BASE_CONFIG}\n[sweep]\nsi_seconds = [1.0, 2.0]\nschemes = [\"ahts\", \"ee-ascfr\"]\nhops = [1]\nseeds = [1, 2]\n"
        ),
    );
    let out = dir.path().join("results");
    expect_success(
        &bin()
            .args(["sweep", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--parallel", "3"])
            .output()
            .unwrap(),
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let points = manifest["points"].as_array().unwrap();
    assert_eq!(points.len(), 2 * 2 * 2);
    let mut keys: Vec<String> = points
        .iter()
        .map(|p| {
            format!(
                "{}|{}|{}|{}",
                p["scheme"].as_str().unwrap(),
                p["si_s"],
                p["hops"],
                p["seed"]
            )
        })
        .collect();
    let total = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), total, "duplicate sweep points in manifest");
    for p in points {
        let csv = PathBuf::from(p["samples_csv"].as_str().unwrap());
        assert!(csv.exists(), "missing {}", csv.display());
        let header = std::fs::read_to_string(&csv).unwrap();
        assert!(header.starts_with(SAMPLES_HEADER));
    }
}

#[test]
fn compare_emits_side_by_side_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "compare.toml",
        &format!("{BASE_CONFIG}\n[compare]\nsi_seconds = [1.0, 2.0, 3.0]\nseeds = [1, 2]\n"),
    );
    let out = dir.path().join("cmp");
    let output = bin()
        .args(["compare", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    expect_success(&output);
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("compare.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    // Two schemes x three SIs.
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert!(r["mae_s"].as_f64().unwrap() >= 0.0);
        assert_eq!(r["seeds"].as_u64().unwrap(), 2);
    }
    let schemes: Vec<&str> = rows.iter().map(|r| r["scheme"].as_str().unwrap()).collect();
    assert!(schemes.contains(&"ahts") && schemes.contains(&"ee-ascfr"));
}

#[test]
fn missing_config_fails_with_diagnostic() {
    let output = bin()
        .args(["run", "--config", "/nonexistent/x.toml", "--out", "/tmp/never"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("x.toml"), "stderr: {stderr}");
}
