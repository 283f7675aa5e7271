//! Determinism acceptance criterion, exercised through the compiled
//! binary: identical config and seed must reproduce the sample CSV byte for
//! byte.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

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

/// Criterion 8: repeating a run with identical config and seed yields
/// byte-identical sample CSVs.
#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario.toml", BASE_CONFIG);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = bin()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        expect_success(&output);
    }
    let csv = "itest-ahts-si1-h1-seed42.samples.csv";
    let bytes_a = std::fs::read(out_a.join(csv)).unwrap();
    let bytes_b = std::fs::read(out_b.join(csv)).unwrap();
    let pass = bytes_a == bytes_b && !bytes_a.is_empty();
    println!(
        "[{}] criterion 8 (determinism): repeated run produced byte-identical CSV ({} bytes)",
        if pass { "PASS" } else { "FAIL" },
        bytes_a.len()
    );
    assert!(pass);
    // Summaries must agree too.
    let sum = "itest-ahts-si1-h1-seed42.summary.json";
    assert_eq!(
        std::fs::read(out_a.join(sum)).unwrap(),
        std::fs::read(out_b.join(sum)).unwrap()
    );
}
