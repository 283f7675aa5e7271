//! Result files: per-sample CSV, per-group summary JSON, message logs, and
//! sweep manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! re-parsing a file reproduces the exact in-memory values and repeated runs
//! of the same scenario produce byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use timesync_core::metrics::{error_growth_slope, trimmed_stats, ErrorSample};
use timesync_core::protocol::NodeId;
use timesync_core::simnet::{MessageRecord, MsgKind};

pub const SAMPLES_HEADER: &str =
    "run_id,scheme,si_s,node_id,hop,event_ref_time_s,t_est_s,error_s";

/// Identity of one executed run, echoed into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub run_id: String,
    pub scheme: String,
    pub si_s: f64,
    pub hops: u16,
    pub seed: u64,
    pub duration_s: f64,
    pub trim_fraction: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GroupSummary {
    pub mae_s: f64,
    pub mse_s2: f64,
    pub count: usize,
    pub trim_fraction: f64,
    pub slope_s_per_s: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    #[serde(flatten)]
    pub meta: RunMeta,
    /// Keyed by `scheme|si=<si_s>|hop=<hop>`.
    pub groups: BTreeMap<String, GroupSummary>,
}

pub fn group_key(scheme: &str, si_s: f64, hop: u16) -> String {
    format!("{scheme}|si={si_s}|hop={hop}")
}

/// Trimmed per-hop statistics of one run, keyed for the summary JSON.
pub fn summarize(meta: &RunMeta, samples: &[ErrorSample]) -> Result<BTreeMap<String, GroupSummary>> {
    let mut groups = BTreeMap::new();
    let mut hops: Vec<u16> = samples.iter().map(|s| s.hop).collect();
    hops.sort_unstable();
    hops.dedup();
    for hop in hops {
        let hop_samples: Vec<ErrorSample> =
            samples.iter().filter(|s| s.hop == hop).copied().collect();
        let stats = trimmed_stats(&hop_samples, meta.duration_s, meta.trim_fraction)
            .with_context(|| format!("trimmed stats for hop {hop}"))?;
        let cutoff = meta.trim_fraction * meta.duration_s;
        let tail: Vec<ErrorSample> = hop_samples
            .iter()
            .filter(|s| s.event_ref_time >= cutoff)
            .copied()
            .collect();
        let slope = error_growth_slope(&tail).ok();
        groups.insert(
            group_key(&meta.scheme, meta.si_s, hop),
            GroupSummary {
                mae_s: stats.mae,
                mse_s2: stats.mse,
                count: stats.count,
                trim_fraction: stats.trim_fraction,
                slope_s_per_s: slope,
            },
        );
    }
    Ok(groups)
}

pub fn render_samples_csv(meta: &RunMeta, samples: &[ErrorSample]) -> String {
    let mut out = String::with_capacity(64 * samples.len() + 64);
    out.push_str(SAMPLES_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            meta.run_id,
            meta.scheme,
            meta.si_s,
            s.node.0,
            s.hop,
            s.event_ref_time,
            s.estimate,
            s.error
        );
    }
    out
}

pub fn write_samples(path: &Path, meta: &RunMeta, samples: &[ErrorSample]) -> Result<()> {
    std::fs::write(path, render_samples_csv(meta, samples))
        .with_context(|| format!("writing samples CSV {}", path.display()))
}

/// One parsed row of a samples CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub run_id: String,
    pub scheme: String,
    pub si_s: f64,
    pub sample: ErrorSample,
}

pub fn parse_samples(path: &Path) -> Result<Vec<SampleRow>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading samples CSV {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SAMPLES_HEADER => {}
        other => bail!(
            "unexpected CSV header in {}: {:?}",
            path.display(),
            other.unwrap_or("")
        ),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            bail!("line {} of {}: expected 8 fields", idx + 2, path.display());
        }
        let ctx = || format!("line {} of {}", idx + 2, path.display());
        rows.push(SampleRow {
            run_id: fields[0].to_string(),
            scheme: fields[1].to_string(),
            si_s: fields[2].parse().with_context(ctx)?,
            sample: ErrorSample {
                node: NodeId(fields[3].parse().with_context(ctx)?),
                hop: fields[4].parse().with_context(ctx)?,
                event_ref_time: fields[5].parse().with_context(ctx)?,
                estimate: fields[6].parse().with_context(ctx)?,
                error: fields[7].parse().with_context(ctx)?,
            },
        });
    }
    Ok(rows)
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let json = serde_json::to_string_pretty(summary).context("serializing summary")?;
    std::fs::write(path, json + "\n")
        .with_context(|| format!("writing summary JSON {}", path.display()))
}

pub fn write_messages_log(path: &Path, messages: &[MessageRecord]) -> Result<()> {
    let mut out = String::with_capacity(48 * messages.len());
    for m in messages {
        let kind = match m.kind {
            MsgKind::Beacon => "BEACON",
            MsgKind::Report => "REPORT",
        };
        let _ = writeln!(
            out,
            "{kind} round={} from={} to={} send_ref_s={} recv_ref_s={}",
            m.round, m.from.0, m.to.0, m.send_ref, m.recv_ref
        );
    }
    std::fs::write(path, out).with_context(|| format!("writing message log {}", path.display()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub run_id: String,
    pub scheme: String,
    pub si_s: f64,
    pub hops: u16,
    pub seed: u64,
    pub samples_csv: PathBuf,
    pub summary_json: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub points: Vec<ManifestEntry>,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest).context("serializing manifest")?;
    std::fs::write(path, json + "\n")
        .with_context(|| format!("writing manifest {}", path.display()))
}
