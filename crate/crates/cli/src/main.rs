//! Experiment runner: single scenarios, parameter sweeps, and matched-seed
//! scheme comparisons over the time synchronization simulator.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use timesync_cli::config::{self, parse_scheme, scheme_name, ScenarioFile};
use timesync_cli::output::{
    summarize, write_manifest, write_messages_log, write_samples, write_summary, Manifest,
    ManifestEntry, RunMeta, RunSummary,
};
use timesync_core::metrics::trimmed_stats;
use timesync_core::protocol::SchemeMode;
use timesync_core::simnet::{run, RunResult, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "timesync",
    about = "Discrete-event simulator for delay- and skew-compensated WSN time synchronization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario and write samples CSV, summary JSON, and a
    /// message log.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the Cartesian product of the config's [sweep] axes into a results
    /// directory with a manifest.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for sweep points.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Seed used when the config lists no [sweep] seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run both schemes on identical seeds and parameters per SI and emit a
    /// side-by-side summary.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed used when the config lists no [compare] seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a scenario config, reporting the first violated
    /// constraint.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out, seed } => cmd_run(&config, &out, seed),
        Command::Sweep {
            config,
            out,
            parallel,
            seed,
        } => cmd_sweep(&config, &out, parallel, seed),
        Command::Compare { config, out, seed } => cmd_compare(&config, &out, seed),
        Command::ValidateConfig { config } => cmd_validate(&config),
    }
}

fn run_id(name: &str, scheme: &str, si_s: f64, hops: u16, seed: u64) -> String {
    format!("{name}-{scheme}-si{si_s}-h{hops}-seed{seed}")
}

struct ExecutedRun {
    meta: RunMeta,
    result: RunResult,
}

fn execute(name: &str, cfg: &ScenarioConfig) -> Result<ExecutedRun> {
    let scheme = scheme_name(cfg.scheme).to_string();
    let meta = RunMeta {
        run_id: run_id(name, &scheme, cfg.si_seconds, cfg.hops, cfg.rng_seed),
        scheme,
        si_s: cfg.si_seconds,
        hops: cfg.hops,
        seed: cfg.rng_seed,
        duration_s: cfg.duration_seconds,
        trim_fraction: cfg.trim_fraction,
    };
    let result = run(cfg).with_context(|| format!("running {}", meta.run_id))?;
    Ok(ExecutedRun { meta, result })
}

/// Write the samples CSV and summary JSON for one executed run; returns the
/// manifest entry pointing at them.
fn persist(out_dir: &Path, executed: &ExecutedRun) -> Result<ManifestEntry> {
    let samples_csv = out_dir.join(format!("{}.samples.csv", executed.meta.run_id));
    let summary_json = out_dir.join(format!("{}.summary.json", executed.meta.run_id));
    write_samples(&samples_csv, &executed.meta, &executed.result.samples)?;
    let summary = RunSummary {
        meta: executed.meta.clone(),
        groups: summarize(&executed.meta, &executed.result.samples)?,
    };
    write_summary(&summary_json, &summary)?;
    Ok(ManifestEntry {
        run_id: executed.meta.run_id.clone(),
        scheme: executed.meta.scheme.clone(),
        si_s: executed.meta.si_s,
        hops: executed.meta.hops,
        seed: executed.meta.seed,
        samples_csv,
        summary_json,
    })
}

fn cmd_run(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let file = ScenarioFile::load(config_path)?;
    let mut cfg = file.to_scenario()?;
    if let Some(seed) = seed {
        cfg.rng_seed = seed;
    }
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let executed = execute(&file.run_name(config_path), &cfg)?;
    let entry = persist(out_dir, &executed)?;
    let messages_log = out_dir.join(format!("{}.messages.log", executed.meta.run_id));
    write_messages_log(&messages_log, &executed.result.messages)?;

    println!("run {}", executed.meta.run_id);
    println!(
        "  rounds={} samples={} messages={} rejected={} lost={}",
        executed.result.rounds,
        executed.result.samples.len(),
        executed.result.messages.len(),
        executed.result.rejected,
        executed.result.lost_messages
    );
    let summary = summarize(&executed.meta, &executed.result.samples)?;
    for (key, g) in &summary {
        let slope = g
            .slope_s_per_s
            .map(|s| format!("{s:.3e}"))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "  {key}: mae={:.3}us mse={:.3e}s2 count={} slope={slope}",
            g.mae_s * 1e6,
            g.mse_s2,
            g.count
        );
    }
    println!(
        "  wrote {}, {}, {}",
        entry.samples_csv.display(),
        entry.summary_json.display(),
        messages_log.display()
    );
    Ok(())
}

fn cmd_validate(config_path: &Path) -> Result<()> {
    let file = ScenarioFile::load(config_path)?;
    file.to_scenario()?;
    if let Some(sweep) = &file.sweep {
        for s in sweep.schemes.as_deref().unwrap_or(&[]) {
            parse_scheme(s)?;
        }
    }
    println!("{}: ok", config_path.display());
    Ok(())
}

/// One sweep point: the base scenario with axis values substituted.
#[derive(Debug, Clone)]
struct SweepPoint {
    scheme: SchemeMode,
    si_s: f64,
    hops: u16,
    seed: u64,
}

fn sweep_points(file: &ScenarioFile, base: &ScenarioConfig, seed_flag: Option<u64>) -> Result<Vec<SweepPoint>> {
    let sweep = file.sweep.clone().unwrap_or(config::SweepSection {
        si_seconds: None,
        schemes: None,
        hops: None,
        seeds: None,
    });
    let sis = sweep.si_seconds.unwrap_or_else(|| vec![base.si_seconds]);
    let schemes = match sweep.schemes {
        Some(names) => names
            .iter()
            .map(|s| parse_scheme(s))
            .collect::<Result<Vec<_>>>()?,
        None => vec![base.scheme],
    };
    let hops = sweep.hops.unwrap_or_else(|| vec![base.hops]);
    let seeds = sweep
        .seeds
        .unwrap_or_else(|| vec![seed_flag.unwrap_or(base.rng_seed)]);
    let mut points = Vec::new();
    for &si_s in &sis {
        for &scheme in &schemes {
            for &h in &hops {
                for &seed in &seeds {
                    points.push(SweepPoint {
                        scheme,
                        si_s,
                        hops: h,
                        seed,
                    });
                }
            }
        }
    }
    Ok(points)
}

fn cmd_sweep(config_path: &Path, out_dir: &Path, parallel: usize, seed: Option<u64>) -> Result<()> {
    let file = ScenarioFile::load(config_path)?;
    let base = file.to_scenario()?;
    let name = file.run_name(config_path);
    let points = sweep_points(&file, &base, seed)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    // Validate every point's configuration up front; nothing runs on a
    // config that would die halfway through the sweep.
    let configs: Vec<ScenarioConfig> = points
        .iter()
        .map(|p| {
            let mut cfg = base.clone();
            cfg.scheme = p.scheme;
            cfg.si_seconds = p.si_s;
            cfg.hops = p.hops;
            cfg.rng_seed = p.seed;
            if let timesync_core::simnet::ClockSetup::Explicit(ref params) = cfg.clocks {
                if params.len() != cfg.hops as usize {
                    anyhow::bail!(
                        "sweep point with hops={} cannot reuse {} explicit clocks",
                        cfg.hops,
                        params.len()
                    );
                }
            }
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<_>>()?;

    let entries: Mutex<Vec<Option<ManifestEntry>>> = Mutex::new(vec![None; configs.len()]);
    let failures: Mutex<Vec<String>> = Mutex::new(Vec::new());
    let next: AtomicUsize = AtomicUsize::new(0);
    let workers = parallel.max(1).min(configs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= configs.len() {
                    break;
                }
                match execute(&name, &configs[idx]).and_then(|e| persist(out_dir, &e)) {
                    Ok(entry) => entries.lock().unwrap()[idx] = Some(entry),
                    Err(err) => failures.lock().unwrap().push(format!("point {idx}: {err:#}")),
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    if !failures.is_empty() {
        anyhow::bail!("sweep failed: {}", failures.join("; "));
    }
    let points: Vec<ManifestEntry> = entries
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|e| e.expect("all points completed"))
        .collect();
    let manifest = Manifest { points };
    let manifest_path = out_dir.join("manifest.json");
    write_manifest(&manifest_path, &manifest)?;
    println!(
        "sweep complete: {} points, manifest at {}",
        manifest.points.len(),
        manifest_path.display()
    );
    Ok(())
}

fn cmd_compare(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let file = ScenarioFile::load(config_path)?;
    let base = file.to_scenario()?;
    let name = file.run_name(config_path);
    let (sis, seeds) = match &file.compare {
        Some(c) => (
            c.si_seconds.clone(),
            c.seeds
                .clone()
                .unwrap_or_else(|| vec![seed.unwrap_or(base.rng_seed)]),
        ),
        None => (
            vec![base.si_seconds],
            vec![seed.unwrap_or(base.rng_seed)],
        ),
    };
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    #[derive(serde::Serialize)]
    struct CompareRow {
        scheme: String,
        si_s: f64,
        mae_s: f64,
        mse_s2: f64,
        seeds: usize,
    }

    let mut rows: Vec<CompareRow> = Vec::new();
    for scheme in [SchemeMode::EeAscfr, SchemeMode::Ahts] {
        for &si_s in &sis {
            let mut mae_sum = 0.0;
            let mut mse_sum = 0.0;
            for &sd in &seeds {
                let mut cfg = base.clone();
                cfg.scheme = scheme;
                cfg.si_seconds = si_s;
                cfg.rng_seed = sd;
                cfg.validate()?;
                let executed = execute(&name, &cfg)?;
                let stats = trimmed_stats(
                    &executed.result.samples,
                    cfg.duration_seconds,
                    cfg.trim_fraction,
                )?;
                mae_sum += stats.mae;
                mse_sum += stats.mse;
            }
            rows.push(CompareRow {
                scheme: scheme_name(scheme).to_string(),
                si_s,
                mae_s: mae_sum / seeds.len() as f64,
                mse_s2: mse_sum / seeds.len() as f64,
                seeds: seeds.len(),
            });
        }
    }

    println!("{:<10} {:>8} {:>14} {:>14}", "scheme", "si_s", "mae_s", "mse_s2");
    for r in &rows {
        println!(
            "{:<10} {:>8} {:>14.6e} {:>14.6e}",
            r.scheme, r.si_s, r.mae_s, r.mse_s2
        );
    }
    let path = out_dir.join("compare.json");
    let json = serde_json::to_string_pretty(&rows).context("serializing comparison")?;
    std::fs::write(&path, json + "\n")
        .with_context(|| format!("writing comparison {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_id_is_stable() {
        assert_eq!(run_id("x", "ahts", 1.0, 3, 42), "x-ahts-si1-h3-seed42");
        assert_eq!(run_id("x", "ee-ascfr", 0.5, 1, 7), "x-ee-ascfr-si0.5-h1-seed7");
    }

    #[test]
    fn sweep_points_enumerate_cartesian_product() {
        let file: ScenarioFile = toml::from_str(
            r#"
scheme = "ahts"
si_seconds = 1.0
duration_seconds = 100.0

[sweep]
si_seconds = [1.0, 10.0]
schemes = ["ahts", "ee-ascfr"]
hops = [1]
seeds = [1, 2, 3]
"#,
        )
        .unwrap();
        let base = file.to_scenario().unwrap();
        let points = sweep_points(&file, &base, None).unwrap();
        // 2 SIs x 2 schemes x 1 hop depth x 3 seeds.
        assert_eq!(points.len(), 12);
        // Deterministic enumeration order: si major, seeds minor.
        assert_eq!(points[0].si_s, 1.0);
        assert_eq!(points[0].seed, 1);
        assert_eq!(points[1].seed, 2);
        assert_eq!(points.last().unwrap().si_s, 10.0);
    }

    #[test]
    fn sweep_defaults_to_base_scenario() {
        let file: ScenarioFile = toml::from_str(
            r#"
scheme = "ahts"
si_seconds = 2.0
duration_seconds = 100.0
rng_seed = 9
"#,
        )
        .unwrap();
        let base = file.to_scenario().unwrap();
        let points = sweep_points(&file, &base, None).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].si_s, 2.0);
        assert_eq!(points[0].seed, 9);
    }
}
