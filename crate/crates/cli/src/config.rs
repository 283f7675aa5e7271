//! Scenario configuration files.
//!
//! One TOML file describes one scenario plus optional sweep and comparison
//! axes. Keys carry their units in the name; time-sync experiments die by
//! unit confusion more than by anything else.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use timesync_core::clockcore::ClockParams;
use timesync_core::protocol::SchemeMode;
use timesync_core::simnet::{ClockSetup, DelayModel, JitterSpec, ScenarioConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Run identifier prefix; defaults to the config file stem.
    pub name: Option<String>,
    pub scheme: String,
    pub si_seconds: f64,
    pub duration_seconds: f64,
    #[serde(default = "default_bundle")]
    pub bundle_size: u16,
    #[serde(default = "default_bundle")]
    pub measurements_per_si: u16,
    #[serde(default = "default_hops")]
    pub hops: u16,
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
    #[serde(default = "default_trim")]
    pub trim_fraction: f64,
    #[serde(default)]
    pub loss_probability: f64,
    pub re_anchor_rounds: Option<u32>,
    #[serde(default)]
    pub clocks: ClocksSection,
    #[serde(default)]
    pub delay: DelaySection,
    pub sweep: Option<SweepSection>,
    pub compare: Option<CompareSection>,
}

fn default_bundle() -> u16 {
    5
}

fn default_hops() -> u16 {
    1
}

fn default_seed() -> u64 {
    1
}

fn default_trim() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClocksSection {
    #[serde(default = "default_skew_ppm")]
    pub skew_ppm_max: f64,
    #[serde(default = "default_offset_max")]
    pub offset_max_seconds: f64,
    #[serde(default)]
    pub drift_ppm_per_sqrt_s: f64,
    /// When present, overrides the sampled setup; one entry per sensor.
    pub explicit: Option<Vec<ExplicitClock>>,
}

fn default_skew_ppm() -> f64 {
    50.0
}

fn default_offset_max() -> f64 {
    0.5
}

impl Default for ClocksSection {
    fn default() -> Self {
        Self {
            skew_ppm_max: default_skew_ppm(),
            offset_max_seconds: default_offset_max(),
            drift_ppm_per_sqrt_s: 0.0,
            explicit: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitClock {
    pub skew_ppm: f64,
    pub offset_seconds: f64,
    #[serde(default)]
    pub drift_ppm_per_sqrt_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    #[serde(default = "default_propagation")]
    pub propagation_seconds: f64,
    #[serde(default = "default_interrupt")]
    pub interrupt_tx: JitterSection,
    #[serde(default = "default_interrupt")]
    pub interrupt_rx: JitterSection,
}

fn default_propagation() -> f64 {
    1e-6
}

fn default_interrupt() -> JitterSection {
    JitterSection::Gaussian {
        mean_seconds: 5e-6,
        std_seconds: 1.5e-6,
    }
}

impl Default for DelaySection {
    fn default() -> Self {
        Self {
            propagation_seconds: default_propagation(),
            interrupt_tx: default_interrupt(),
            interrupt_rx: default_interrupt(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum JitterSection {
    Constant { seconds: f64 },
    Uniform { lo_seconds: f64, hi_seconds: f64 },
    Gaussian { mean_seconds: f64, std_seconds: f64 },
}

impl JitterSection {
    fn to_spec(&self) -> JitterSpec {
        match *self {
            JitterSection::Constant { seconds } => JitterSpec::Constant(seconds),
            JitterSection::Uniform {
                lo_seconds,
                hi_seconds,
            } => JitterSpec::Uniform {
                lo: lo_seconds,
                hi: hi_seconds,
            },
            JitterSection::Gaussian {
                mean_seconds,
                std_seconds,
            } => JitterSpec::Gaussian {
                mean: mean_seconds,
                std: std_seconds,
            },
        }
    }
}

/// Sweep axes; the Cartesian product is enumerated in the listed order.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub si_seconds: Option<Vec<f64>>,
    pub schemes: Option<Vec<String>>,
    pub hops: Option<Vec<u16>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub si_seconds: Vec<f64>,
    pub seeds: Option<Vec<u64>>,
}

pub fn parse_scheme(s: &str) -> Result<SchemeMode> {
    match s.to_ascii_lowercase().as_str() {
        "ahts" => Ok(SchemeMode::Ahts),
        "ee-ascfr" | "eeascfr" | "ee_ascfr" => Ok(SchemeMode::EeAscfr),
        other => bail!("unknown scheme {other:?} (expected \"ahts\" or \"ee-ascfr\")"),
    }
}

pub fn scheme_name(scheme: SchemeMode) -> &'static str {
    match scheme {
        SchemeMode::Ahts => "ahts",
        SchemeMode::EeAscfr => "ee-ascfr",
    }
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: ScenarioFile = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(file)
    }

    pub fn run_name(&self, path: &Path) -> String {
        self.name.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into())
        })
    }

    /// Build the engine configuration, checking every invariant; violations
    /// name the offending key.
    pub fn to_scenario(&self) -> Result<ScenarioConfig> {
        let scheme = parse_scheme(&self.scheme)?;
        let clocks = match &self.clocks.explicit {
            Some(list) => {
                let mut params = Vec::with_capacity(list.len());
                for c in list {
                    params.push(
                        ClockParams::new(
                            c.skew_ppm * 1e-6,
                            c.offset_seconds,
                            c.drift_ppm_per_sqrt_s,
                        )
                        .map_err(|e| anyhow::anyhow!("clocks.explicit: {e}"))?,
                    );
                }
                ClockSetup::Explicit(params)
            }
            None => ClockSetup::Sampled {
                skew_ppm_max: self.clocks.skew_ppm_max,
                offset_max_seconds: self.clocks.offset_max_seconds,
                drift_ppm_per_sqrt_s: self.clocks.drift_ppm_per_sqrt_s,
            },
        };
        let cfg = ScenarioConfig {
            scheme,
            si_seconds: self.si_seconds,
            duration_seconds: self.duration_seconds,
            bundle_size: self.bundle_size,
            measurements_per_si: self.measurements_per_si,
            hops: self.hops,
            clocks,
            delay: DelayModel {
                propagation_seconds: self.delay.propagation_seconds,
                interrupt_tx: self.delay.interrupt_tx.to_spec(),
                interrupt_rx: self.delay.interrupt_rx.to_spec(),
            },
            rng_seed: self.rng_seed,
            trim_fraction: self.trim_fraction,
            loss_probability: self.loss_probability,
            re_anchor_rounds: self.re_anchor_rounds,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scheme = "ahts"
si_seconds = 1.0
duration_seconds = 100.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let file: ScenarioFile = toml::from_str(MINIMAL).unwrap();
        let cfg = file.to_scenario().unwrap();
        assert_eq!(cfg.bundle_size, 5);
        assert_eq!(cfg.hops, 1);
        assert_eq!(cfg.trim_fraction, 0.1);
        assert_eq!(cfg.rng_seed, 1);
    }

    #[test]
    fn explicit_clocks_override_sampling() {
        let text = r#"
scheme = "ee-ascfr"
si_seconds = 10.0
duration_seconds = 3600.0

[clocks]
[[clocks.explicit]]
skew_ppm = 50.0
offset_seconds = 0.3
"#;
        let file: ScenarioFile = toml::from_str(text).unwrap();
        let cfg = file.to_scenario().unwrap();
        match cfg.clocks {
            ClockSetup::Explicit(params) => {
                assert_eq!(params.len(), 1);
                assert!((params[0].skew - 50e-6).abs() < 1e-18);
            }
            _ => panic!("expected explicit clocks"),
        }
    }

    #[test]
    fn zero_si_names_the_constraint() {
        let text = r#"
scheme = "ahts"
si_seconds = 0.0
duration_seconds = 100.0
"#;
        let file: ScenarioFile = toml::from_str(text).unwrap();
        let err = file.to_scenario().unwrap_err().to_string();
        assert!(err.contains("si_seconds"), "message was: {err}");
    }

    #[test]
    fn unknown_scheme_rejected() {
        let text = r#"
scheme = "ntp"
si_seconds = 1.0
duration_seconds = 100.0
"#;
        let file: ScenarioFile = toml::from_str(text).unwrap();
        assert!(file.to_scenario().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"
scheme = "ahts"
si_secs = 1.0
duration_seconds = 100.0
"#;
        assert!(toml::from_str::<ScenarioFile>(text).is_err());
    }

    #[test]
    fn jitter_kinds_parse() {
        let text = r#"
scheme = "ahts"
si_seconds = 1.0
duration_seconds = 100.0

[delay]
propagation_seconds = 1e-6
interrupt_tx = { kind = "constant", seconds = 5e-6 }
interrupt_rx = { kind = "uniform", lo_seconds = 0.0, hi_seconds = 1e-5 }
"#;
        let file: ScenarioFile = toml::from_str(text).unwrap();
        let cfg = file.to_scenario().unwrap();
        assert_eq!(cfg.delay.interrupt_tx, JitterSpec::Constant(5e-6));
        assert_eq!(
            cfg.delay.interrupt_rx,
            JitterSpec::Uniform { lo: 0.0, hi: 1e-5 }
        );
    }
}
