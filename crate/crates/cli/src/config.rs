//! Experiment configuration files.

use std::path::{Path, PathBuf};

use otfs_core::channel::RandomChannelSpec;
use otfs_core::{DetectorKind, FrameConfig, Model, MpConfig, PilotSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentKind {
    BerSweep,
    CapacityTable,
    PowerTable,
    CirDump,
    MatrixDump,
    EquivalenceCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BerSweep => "ber_sweep",
            ExperimentKind::CapacityTable => "capacity_table",
            ExperimentKind::PowerTable => "power_table",
            ExperimentKind::CirDump => "cir_dump",
            ExperimentKind::MatrixDump => "matrix_dump",
            ExperimentKind::EquivalenceCheck => "equivalence_check",
        }
    }
}

/// Either a fixed tap list (same JSON as a channel model file) or a random
/// ensemble drawn per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Model(serde_json::Value),
    Random(RandomChannelSpec),
}

/// One value or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_trials() -> u64 {
    1
}

fn default_bits() -> usize {
    2
}

fn default_power() -> f64 {
    1.0
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub frame: OneOrMany<FrameConfig>,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub detector: Option<OneOrMany<DetectorKind>>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    /// Bits per QAM symbol.
    #[serde(default = "default_bits")]
    pub qam_bits: usize,
    #[serde(default)]
    pub mp: MpConfig,
    /// Average sample power for `power_table`.
    #[serde(default = "default_power")]
    pub symbol_power: f64,
    #[serde(default)]
    pub pilot: Option<PilotSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Schema(msg) => CliError::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn frames(&self) -> Vec<FrameConfig> {
        self.frame.to_vec()
    }

    pub fn detectors(&self) -> Vec<DetectorKind> {
        self.detector
            .as_ref()
            .map(|d| d.to_vec())
            .unwrap_or_else(|| DetectorKind::ALL.to_vec())
    }

    pub fn fixed_model(&self) -> Result<Option<Model>> {
        match &self.channel {
            Some(ChannelSpec::Model(v)) => Ok(Some(
                Model::from_json(&v.to_string()).map_err(|e| CliError::Schema(format!("channel.model: {e}")))?,
            )),
            _ => Ok(None),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let frames = self.frames();
        if frames.is_empty() {
            return Err(CliError::Schema(
                "frame: at least one frame configuration is required".into(),
            ));
        }
        for f in &frames {
            f.validate().map_err(|e| CliError::Config(format!("frame {f}: {e}")))?;
        }
        if self.trials == 0 {
            return Err(CliError::Schema("trials: must be at least 1".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(CliError::Schema("snr_db: values must be finite".into()));
        }
        self.mp.validate().map_err(|e| CliError::Schema(format!("mp: {e}")))?;
        match &self.channel {
            Some(ChannelSpec::Random(r)) => r
                .validate()
                .map_err(|e| CliError::Config(format!("channel.random: {e}")))?,
            Some(ChannelSpec::Model(_)) => {
                let model = self.fixed_model()?.expect("model channel");
                for f in &frames {
                    model
                        .check_delays(f)
                        .map_err(|e| CliError::Config(format!("frame {f}: {e}")))?;
                }
            }
            None => {}
        }
        if let Some(ChannelSpec::Random(r)) = &self.channel {
            for f in &frames {
                if r.max_delay > f.max_supported_delay() || r.max_delay >= f.m {
                    return Err(CliError::Config(format!(
                        "frame {f}: random channel delays up to {} exceed the prefix/suffix",
                        r.max_delay
                    )));
                }
            }
        }
        let needs_channel = matches!(
            self.experiment,
            ExperimentKind::BerSweep
                | ExperimentKind::CirDump
                | ExperimentKind::MatrixDump
                | ExperimentKind::EquivalenceCheck
        );
        if needs_channel && self.channel.is_none() {
            return Err(CliError::Schema(format!(
                "channel: required for {}",
                self.experiment.name()
            )));
        }
        if self.experiment == ExperimentKind::EquivalenceCheck && !matches!(self.channel, Some(ChannelSpec::Random(_)))
        {
            return Err(CliError::Schema(
                "channel: equivalence_check needs a random channel".into(),
            ));
        }
        if matches!(
            self.experiment,
            ExperimentKind::BerSweep | ExperimentKind::CapacityTable
        ) && self.snr_db.is_empty()
        {
            return Err(CliError::Schema(format!(
                "snr_db: required for {}",
                self.experiment.name()
            )));
        }
        if !(self.symbol_power > 0.0 && self.symbol_power.is_finite()) {
            return Err(CliError::Schema("symbol_power: must be finite and positive".into()));
        }
        if self.experiment == ExperimentKind::BerSweep {
            otfs_core::Constellation::<f64>::qam(self.qam_bits)
                .map_err(|e| CliError::Schema(format!("qam_bits: {e}")))?;
        }
        if let Some(p) = &self.pilot {
            for f in &frames {
                p.validate(f)
                    .map_err(|e| CliError::Config(format!("pilot for frame {f}: {e}")))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BER: &str = r#"{
        "experiment": "ber_sweep",
        "frame": [{"kind": "RCP", "M": 16, "N": 16, "Lcp": 4}, {"kind": "FZS", "M": 16, "N": 16, "Lzs": 4}],
        "channel": {"random": {"L": 4, "k_max": 3, "max_delay": 3}},
        "snr_db": [8, 12],
        "trials": 10,
        "detector": "MP",
        "master_seed": 5
    }"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_json(BER).unwrap();
        assert_eq!(c.frames().len(), 2);
        assert_eq!(c.detectors(), vec![DetectorKind::Mp]);
        assert_eq!(c.qam_bits, 2);
        assert_eq!(c.mp, MpConfig::default());
        assert_eq!(c.output_path, PathBuf::from("results"));
    }

    #[test]
    fn unknown_field_is_reported_with_position() {
        let bad = BER.replace("\"trials\"", "\"trails\"");
        let err = ExperimentConfig::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("trails") && err.contains("line"), "{err}");
    }

    #[test]
    fn semantic_errors() {
        let zero = BER.replace("\"trials\": 10", "\"trials\": 0");
        assert!(matches!(ExperimentConfig::from_json(&zero), Err(CliError::Schema(_))));
        let long = BER.replace("\"max_delay\": 3", "\"max_delay\": 5");
        assert!(matches!(ExperimentConfig::from_json(&long), Err(CliError::Config(_))));
        let nosnr = BER.replace("[8, 12]", "[]");
        assert!(ExperimentConfig::from_json(&nosnr).is_err());
    }
}
