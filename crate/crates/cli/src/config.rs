//! Experiment configuration, read from TOML.

use anyhow::Context;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use exactdim::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ParamsSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub windows: WindowsSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub gamma: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub epsilon: f64,
    /// `ψ(q) = q^{-τ} (log q)^a`; zero gives the pure power.
    #[serde(default)]
    pub log_power1: f64,
    #[serde(default)]
    pub log_power2: f64,
    #[serde(default = "default_theta")]
    pub theta: String,
}

fn default_theta() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub m1: u64,
    pub depth: usize,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsSection {
    pub dense: i64,
    pub window: Option<f64>,
    pub log_samples: usize,
    pub tail_samples: usize,
    pub tol: f64,
    pub budget: u64,
    pub normality_nmax: usize,
}

impl Default for WindowsSection {
    fn default() -> Self {
        Self {
            dense: 2000,
            window: None,
            log_samples: 200,
            tail_samples: 40,
            tol: 1e-12,
            budget: 1 << 26,
            normality_nmax: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub seed: u64,
    pub medium_samples: usize,
    pub tail_samples: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            medium_samples: 2000,
            tail_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("config {path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).map_err(|message| {
            SchemaError {
                path: path.display().to_string(),
                message,
            }
            .into()
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        if cfg.schedule.m1 < 2 || cfg.schedule.depth == 0 {
            return Err("schedule needs m1 >= 2 and depth >= 1".into());
        }
        if cfg.windows.dense < 1 || !(cfg.windows.tol > 0.0) {
            return Err("windows need dense >= 1 and tol > 0".into());
        }
        cfg.params
            .theta
            .parse::<exactdim::ThetaSpec>()
            .map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[params]
gamma = 1.0
tau1 = 3.0
tau2 = 3.0
epsilon = 0.02

[schedule]
m1 = 16
depth = 2
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.schedule.mode, Mode::Desk);
        assert_eq!(c.windows, WindowsSection::default());
        assert_eq!(c.params.theta, "0");
    }

    #[test]
    fn schema_violations() {
        assert!(ExperimentConfig::parse("[params]\ngamma = 1").is_err());
        let extra = MINIMAL.replace("depth = 2", "depth = 2\nfoo = 1");
        assert!(ExperimentConfig::parse(&extra).unwrap_err().contains("foo"));
        let theta = MINIMAL.replace("epsilon = 0.02", "epsilon = 0.02\ntheta = \"pi\"");
        assert!(ExperimentConfig::parse(&theta).is_err());
        let mode = MINIMAL.replace("depth = 2", "depth = 2\nmode = \"strict\"");
        assert!(ExperimentConfig::parse(&mode).is_err());
    }
}
