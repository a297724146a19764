//! Simulator configuration: topology constants, power model, sensor model,
//! and channel defaults.
//!
//! The configuration round-trips through a sectioned key/value text file
//! (TOML). The shipped defaults are the calibrated constants produced by
//! `calibrate::fit_model` against the reference step-response targets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sensor::DtsConfig;
use crate::thermal::{ChipTopology, PowerModel};

/// Channel-layer defaults shared by the modem and the experiment harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Edge-detection threshold (°C).
    pub threshold_c: f64,
    /// Activity fraction of the sink's own measurement loop.
    pub sink_load: f64,
    /// Idle lead-in simulated before a transmission starts (s).
    pub lead_in_s: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            threshold_c: 2.0,
            sink_load: 0.04,
            lead_in_s: 4.0,
        }
    }
}

/// Full simulator configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Config {
    pub topology: ChipTopology,
    pub power: PowerModel,
    pub sensor: DtsConfig,
    pub channel: ChannelConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.power.validate()?;
        self.sensor.validate()?;
        if self.channel.threshold_c < self.sensor.resolution {
            return Err(Error::Config(format!(
                "threshold {} °C below sensor resolution {} °C",
                self.channel.threshold_c, self.sensor.resolution
            )));
        }
        if !(0.0..=1.0).contains(&self.channel.sink_load) {
            return Err(Error::Config("sink_load outside [0, 1]".into()));
        }
        Ok(())
    }

    /// Hex digest of the canonical serialized form, recorded in reports.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_preserves_hash() {
        let cfg = Config::default();
        let text = cfg.to_toml();
        let back = Config::from_toml(&text).unwrap();
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn bad_threshold_rejected() {
        let mut cfg = Config::default();
        cfg.channel.threshold_c = 0.5;
        assert!(cfg.validate().is_err());
    }
}
