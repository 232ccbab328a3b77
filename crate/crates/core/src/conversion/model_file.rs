//! A converted network on disk: the source network, its calibration and the
//! spiking configuration, from which the model is rebuilt on load.
//!
//! ```json
//! {"format": "tmn-snn", "version": 1,
//!  "config": {"coding": "css", "horizon": 8, "precharge": 1, "alpha": 0.5, "gate": "post_filter"},
//!  "calibration": {...}, "network": {...}}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::calibrate::CalibrationResult;
use super::network::NetworkSpec;
use super::snn::{convert, SnnConfig, SnnModel};
use crate::error::{Error, Result};

pub const SNN_FORMAT: &str = "tmn-snn";

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertedNetwork {
    pub spec: NetworkSpec,
    pub calibration: CalibrationResult,
    pub model: SnnModel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnnFile {
    format: String,
    version: u32,
    config: SnnConfig,
    calibration: CalibrationResult,
    network: serde_json::Value,
}

impl ConvertedNetwork {
    pub fn new(
        spec: NetworkSpec,
        calibration: CalibrationResult,
        config: SnnConfig,
    ) -> Result<Self> {
        let model = convert(&spec, &calibration, config)?;
        Ok(ConvertedNetwork {
            spec,
            calibration,
            model,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SnnFile {
            format: SNN_FORMAT.to_string(),
            version: 1,
            config: self.model.config,
            calibration: self.calibration.clone(),
            network: serde_json::from_str(&self.spec.to_json()?)?,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SnnFile =
            serde_json::from_str(text).map_err(|e| Error::load(None, format!("schema: {e}")))?;
        if file.format != SNN_FORMAT || file.version != 1 {
            return Err(Error::load(
                None,
                format!(
                    "expected {SNN_FORMAT} v1, got {} v{}",
                    file.format, file.version
                ),
            ));
        }
        file.calibration.validate()?;
        let spec = NetworkSpec::from_json(&file.network.to_string())?;
        ConvertedNetwork::new(spec, file.calibration, file.config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}
