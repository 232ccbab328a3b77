//! Per-layer threshold calibration from ANN activation percentiles.
//!
//! For every ReLU layer and every batch, the percentile of the post-ReLU
//! activations (all neurons, all samples of the batch) is taken; the layer
//! threshold is the mean of those per-batch percentiles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::NetworkSpec;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_PERCENTILE: f64 = 99.99;
/// Threshold used when a layer never activates.
pub const THRESHOLD_FLOOR: f64 = 1e-6;
pub const CALIBRATION_FORMAT: &str = "tmn-calibration";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerThreshold {
    /// Index of the ReLU layer in the network's layer list.
    pub layer: usize,
    pub v_th: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub format: String,
    pub version: u32,
    pub percentile: f64,
    /// Number of batches averaged.
    pub batches: usize,
    pub seed: u64,
    pub thresholds: Vec<LayerThreshold>,
}

impl CalibrationResult {
    pub fn threshold(&self, layer: usize) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|t| t.layer == layer)
            .map(|t| t.v_th)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CALIBRATION_FORMAT {
            return Err(Error::load(
                None,
                format!("format {:?} is not {CALIBRATION_FORMAT:?}", self.format),
            ));
        }
        if let Some(t) = self
            .thresholds
            .iter()
            .find(|t| !(t.v_th.is_finite() && t.v_th > 0.0))
        {
            return Err(Error::load(
                Some(t.layer),
                format!("threshold {} must be > 0", t.v_th),
            ));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c: CalibrationResult = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::load(None, format!("schema: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Linear-interpolation percentile (`q` in `(0, 100]`) of `values`, which
/// are reordered in place.
pub fn percentile(values: &mut [f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::config("percentile of an empty sample"));
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(Error::config(format!("percentile {q} outside (0, 100]")));
    }
    let rank = q / 100.0 * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let (_, &mut lo_val, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || upper.is_empty() {
        return Ok(lo_val);
    }
    let hi_val = upper.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(lo_val + frac * (hi_val - lo_val))
}

/// Calibrates every ReLU layer of `spec` over `batches`.
pub fn calibrate(
    spec: &NetworkSpec,
    batches: &[Vec<Tensor>],
    q: f64,
    seed: u64,
) -> Result<CalibrationResult> {
    if batches.is_empty() {
        return Err(Error::config("calibration needs at least one batch"));
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(Error::config(format!("percentile {q} outside (0, 100]")));
    }
    let relus = spec.relu_indices();
    let mut sums = vec![0.0; relus.len()];
    for (b, batch) in batches.iter().enumerate() {
        if batch.is_empty() {
            return Err(Error::config(format!("calibration batch {b} is empty")));
        }
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); relus.len()];
        for x in batch {
            let outs = spec.forward_trace(x)?;
            for (k, &l) in relus.iter().enumerate() {
                acts[k].extend_from_slice(outs[l].data());
            }
        }
        for (k, a) in acts.iter_mut().enumerate() {
            sums[k] += percentile(a, q)? / batches.len() as f64;
        }
    }
    let thresholds = relus
        .iter()
        .zip(sums)
        .map(|(&layer, p)| LayerThreshold {
            layer,
            v_th: if p > THRESHOLD_FLOOR {
                p
            } else {
                THRESHOLD_FLOOR
            },
        })
        .collect();
    Ok(CalibrationResult {
        format: CALIBRATION_FORMAT.to_string(),
        version: 1,
        percentile: q,
        batches: batches.len(),
        seed,
        thresholds,
    })
}
