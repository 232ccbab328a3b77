//! Dataset-level evaluation of converted networks and the pre-charge by
//! predictive-threshold ablation grid.

use serde::Serialize;

use super::energy::{energy_account, EnergyConstants, EnergyReport};
use crate::conversion::{
    argmax, convert, snn_forward, CalibrationResult, Dataset, NetworkSpec, SnnConfig,
};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub samples: usize,
    /// Fraction of correct labels; `None` if the dataset is unlabeled.
    pub accuracy: Option<f64>,
    /// Fraction of samples whose argmax matches the ANN's.
    pub agreement: f64,
    pub spikes: u64,
    pub energy: EnergyReport,
}

/// Runs the converted network over every sample of `data`.
pub fn evaluate(
    spec: &NetworkSpec,
    calib: &CalibrationResult,
    data: &Dataset,
    cfg: SnnConfig,
    constants: EnergyConstants,
) -> Result<Evaluation> {
    let model = convert(spec, calib, cfg)?;
    let (mut n, mut labeled, mut correct, mut agree, mut spikes) = (0, 0, 0, 0, 0u64);
    let mut energy = EnergyReport::new(0, 0, constants);
    for (x, label) in data.samples() {
        let (y, trace) = snn_forward(&model, x)?;
        let pred = argmax(&y);
        if pred == argmax(&spec.forward(x)?) {
            agree += 1;
        }
        if let Some(l) = label {
            labeled += 1;
            correct += usize::from(l == pred);
        }
        spikes += trace.total_spikes() as u64;
        energy = energy.merge(&energy_account(&trace, constants));
        n += 1;
    }
    Ok(Evaluation {
        samples: n,
        accuracy: (labeled > 0).then(|| correct as f64 / labeled as f64),
        agreement: agree as f64 / n.max(1) as f64,
        spikes,
        energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AblationRow {
    pub horizon: usize,
    pub precharge: usize,
    pub tps: bool,
    pub alpha: f64,
    pub accuracy: Option<f64>,
    pub agreement: f64,
    pub ac_count: u64,
    pub mac_count: u64,
}

/// Predictive ratio used when TPS is on; off means firing at the full
/// threshold only.
pub const TPS_ON_ALPHA: f64 = 0.5;
pub const TPS_OFF_ALPHA: f64 = 1.0;

/// One row per `(P, TPS)` cell, with the post-filter gate.
pub fn ablation_precharge(
    spec: &NetworkSpec,
    calib: &CalibrationResult,
    data: &Dataset,
    horizon: usize,
    precharges: &[usize],
    tps: &[bool],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &p in precharges {
        for &on in tps {
            let alpha = if on { TPS_ON_ALPHA } else { TPS_OFF_ALPHA };
            let e = evaluate(
                spec,
                calib,
                data,
                SnnConfig::css(horizon, p, alpha),
                EnergyConstants::default(),
            )?;
            rows.push(AblationRow {
                horizon,
                precharge: p,
                tps: on,
                alpha,
                accuracy: e.accuracy,
                agreement: e.agreement,
                ac_count: e.energy.ac_count,
                mac_count: e.energy.mac_count,
            });
        }
    }
    Ok(rows)
}
