//! Flat per-step rows of a [`SimulationTrace`] for export.
//!
//! CSV columns, one row per spiking stage and step:
//!
//! ```text
//! stage,relu_layer,step,nonzero,positive,negative,acs,macs,residual_mean_abs,residual_max_abs,saturated
//! ```
//!
//! `acs` counts the accumulates the stage's spikes at that step trigger in
//! the next stage. `macs` is the stage's own multiply-accumulate and bias
//! work for the step. Residual columns repeat the final-membrane statistics
//! on every row of the stage.

use serde::Serialize;

use super::snn::SimulationTrace;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub stage: usize,
    pub relu_layer: usize,
    pub step: usize,
    pub nonzero: u64,
    pub positive: u64,
    pub negative: u64,
    pub acs: u64,
    pub macs: u64,
    pub residual_mean_abs: f64,
    pub residual_max_abs: f64,
    pub saturated: usize,
}

pub const TRACE_COLUMNS: &str =
    "stage,relu_layer,step,nonzero,positive,negative,acs,macs,residual_mean_abs,residual_max_abs,saturated";

impl SimulationTrace {
    /// Accumulates triggered in stage `k` by its incoming spikes at step `t`
    /// (zero-based, emission time). Zero for the analog first stage.
    pub fn stage_acs_at(&self, k: usize, t: usize) -> u64 {
        let Some(spikes) = self.input_spikes(k) else {
            return 0;
        };
        spikes.steps[t]
            .iter()
            .zip(&self.stages[k].fan_out)
            .filter(|(&s, _)| s != 0)
            .map(|(_, &f)| f)
            .sum()
    }

    /// Accumulates triggered in stage `k` over the whole run.
    pub fn stage_acs(&self, k: usize) -> u64 {
        (0..self.config.horizon)
            .map(|t| self.stage_acs_at(k, t))
            .sum()
    }

    /// Multiply-accumulates of stage `k` over the whole run: the analog
    /// stage's products on every step plus every stage's bias additions.
    pub fn stage_macs(&self, k: usize) -> u64 {
        let s = &self.stages[k];
        let per_step = if s.analog_input { s.macs_per_step } else { 0 } + s.bias_adds_per_step;
        per_step * self.config.horizon as u64
    }

    pub fn rows(&self) -> Vec<TraceRow> {
        let mut rows = Vec::new();
        for (k, st) in self.stages.iter().enumerate() {
            let (Some(spikes), Some(res), Some(_)) = (&st.spikes, &st.residuals, st.v_th) else {
                continue;
            };
            let abs: Vec<f64> = res.data().iter().map(|u| u.abs()).collect();
            let mean_abs = abs.iter().sum::<f64>() / abs.len().max(1) as f64;
            let max_abs = abs.iter().copied().fold(0.0, f64::max);
            let s = &self.stages[k];
            let macs = if s.analog_input { s.macs_per_step } else { 0 } + s.bias_adds_per_step;
            for (t, step) in spikes.steps.iter().enumerate() {
                let positive = step.iter().filter(|&&v| v > 0).count() as u64;
                let negative = step.iter().filter(|&&v| v < 0).count() as u64;
                rows.push(TraceRow {
                    stage: k,
                    relu_layer: st.layers.1,
                    step: t + 1,
                    nonzero: positive + negative,
                    positive,
                    negative,
                    acs: if k + 1 < self.stages.len() {
                        self.stage_acs_at(k + 1, t)
                    } else {
                        0
                    },
                    macs,
                    residual_mean_abs: mean_abs,
                    residual_max_abs: max_abs,
                    saturated: st.saturated,
                });
            }
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_COLUMNS);
        out.push('\n');
        for r in self.rows() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.stage,
                r.relu_layer,
                r.step,
                r.nonzero,
                r.positive,
                r.negative,
                r.acs,
                r.macs,
                r.residual_mean_abs,
                r.residual_max_abs,
                r.saturated
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(&self.rows())
    }
}
