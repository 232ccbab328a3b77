//! Converted spiking network and its layer-synchronous simulation.
//!
//! The network is cut into stages at every ReLU. A stage is a run of linear
//! layers followed by a neuron layer; the last stage ends in a non-spiking
//! integrator that produces the logits. The first stage sees the analog
//! input as a constant current on every step (direct coding); every later
//! stage sees `v_th` times the ternary spikes of the stage before it.
//!
//! Each stage completes all `T` steps before the next one starts. With a
//! pre-charge of `P` steps, a neuron's first emission happens at step
//! `P + 1`, so the spikes are handed to the next stage shifted `P` steps
//! earlier, as a pipelined implementation would deliver them. This keeps the
//! weight of every delivered spike equal to its decode weight `2^(P+T-t)`.

use serde::{Deserialize, Serialize};

use super::calibrate::CalibrationResult;
use super::network::{Layer, NetworkSpec};
use crate::error::{Error, Result};
use crate::neuron::{pow2, IfState, Spike, SpikeTensor, SpikeTrain, TmnConfig, TmnState};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Run the neuron ungated, then zero every train whose first spike is negative.
    PostFilter,
    /// Suppress negative spikes online until the first positive one.
    OnlineLatch,
    /// Keep negative-valued trains.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    /// Ternary momentum neurons with CSS decoding.
    Css,
    /// Soft-reset IF neurons with spike-count decoding.
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnnConfig {
    pub coding: Coding,
    pub horizon: usize,
    pub precharge: usize,
    pub alpha: f64,
    pub gate: GateMode,
}

impl SnnConfig {
    pub fn css(horizon: usize, precharge: usize, alpha: f64) -> Self {
        SnnConfig {
            coding: Coding::Css,
            horizon,
            precharge,
            alpha,
            gate: GateMode::PostFilter,
        }
    }

    pub fn rate(horizon: usize) -> Self {
        SnnConfig {
            coding: Coding::Rate,
            horizon,
            precharge: 0,
            alpha: 1.0,
            gate: GateMode::Off,
        }
    }

    pub fn with_gate(mut self, gate: GateMode) -> Self {
        self.gate = gate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.coding {
            Coding::Css => self.neuron(1.0).validate(),
            Coding::Rate if self.horizon == 0 => Err(Error::config("horizon must be at least 1")),
            Coding::Rate => Ok(()),
        }
    }

    /// TMN configuration for a layer with full threshold `v_th`.
    pub fn neuron(&self, v_th: f64) -> TmnConfig {
        TmnConfig {
            v_th,
            alpha: self.alpha,
            precharge: self.precharge,
            horizon: self.horizon,
            negative_gate: self.gate == GateMode::OnlineLatch,
        }
    }

    /// Steps by which delivered spikes are shifted.
    fn delivery_shift(&self) -> usize {
        match self.coding {
            Coding::Css => self.precharge,
            Coding::Rate => 0,
        }
    }

    /// Weight of step `t` (zero-based) in the readout integrator, normalized.
    fn readout_weights(&self) -> Vec<f64> {
        let t = self.horizon;
        match self.coding {
            Coding::Css => {
                let n = pow2(t) - 1.0;
                (0..t).map(|i| pow2(t - 1 - i) / n).collect()
            }
            Coding::Rate => vec![1.0 / t as f64; t],
        }
    }
}

/// One run of linear layers followed by a neuron layer or the readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    /// Index range `[first, last)` of the linear layers in the source network.
    pub layers: (usize, usize),
    pub ops: Vec<Layer>,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    /// `true` for the first stage, which integrates the analog input.
    pub analog_input: bool,
    /// Index of the replaced ReLU and its threshold; `None` for the readout.
    pub neuron: Option<(usize, f64)>,
    /// Per input element, the number of stage outputs it reaches.
    pub fan_out: Vec<u64>,
    /// Multiply-accumulates per step, biases excluded.
    pub macs_per_step: u64,
    /// Bias additions per step.
    pub bias_adds_per_step: u64,
}

impl Stage {
    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.ops.iter().try_fold(x.clone(), |acc, l| l.apply(&acc))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnnModel {
    pub input_shape: Vec<usize>,
    pub stages: Vec<Stage>,
    pub config: SnnConfig,
}

impl SnnModel {
    pub fn with_config(&self, config: SnnConfig) -> Result<Self> {
        config.validate()?;
        Ok(SnnModel {
            config,
            ..self.clone()
        })
    }

    /// Source network layers, copied back out of the stages.
    pub fn linear_layers(&self) -> impl Iterator<Item = &Layer> {
        self.stages.iter().flat_map(|s| s.ops.iter())
    }

    pub fn thresholds(&self) -> Vec<(usize, f64)> {
        self.stages.iter().filter_map(|s| s.neuron).collect()
    }
}

fn stage_fan_out(ops: &[Layer], input_shape: &[usize]) -> Result<Vec<u64>> {
    let n: usize = input_shape.iter().product();
    let mut shapes = vec![input_shape.to_vec()];
    for op in ops {
        let next = op.output_shape(shapes.last().unwrap())?;
        shapes.push(next);
    }
    let mut fan = Vec::with_capacity(n);
    for i in 0..n {
        let mut set = vec![i];
        for (op, shape) in ops.iter().zip(&shapes) {
            let mut next = Vec::new();
            for &j in &set {
                next.extend(op.reach(shape, j)?);
            }
            next.sort_unstable();
            next.dedup();
            set = next;
        }
        fan.push(set.len() as u64);
    }
    Ok(fan)
}

/// Copies the weights of `spec` and replaces each ReLU by a neuron layer at
/// its calibrated threshold.
pub fn convert(
    spec: &NetworkSpec,
    calib: &CalibrationResult,
    config: SnnConfig,
) -> Result<SnnModel> {
    config.validate()?;
    let shapes = spec.shapes()?;
    let mut stages = Vec::new();
    let mut start = 0;
    let mut in_shape = spec.input_shape.clone();
    for idx in 0..=spec.layers.len() {
        let at_end = idx == spec.layers.len();
        if !at_end && !spec.layers[idx].is_relu() {
            continue;
        }
        let neuron = if at_end {
            None
        } else {
            let v = calib.threshold(idx).ok_or_else(|| {
                Error::config(format!("no calibrated threshold for relu layer {idx}"))
            })?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "threshold {v} for layer {idx} must be > 0"
                )));
            }
            Some((idx, v))
        };
        let ops: Vec<Layer> = spec.layers[start..idx].to_vec();
        let out_shape = if idx == 0 {
            spec.input_shape.clone()
        } else {
            shapes[idx - 1].clone()
        };
        let mut macs = 0;
        let mut biases = 0;
        let mut cur = in_shape.clone();
        for op in &ops {
            macs += op.mac_cost(&cur)?;
            biases += op.bias_adds(&cur)?;
            cur = op.output_shape(&cur)?;
        }
        stages.push(Stage {
            layers: (start, idx),
            fan_out: stage_fan_out(&ops, &in_shape)?,
            ops,
            input_shape: in_shape.clone(),
            output_shape: out_shape.clone(),
            analog_input: stages.is_empty(),
            neuron,
            macs_per_step: macs,
            bias_adds_per_step: biases,
        });
        start = idx + 1;
        in_shape = out_shape;
    }
    Ok(SnnModel {
        input_shape: spec.input_shape.clone(),
        stages,
        config,
    })
}

/// Zeroes every train whose first nonzero spike is negative.
pub fn zero_negative_sequences(trains: &[SpikeTrain]) -> Vec<SpikeTrain> {
    trains
        .iter()
        .map(|tr| {
            if tr.first_nonzero() == Some(-1) {
                SpikeTrain {
                    spikes: vec![0; tr.spikes.len()],
                    ..tr.clone()
                }
            } else {
                tr.clone()
            }
        })
        .collect()
}

/// [`zero_negative_sequences`] applied in place to a whole layer.
pub fn zero_negative_layer(spikes: &mut SpikeTensor) -> usize {
    let mut zeroed = 0;
    for i in 0..spikes.numel() {
        let first = spikes.steps.iter().map(|s| s[i]).find(|&s| s != 0);
        if first == Some(-1) {
            zeroed += 1;
            for step in &mut spikes.steps {
                step[i] = 0;
            }
        }
    }
    zeroed
}

/// Everything recorded for one stage during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub stage: usize,
    pub layers: (usize, usize),
    pub analog_input: bool,
    /// Input current `z[t]` of the stage's neurons (or readout) per step.
    pub currents: Vec<Tensor>,
    /// Emitted spikes after gating; `None` for the readout.
    pub spikes: Option<SpikeTensor>,
    /// Final membranes `u[T]`; `None` for the readout.
    pub residuals: Option<Tensor>,
    pub v_th: Option<f64>,
    /// Per input element fan-out of the stage (copied from the model).
    pub fan_out: Vec<u64>,
    pub macs_per_step: u64,
    pub bias_adds_per_step: u64,
    /// Trains zeroed by the post-filter gate.
    pub zeroed_trains: usize,
    /// Neurons whose `|u[T]|` exceeds one reset amount: the one-spike-per-step
    /// limit left information unencoded.
    pub saturated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub config: SnnConfig,
    pub stages: Vec<StageTrace>,
}

impl SimulationTrace {
    /// Spikes delivered into stage `k` (those emitted by stage `k - 1`).
    pub fn input_spikes(&self, k: usize) -> Option<&SpikeTensor> {
        if k == 0 {
            None
        } else {
            self.stages[k - 1].spikes.as_ref()
        }
    }

    pub fn total_spikes(&self) -> usize {
        self.stages
            .iter()
            .filter_map(|s| s.spikes.as_ref())
            .map(SpikeTensor::nonzero_count)
            .sum()
    }
}

/// Bias current injected into each stage's neurons on every step: the stage
/// applied to an all-zero input. Identical for every `t`.
pub fn bias_currents(model: &SnnModel) -> Result<Vec<Vec<Tensor>>> {
    model
        .stages
        .iter()
        .map(|s| {
            let b = s.apply(&Tensor::zeros(s.input_shape.clone()))?;
            Ok(vec![b; model.config.horizon])
        })
        .collect()
}

fn run_tmn_layer(currents: &[Tensor], cfg: &TmnConfig) -> Result<(SpikeTensor, Tensor)> {
    let shape = currents[0].shape().to_vec();
    let n = currents[0].len();
    let mut states = vec![TmnState::new(); n];
    let mut steps = Vec::with_capacity(currents.len());
    for z in currents {
        steps.push(
            states
                .iter_mut()
                .zip(z.data())
                .map(|(st, &zi)| st.step(zi, cfg))
                .collect::<Result<Vec<Spike>>>()?,
        );
    }
    let residuals = Tensor::new(shape.clone(), states.iter().map(|s| s.u).collect())?;
    Ok((SpikeTensor { shape, steps }, residuals))
}

fn run_if_layer(currents: &[Tensor], v_th: f64) -> Result<(SpikeTensor, Tensor)> {
    let shape = currents[0].shape().to_vec();
    let mut states = vec![IfState::default(); currents[0].len()];
    let mut steps = Vec::with_capacity(currents.len());
    for z in currents {
        steps.push(
            states
                .iter_mut()
                .zip(z.data())
                .map(|(st, &zi)| Spike::from(st.step(zi, v_th)))
                .collect(),
        );
    }
    let residuals = Tensor::new(shape.clone(), states.iter().map(|s| s.u).collect())?;
    Ok((SpikeTensor { shape, steps }, residuals))
}

/// Simulates the model on one input and returns the logits and full trace.
pub fn snn_forward(model: &SnnModel, x: &Tensor) -> Result<(Tensor, SimulationTrace)> {
    let cfg = &model.config;
    cfg.validate()?;
    if x.shape() != model.input_shape.as_slice() {
        return Err(Error::shape(format!(
            "input shape {:?} does not match model input {:?}",
            x.shape(),
            model.input_shape
        )));
    }
    let horizon = cfg.horizon;
    let shift = cfg.delivery_shift();
    let mut frames: Vec<Tensor> = vec![x.clone(); horizon];
    let mut traces = Vec::with_capacity(model.stages.len());
    let mut logits = None;
    for (k, stage) in model.stages.iter().enumerate() {
        let currents = if stage.analog_input {
            // Constant input: one evaluation serves every step.
            vec![stage.apply(&frames[0])?; horizon]
        } else {
            frames
                .iter()
                .map(|f| stage.apply(f))
                .collect::<Result<Vec<_>>>()?
        };
        let mut trace = StageTrace {
            stage: k,
            layers: stage.layers,
            analog_input: stage.analog_input,
            currents: Vec::new(),
            spikes: None,
            residuals: None,
            v_th: stage.neuron.map(|(_, v)| v),
            fan_out: stage.fan_out.clone(),
            macs_per_step: stage.macs_per_step,
            bias_adds_per_step: stage.bias_adds_per_step,
            zeroed_trains: 0,
            saturated: 0,
        };
        match stage.neuron {
            Some((_, v_th)) => {
                let (mut spikes, residuals) = match cfg.coding {
                    Coding::Css => run_tmn_layer(&currents, &cfg.neuron(v_th))?,
                    Coding::Rate => run_if_layer(&currents, v_th)?,
                };
                if cfg.coding == Coding::Css && cfg.gate == GateMode::PostFilter {
                    trace.zeroed_trains = zero_negative_layer(&mut spikes);
                }
                let limit = match cfg.coding {
                    Coding::Css => cfg.neuron(v_th).reset_amount(),
                    Coding::Rate => v_th,
                };
                trace.saturated = residuals.data().iter().filter(|u| u.abs() > limit).count();
                frames = (0..horizon)
                    .map(|t| {
                        let data = match spikes.steps.get(t + shift) {
                            Some(s) => s.iter().map(|&v| v_th * f64::from(v)).collect(),
                            None => vec![0.0; spikes.numel()],
                        };
                        Tensor::new(spikes.shape.clone(), data)
                    })
                    .collect::<Result<Vec<_>>>()?;
                trace.spikes = Some(spikes);
                trace.residuals = Some(residuals);
            }
            None => {
                let w = cfg.readout_weights();
                let mut acc = vec![0.0; currents[0].len()];
                for (z, wt) in currents.iter().zip(&w) {
                    for (a, &zi) in acc.iter_mut().zip(z.data()) {
                        *a += wt * zi;
                    }
                }
                logits = Some(Tensor::new(currents[0].shape().to_vec(), acc)?);
            }
        }
        trace.currents = currents;
        traces.push(trace);
    }
    let logits = logits.ok_or_else(|| Error::config("model has no readout stage"))?;
    Ok((
        logits,
        SimulationTrace {
            config: *cfg,
            stages: traces,
        },
    ))
}

pub fn argmax(x: &Tensor) -> usize {
    x.data()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}
