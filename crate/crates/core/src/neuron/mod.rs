//! Spiking neuron state machines.
//!
//! Two neurons live here:
//!
//! * [`IfState`], the soft-reset integrate-and-fire neuron used by the rate
//!   coding baseline: `û = u + z`, spike when `û >= v_th`, subtract `v_th`.
//! * [`TmnState`], the ternary momentum neuron. Each step doubles the
//!   residual before integrating the new input, `û = 2u + z`, and emits a
//!   ternary spike from the symmetric predictive thresholds `±α·2^P·v_th`.
//!   A spike resets by the full amount `2^P·v_th`. The first `P` steps are a
//!   pre-charge phase that integrates without emitting.
//!
//! Because of the doubling, after `T` steps the membrane holds
//! `Σ 2^(T-t) (z[t] - r·s[t])` with `r` the reset amount; see
//! [`direct_weighted_integrate`].
//!
//! [`fixed`] models the same neuron on a `W`-bit two's complement register
//! where the doubling is a one-bit left shift.

pub mod fixed;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A ternary spike value, always one of `-1`, `0`, `+1`.
pub type Spike = i8;

/// Parameters of a ternary momentum neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmnConfig {
    /// Full threshold `v_th`; the per-spike reset before pre-charge scaling.
    pub v_th: f64,
    /// Predictive ratio `ṽ_th / v_th`.
    pub alpha: f64,
    /// Pre-charge length `P`.
    pub precharge: usize,
    /// Total number of steps `T`, pre-charge included.
    pub horizon: usize,
    /// Suppress negative spikes until the first positive one (ReLU gate).
    pub negative_gate: bool,
}

impl TmnConfig {
    /// `α = ½`, no pre-charge, gate off.
    pub fn new(v_th: f64, horizon: usize) -> Self {
        TmnConfig {
            v_th,
            alpha: 0.5,
            precharge: 0,
            horizon,
            negative_gate: false,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_precharge(mut self, precharge: usize) -> Self {
        self.precharge = precharge;
        self
    }

    pub fn with_gate(mut self, on: bool) -> Self {
        self.negative_gate = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_th.is_finite() && self.v_th > 0.0) {
            return Err(Error::config(format!(
                "v_th must be > 0, got {}",
                self.v_th
            )));
        }
        // α = 1 is accepted: it is the full-threshold (predictive spiking off) setting.
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if self.precharge >= self.horizon {
            return Err(Error::config(format!(
                "pre-charge {} must be shorter than the horizon {}",
                self.precharge, self.horizon
            )));
        }
        if self.horizon > 60 {
            return Err(Error::config("horizon above 60 overflows the 2^T weights"));
        }
        Ok(())
    }

    /// Amount subtracted per spike, `2^P · v_th`.
    pub fn reset_amount(&self) -> f64 {
        pow2(self.precharge) * self.v_th
    }

    /// Firing threshold magnitude, `α · 2^P · v_th`.
    pub fn predictive_threshold(&self) -> f64 {
        self.alpha * self.reset_amount()
    }
}

pub(crate) fn pow2(k: usize) -> f64 {
    (1u64 << k) as f64
}

/// Membrane state of one TMN.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TmnState {
    pub u: f64,
    pub t: usize,
    /// Set once a `+1` has been emitted; used by the negative gate.
    pub fired_positive: bool,
}

impl TmnState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Advances one timestep with input current `z` and returns the emitted spike.
    pub fn step(&mut self, z: f64, cfg: &TmnConfig) -> Result<Spike> {
        if self.t >= cfg.horizon {
            return Err(Error::State(format!(
                "stepping past the horizon T={}",
                cfg.horizon
            )));
        }
        let u_hat = 2.0 * self.u + z;
        self.t += 1;
        if self.t <= cfg.precharge {
            self.u = u_hat;
            return Ok(0);
        }
        let thr = cfg.predictive_threshold();
        let s: Spike = if u_hat >= thr {
            1
        } else if u_hat <= -thr {
            -1
        } else {
            0
        };
        if s == -1 && cfg.negative_gate && !self.fired_positive {
            self.u = u_hat;
            return Ok(0);
        }
        if s == 1 {
            self.fired_positive = true;
        }
        self.u = u_hat - cfg.reset_amount() * f64::from(s);
        Ok(s)
    }
}

/// Soft-reset integrate-and-fire neuron (rate coding baseline).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IfState {
    pub u: f64,
}

impl IfState {
    pub fn step(&mut self, z: f64, v_th: f64) -> bool {
        let u_hat = self.u + z;
        let fired = u_hat >= v_th;
        self.u = if fired { u_hat - v_th } else { u_hat };
        fired
    }
}

/// A single neuron's ternary spike train together with its emission scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub spikes: Vec<Spike>,
    pub v_th: f64,
    pub precharge: usize,
}

impl SpikeTrain {
    /// Checks the ternary domain and that nothing is emitted during pre-charge.
    pub fn new(spikes: Vec<Spike>, v_th: f64, precharge: usize) -> Result<Self> {
        if let Some(i) = spikes.iter().position(|s| !(-1..=1).contains(s)) {
            return Err(Error::config(format!(
                "spike {} at step {i} is not ternary",
                spikes[i]
            )));
        }
        if spikes.iter().take(precharge).any(|&s| s != 0) {
            return Err(Error::config("spike emitted during pre-charge"));
        }
        Ok(SpikeTrain {
            spikes,
            v_th,
            precharge,
        })
    }

    pub fn horizon(&self) -> usize {
        self.spikes.len()
    }

    pub fn first_nonzero(&self) -> Option<Spike> {
        self.spikes.iter().copied().find(|&s| s != 0)
    }

    pub fn nonzero_count(&self) -> usize {
        self.spikes.iter().filter(|&&s| s != 0).count()
    }
}

/// Ternary spikes of a whole layer, stored step-major: `steps[t][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTensor {
    pub shape: Vec<usize>,
    pub steps: Vec<Vec<Spike>>,
}

impl SpikeTensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn train(&self, i: usize, v_th: f64, precharge: usize) -> SpikeTrain {
        SpikeTrain {
            spikes: self.steps.iter().map(|s| s[i]).collect(),
            v_th,
            precharge,
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.steps
            .iter()
            .map(|s| s.iter().filter(|&&v| v != 0).count())
            .sum()
    }

    pub fn positive_count(&self) -> usize {
        self.steps
            .iter()
            .map(|s| s.iter().filter(|&&v| v > 0).count())
            .sum()
    }
}

/// Result of running a layer of independent TMNs for `T` steps.
#[derive(Debug, Clone)]
pub struct TmnOutput {
    pub spikes: SpikeTensor,
    /// Final membrane `u[T]` per element.
    pub residuals: Tensor,
    pub config: TmnConfig,
}

impl TmnOutput {
    pub fn trains(&self) -> Vec<SpikeTrain> {
        (0..self.spikes.numel())
            .map(|i| {
                self.spikes
                    .train(i, self.config.v_th, self.config.precharge)
            })
            .collect()
    }
}

/// Runs one TMN per element over `T` input frames.
pub fn tmn_forward(frames: &[Tensor], cfg: &TmnConfig) -> Result<TmnOutput> {
    cfg.validate()?;
    if frames.len() != cfg.horizon {
        return Err(Error::shape(format!(
            "expected {} input frames, got {}",
            cfg.horizon,
            frames.len()
        )));
    }
    let shape = frames[0].shape().to_vec();
    if let Some(f) = frames.iter().find(|f| f.shape() != shape.as_slice()) {
        return Err(Error::shape(format!(
            "ragged frames: {:?} vs {:?}",
            shape,
            f.shape()
        )));
    }
    let n = frames[0].len();
    let mut states = vec![TmnState::new(); n];
    let mut steps = Vec::with_capacity(cfg.horizon);
    for frame in frames {
        let mut row = Vec::with_capacity(n);
        for (state, &z) in states.iter_mut().zip(frame.data()) {
            row.push(state.step(z, cfg)?);
        }
        steps.push(row);
    }
    let residuals = Tensor::new(shape.clone(), states.iter().map(|s| s.u).collect())?;
    Ok(TmnOutput {
        spikes: SpikeTensor { shape, steps },
        residuals,
        config: *cfg,
    })
}

/// Runs a single neuron over a scalar input sequence.
pub fn tmn_run(z_seq: &[f64], cfg: &TmnConfig) -> Result<(SpikeTrain, f64)> {
    cfg.validate()?;
    if z_seq.len() != cfg.horizon {
        return Err(Error::shape(format!(
            "expected {} inputs, got {}",
            cfg.horizon,
            z_seq.len()
        )));
    }
    let mut state = TmnState::new();
    let spikes = z_seq
        .iter()
        .map(|&z| state.step(z, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        SpikeTrain {
            spikes,
            v_th: cfg.v_th,
            precharge: cfg.precharge,
        },
        state.u,
    ))
}

/// Evaluates `Σ_t 2^(T-t) (z[t] - reset·s[t])` directly from replayed
/// decisions. `reset` is `v_th` without pre-charge and `2^P·v_th` with it.
pub fn direct_weighted_integrate(z_seq: &[f64], reset: f64, decisions: &[Spike]) -> Result<f64> {
    if z_seq.len() != decisions.len() {
        return Err(Error::shape(format!(
            "{} inputs but {} decisions",
            z_seq.len(),
            decisions.len()
        )));
    }
    let horizon = z_seq.len();
    Ok(z_seq
        .iter()
        .zip(decisions)
        .enumerate()
        .map(|(t, (&z, &s))| pow2(horizon - 1 - t) * (z - reset * f64::from(s)))
        .sum())
}
