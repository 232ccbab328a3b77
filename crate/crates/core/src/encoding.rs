//! Canonical signed spike (CSS) code words and the rate coding baseline.
//!
//! A CSS train over `T` steps with pre-charge `P` decodes to
//!
//! ```text
//! v_th · Σ_{t>P} 2^(P+T-t) · s[t] / (2^T - 1)
//! ```
//!
//! The `2^T - 1` normalization maps the all-ones `P = 0` word to `v_th`,
//! the same full scale as a rate code that fires on every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{pow2, tmn_run, IfState, Spike, SpikeTrain, TmnConfig};

/// Largest `T - P` accepted by [`optimal_ternary_code`].
pub const EXHAUSTIVE_MAX_STEPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CssCodec {
    pub v_th: f64,
    pub horizon: usize,
    pub precharge: usize,
}

impl CssCodec {
    pub fn new(v_th: f64, horizon: usize, precharge: usize) -> Result<Self> {
        let c = CssCodec {
            v_th,
            horizon,
            precharge,
        };
        TmnConfig::new(v_th, horizon)
            .with_precharge(precharge)
            .validate()?;
        Ok(c)
    }

    pub fn from_config(cfg: &TmnConfig) -> Self {
        CssCodec {
            v_th: cfg.v_th,
            horizon: cfg.horizon,
            precharge: cfg.precharge,
        }
    }

    /// `2^T - 1`.
    pub fn normalization(&self) -> f64 {
        pow2(self.horizon) - 1.0
    }

    /// Weight of a spike at zero-based step `t`: `2^(P+T-1-t)`.
    pub fn weight(&self, t: usize) -> f64 {
        pow2(self.precharge + self.horizon - 1 - t)
    }

    /// Integer code value `Σ 2^(P+T-t) s[t]` of a spike sequence.
    pub fn code_value(&self, spikes: &[Spike]) -> f64 {
        spikes
            .iter()
            .enumerate()
            .skip(self.precharge)
            .map(|(t, &s)| self.weight(t) * f64::from(s))
            .sum()
    }

    /// Value represented by the train.
    pub fn decode(&self, train: &SpikeTrain) -> Result<f64> {
        if train.horizon() != self.horizon || train.precharge != self.precharge {
            return Err(Error::config(format!(
                "train has T={}, P={}; codec expects T={}, P={}",
                train.horizon(),
                train.precharge,
                self.horizon,
                self.precharge
            )));
        }
        if train.v_th != self.v_th {
            return Err(Error::config(format!(
                "train scale {} differs from codec scale {}",
                train.v_th, self.v_th
            )));
        }
        Ok(self.decode_spikes(&train.spikes))
    }

    /// Decodes raw spikes, trusting that they match the codec.
    pub fn decode_spikes(&self, spikes: &[Spike]) -> f64 {
        self.v_th * self.code_value(spikes) / self.normalization()
    }

    /// Half-width of the quantization cell, `v_th·2^P / (2^T - 1)`.
    pub fn quantization_bound(&self) -> f64 {
        self.v_th * pow2(self.precharge) / self.normalization()
    }
}

/// Drives a TMN with the constant current `a` for all `T` steps.
pub fn encode_constant(a: f64, cfg: &TmnConfig) -> Result<SpikeTrain> {
    Ok(encode_constant_with_residual(a, cfg)?.0)
}

/// Like [`encode_constant`], also returning the final membrane `u[T]`.
pub fn encode_constant_with_residual(a: f64, cfg: &TmnConfig) -> Result<(SpikeTrain, f64)> {
    if !a.is_finite() {
        return Err(Error::config(format!("cannot encode {a}")));
    }
    tmn_run(&vec![a; cfg.horizon], cfg)
}

/// Exhaustive search over all `3^(T-P)` ternary words for the one whose
/// decode is closest to `a`. Ties go to the word with fewest nonzero
/// spikes, then to the lexicographically first (`-1 < 0 < +1`).
pub fn optimal_ternary_code(a: f64, codec: &CssCodec) -> Result<(SpikeTrain, f64)> {
    let free = codec.horizon - codec.precharge;
    if free > EXHAUSTIVE_MAX_STEPS {
        return Err(Error::Bound(format!(
            "{free} free steps exceeds the exhaustive limit of {EXHAUSTIVE_MAX_STEPS}"
        )));
    }
    let mut word = vec![-1 as Spike; free];
    let mut spikes = vec![0 as Spike; codec.horizon];
    let mut best: Option<(f64, usize, Vec<Spike>)> = None;
    // Odometer over {-1,0,1}^free in lexicographic order.
    loop {
        spikes[codec.precharge..].copy_from_slice(&word);
        let err = (a - codec.decode_spikes(&spikes)).abs();
        let nnz = word.iter().filter(|&&s| s != 0).count();
        let better = match &best {
            None => true,
            Some((e, n, _)) => err < *e || (err == *e && nnz < *n),
        };
        if better {
            best = Some((err, nnz, spikes.clone()));
        }
        let mut i = free;
        loop {
            if i == 0 {
                let (err, _, spikes) = best.expect("at least one word visited");
                let train = SpikeTrain::new(spikes, codec.v_th, codec.precharge)?;
                return Ok((train, err));
            }
            i -= 1;
            if word[i] < 1 {
                word[i] += 1;
                break;
            }
            word[i] = -1;
        }
    }
}

/// Binary spike train produced by the IF baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTrain {
    pub spikes: Vec<bool>,
    pub v_th: f64,
}

impl RateTrain {
    pub fn count(&self) -> usize {
        self.spikes.iter().filter(|&&s| s).count()
    }
}

/// Drives an IF neuron with constant current `a` for `horizon` steps.
pub fn rate_encode(a: f64, v_th: f64, horizon: usize) -> RateTrain {
    let mut n = IfState::default();
    RateTrain {
        spikes: (0..horizon).map(|_| n.step(a, v_th)).collect(),
        v_th,
    }
}

/// `v_th · count / T`.
pub fn rate_decode(train: &RateTrain) -> f64 {
    if train.spikes.is_empty() {
        return 0.0;
    }
    train.v_th * train.count() as f64 / train.spikes.len() as f64
}
