//! Encoding error of CSS and rate codes, on scalar samples and layer by
//! layer through a converted network.

use rand::distributions::{Distribution, Uniform};
use serde::Serialize;

use super::theory::trial_rng;
use crate::conversion::{CalibrationResult, Coding, GateMode, NetworkSpec, SnnConfig};
use crate::encoding::{encode_constant, rate_decode, rate_encode, CssCodec};
use crate::error::{Error, Result};
use crate::neuron::{SpikeTrain, TmnConfig, TmnState};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseRow {
    pub coding: Coding,
    pub horizon: usize,
    pub precharge: usize,
    pub samples: usize,
    pub mse: f64,
}

/// Uniform `[0, v_th)` samples shared by every codec.
pub fn uniform_samples(n: usize, v_th: f64, seed: u64) -> Vec<f64> {
    if n == 0 || v_th <= 0.0 {
        return vec![0.0; n];
    }
    let mut rng = trial_rng(seed, 0);
    let d = Uniform::new(0.0, v_th);
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

/// MSE of `decode(encode(a))` under CSS with `α = ½` and pre-charge `P`.
pub fn css_mse(samples: &[f64], v_th: f64, horizon: usize, precharge: usize) -> Result<f64> {
    let cfg = TmnConfig::new(v_th, horizon).with_precharge(precharge);
    let codec = CssCodec::from_config(&cfg);
    let mut acc = 0.0;
    for &a in samples {
        let d = codec.decode(&encode_constant(a, &cfg)?)?;
        acc += (a - d) * (a - d);
    }
    Ok(acc / samples.len().max(1) as f64)
}

/// MSE of `decode(encode(a))` under rate coding over `horizon` steps.
pub fn rate_mse(samples: &[f64], v_th: f64, horizon: usize) -> f64 {
    let acc: f64 = samples
        .iter()
        .map(|&a| {
            let d = rate_decode(&rate_encode(a, v_th, horizon));
            (a - d) * (a - d)
        })
        .sum();
    acc / samples.len().max(1) as f64
}

/// One row per CSS horizon and per rate horizon, on the same samples.
pub fn encoding_error_curve(
    css_horizons: &[usize],
    rate_horizons: &[usize],
    precharge: usize,
    samples: &[f64],
    v_th: f64,
) -> Result<Vec<MseRow>> {
    let mut rows = Vec::new();
    for &t in css_horizons {
        rows.push(MseRow {
            coding: Coding::Css,
            horizon: t,
            precharge,
            samples: samples.len(),
            mse: css_mse(samples, v_th, t, precharge)?,
        });
    }
    for &t in rate_horizons {
        if t == 0 {
            return Err(Error::config("rate horizon must be at least 1"));
        }
        rows.push(MseRow {
            coding: Coding::Rate,
            horizon: t,
            precharge: 0,
            samples: samples.len(),
            mse: rate_mse(samples, v_th, t),
        });
    }
    Ok(rows)
}

/// A grid point whose round-trip error exceeds the quantization bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTripException {
    pub a: f64,
    pub decoded: f64,
    pub error: f64,
    /// Largest `|û|` seen while encoding, in units of `v_th`.
    pub max_u_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTripSummary {
    pub horizon: usize,
    pub precharge: usize,
    pub points: usize,
    pub bound: f64,
    pub within: usize,
    pub max_error: f64,
    pub exceptions: Vec<RoundTripException>,
}

impl RoundTripSummary {
    pub fn fraction_within(&self) -> f64 {
        self.within as f64 / self.points as f64
    }
}

/// Encodes `a = i·v_th/points` for `i = 0..points` (the grid over
/// `[0, v_th)`) and checks each error against `v_th·2^P/(2^T - 1)`.
pub fn round_trip_grid(
    v_th: f64,
    horizon: usize,
    precharge: usize,
    points: usize,
) -> Result<RoundTripSummary> {
    let cfg = TmnConfig::new(v_th, horizon).with_precharge(precharge);
    cfg.validate()?;
    let codec = CssCodec::from_config(&cfg);
    let bound = codec.quantization_bound();
    let mut out = RoundTripSummary {
        horizon,
        precharge,
        points,
        bound,
        within: 0,
        max_error: 0.0,
        exceptions: Vec::new(),
    };
    for i in 0..points {
        let a = v_th * i as f64 / points as f64;
        let mut st = TmnState::new();
        let mut spikes = Vec::with_capacity(horizon);
        let mut max_u_hat: f64 = 0.0;
        for _ in 0..horizon {
            max_u_hat = max_u_hat.max((2.0 * st.u + a).abs());
            spikes.push(st.step(a, &cfg)?);
        }
        let decoded = codec.decode(&SpikeTrain::new(spikes, v_th, precharge)?)?;
        let error = (a - decoded).abs();
        out.max_error = out.max_error.max(error);
        // Relative slack for the rounding of the decode sum.
        if error <= bound * (1.0 + 1e-12) {
            out.within += 1;
        } else {
            out.exceptions.push(RoundTripException {
                a,
                decoded,
                error,
                max_u_hat: max_u_hat / v_th,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerMseRow {
    pub relu_layer: usize,
    pub coding: Coding,
    pub horizon: usize,
    pub precharge: usize,
    pub v_th: f64,
    pub values: usize,
    pub mse: f64,
    /// Per-value quantization half-width of the code.
    pub bound: f64,
}

/// Teacher-forced error per ReLU layer: each neuron is driven by the exact
/// ANN pre-activation as a constant current, and its decoded output is
/// compared with the ANN's post-ReLU value.
pub fn layerwise_mse(
    spec: &NetworkSpec,
    calib: &CalibrationResult,
    inputs: &[Tensor],
    cfg: SnnConfig,
) -> Result<Vec<LayerMseRow>> {
    cfg.validate()?;
    let relus = spec.relu_indices();
    let mut sums = vec![(0.0, 0usize); relus.len()];
    let mut thresholds = Vec::with_capacity(relus.len());
    for &l in &relus {
        thresholds.push(
            calib.threshold(l).ok_or_else(|| {
                Error::config(format!("no calibrated threshold for relu layer {l}"))
            })?,
        );
    }
    for x in inputs {
        let outs = spec.forward_trace(x)?;
        for (k, &l) in relus.iter().enumerate() {
            let pre = if l == 0 { x } else { &outs[l - 1] };
            let v_th = thresholds[k];
            for &a in pre.data() {
                let d = match cfg.coding {
                    Coding::Css => {
                        let n = cfg.neuron(v_th);
                        let train = encode_constant(a, &n)?;
                        let negative = train.first_nonzero() == Some(-1);
                        if negative && cfg.gate == GateMode::PostFilter {
                            0.0
                        } else {
                            CssCodec::from_config(&n).decode(&train)?
                        }
                    }
                    Coding::Rate => rate_decode(&rate_encode(a, v_th, cfg.horizon)),
                };
                let r = a.max(0.0);
                sums[k].0 += (r - d) * (r - d);
                sums[k].1 += 1;
            }
        }
    }
    Ok(relus
        .iter()
        .zip(sums)
        .zip(&thresholds)
        .map(|((&l, (s, n)), &v_th)| LayerMseRow {
            relu_layer: l,
            coding: cfg.coding,
            horizon: cfg.horizon,
            precharge: cfg.precharge,
            v_th,
            values: n,
            mse: s / n.max(1) as f64,
            bound: match cfg.coding {
                Coding::Css => CssCodec::from_config(&cfg.neuron(v_th)).quantization_bound(),
                Coding::Rate => v_th / cfg.horizon as f64,
            },
        })
        .collect())
}
