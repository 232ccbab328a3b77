//! Fixed-point TMN on a `W`-bit two's complement membrane register.
//!
//! The doubling `2u` is a left shift by one bit: the low bits of the register
//! feed the high bits of the adder. With `α = ½` every comparison reduces to
//! integer arithmetic. Out-of-range values saturate and latch a flag instead
//! of wrapping.

use serde::{Deserialize, Serialize};

use super::{Spike, SpikeTrain, TmnConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointParams {
    /// Fractional bits `F`.
    pub frac_bits: u32,
    /// Register width `W`, sign bit included.
    pub word_bits: u32,
}

impl FixedPointParams {
    pub fn new(frac_bits: u32, word_bits: u32) -> Result<Self> {
        if word_bits > 63 {
            return Err(Error::config("word_bits above 63 is not supported"));
        }
        if word_bits <= frac_bits + 2 {
            return Err(Error::config(format!(
                "word_bits {word_bits} must exceed frac_bits {frac_bits} + 2"
            )));
        }
        Ok(FixedPointParams {
            frac_bits,
            word_bits,
        })
    }

    pub fn max(&self) -> i64 {
        (1i64 << (self.word_bits - 1)) - 1
    }

    pub fn min(&self) -> i64 {
        -(1i64 << (self.word_bits - 1))
    }

    pub fn one(&self) -> i64 {
        1i64 << self.frac_bits
    }

    /// Nearest representable value, in register units.
    pub fn quantize(&self, x: f64) -> Result<i64> {
        let q = (x * self.one() as f64).round();
        if !q.is_finite() || q > self.max() as f64 || q < self.min() as f64 {
            return Err(Error::config(format!(
                "{x} is not representable in Q{}.{}",
                self.word_bits - self.frac_bits,
                self.frac_bits
            )));
        }
        Ok(q as i64)
    }

    pub fn to_real(&self, v: i64) -> f64 {
        v as f64 / self.one() as f64
    }

    /// True when `x` is an exact multiple of `2^-F` inside the register range.
    pub fn is_exact(&self, x: f64) -> bool {
        self.quantize(x)
            .map(|q| self.to_real(q) == x)
            .unwrap_or(false)
    }

    fn clamp(&self, v: i128, saturated: &mut bool) -> i64 {
        if v > self.max() as i128 {
            *saturated = true;
            self.max()
        } else if v < self.min() as i128 {
            *saturated = true;
            self.min()
        } else {
            v as i64
        }
    }
}

/// A TMN configuration lowered to register units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedTmn {
    pub cfg: TmnConfig,
    pub params: FixedPointParams,
    /// `v_th` in register units.
    pub v_fx: i64,
    /// `2^P · v_fx`.
    pub reset_fx: i64,
    /// Twice the predictive threshold, `round(2α · reset_fx)`; exact for `α = ½`.
    pub threshold_x2: i64,
}

impl FixedTmn {
    pub fn new(cfg: TmnConfig, params: FixedPointParams) -> Result<Self> {
        cfg.validate()?;
        let v_fx = params.quantize(cfg.v_th)?;
        if v_fx <= 0 {
            return Err(Error::config("v_th quantizes to zero"));
        }
        let reset_fx = v_fx
            .checked_shl(cfg.precharge as u32)
            .filter(|r| r.checked_mul(4).is_some_and(|r4| r4 <= params.max()))
            .ok_or_else(|| {
                Error::config(format!(
                    "register of {} bits cannot hold ±4·2^P·v_th",
                    params.word_bits
                ))
            })?;
        let threshold_x2 = (2.0 * cfg.alpha * reset_fx as f64).round() as i64;
        Ok(FixedTmn {
            cfg,
            params,
            v_fx,
            reset_fx,
            threshold_x2,
        })
    }

    pub fn run(&self, z_fx: &[i64]) -> Result<FixedRun> {
        if z_fx.len() != self.cfg.horizon {
            return Err(Error::shape(format!(
                "expected {} inputs, got {}",
                self.cfg.horizon,
                z_fx.len()
            )));
        }
        let mut state = FixedTmnState::default();
        let spikes = z_fx
            .iter()
            .map(|&z| state.step(z, self))
            .collect::<Result<Vec<_>>>()?;
        Ok(FixedRun {
            train: SpikeTrain {
                spikes,
                v_th: self.cfg.v_th,
                precharge: self.cfg.precharge,
            },
            u_fx: state.u,
            saturated: state.saturated,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedRun {
    pub train: SpikeTrain,
    pub u_fx: i64,
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FixedTmnState {
    pub u: i64,
    pub t: usize,
    pub fired_positive: bool,
    /// Latched on the first saturating operation.
    pub saturated: bool,
}

impl FixedTmnState {
    pub fn step(&mut self, z_fx: i64, neuron: &FixedTmn) -> Result<Spike> {
        let p = &neuron.params;
        let cfg = &neuron.cfg;
        if self.t >= cfg.horizon {
            return Err(Error::State(format!(
                "stepping past the horizon T={}",
                cfg.horizon
            )));
        }
        if z_fx > p.max() || z_fx < p.min() {
            return Err(Error::config(format!(
                "input {z_fx} does not fit a {}-bit register",
                p.word_bits
            )));
        }
        let shifted = p.clamp((self.u as i128) << 1, &mut self.saturated);
        let u_hat = p.clamp(shifted as i128 + z_fx as i128, &mut self.saturated);
        self.t += 1;
        if self.t <= cfg.precharge {
            self.u = u_hat;
            return Ok(0);
        }
        let twice = 2 * u_hat as i128;
        let thr = neuron.threshold_x2 as i128;
        let s: Spike = if twice >= thr {
            1
        } else if twice <= -thr {
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
        self.u = p.clamp(
            u_hat as i128 - neuron.reset_fx as i128 * s as i128,
            &mut self.saturated,
        );
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::tmn_run;
    use proptest::prelude::*;

    #[test]
    fn params_validation() {
        assert!(FixedPointParams::new(12, 14).is_err());
        assert!(FixedPointParams::new(12, 15).is_ok());
        assert!(FixedPointParams::new(12, 64).is_err());
        // 4·v_th must fit: Q2.8 in 11 bits tops out just under 4.
        let p = FixedPointParams::new(8, 11).unwrap();
        assert!(FixedTmn::new(TmnConfig::new(1.0, 3), p).is_err());
        let p = FixedPointParams::new(8, 12).unwrap();
        assert!(FixedTmn::new(TmnConfig::new(1.0, 3), p).is_ok());
    }

    #[test]
    fn zero_input_only_shifts_zero() {
        let p = FixedPointParams::new(8, 16).unwrap();
        let n = FixedTmn::new(TmnConfig::new(1.0, 4), p).unwrap();
        let run = n.run(&[0; 4]).unwrap();
        assert_eq!(run.train.spikes, vec![0; 4]);
        assert_eq!(run.u_fx, 0);
        assert!(!run.saturated);
    }

    #[test]
    fn q8_example_matches_float_trace() {
        let p = FixedPointParams::new(8, 16).unwrap();
        let n = FixedTmn::new(TmnConfig::new(1.0, 3), p).unwrap();
        assert_eq!(n.v_fx, 256);
        assert_eq!(p.quantize(0.6).unwrap(), 154);
        let run = n.run(&[154; 3]).unwrap();
        assert_eq!(run.train.spikes, vec![1, 0, 0]);
        // Hand trace: 154 -> -102; -204+154=-50; -100+154=54.
        assert_eq!(run.u_fx, 54);
        let (float, _) = tmn_run(&[0.6; 3], &TmnConfig::new(1.0, 3)).unwrap();
        assert_eq!(float.spikes, run.train.spikes);
    }

    #[test]
    fn overflow_saturates_and_flags() {
        let p = FixedPointParams::new(4, 8).unwrap();
        let n = FixedTmn::new(TmnConfig::new(1.0, 6).with_alpha(1.0), p).unwrap();
        // 7.9 per step runs away far beyond the ±8 range of Q4.4.
        let z = p.quantize(7.9).unwrap();
        let run = n.run(&[z; 6]).unwrap();
        assert!(run.saturated);
        assert!(run.u_fx <= p.max());
    }

    #[test]
    fn input_must_fit_register() {
        let p = FixedPointParams::new(4, 8).unwrap();
        let n = FixedTmn::new(TmnConfig::new(1.0, 2), p).unwrap();
        assert!(n.run(&[1000, 0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_float_path_on_exact_inputs(
            raw in prop::collection::vec(-4096i64..4096, 1..14),
            p in 0usize..3,
            gate: bool,
        ) {
            let params = FixedPointParams::new(12, 40).unwrap();
            let p = p.min(raw.len() - 1);
            let cfg = TmnConfig::new(1.0, raw.len()).with_precharge(p).with_gate(gate);
            let n = FixedTmn::new(cfg, params).unwrap();
            let fx = n.run(&raw).unwrap();
            prop_assume!(!fx.saturated);
            let z: Vec<f64> = raw.iter().map(|&q| params.to_real(q)).collect();
            let (float, u) = tmn_run(&z, &cfg).unwrap();
            prop_assert_eq!(&fx.train.spikes, &float.spikes);
            prop_assert_eq!(params.to_real(fx.u_fx), u);
        }
    }
}
