//! Monte Carlo checks of the membrane identity and of residual statistics
//! across predictive threshold ratios.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{direct_weighted_integrate, pow2, tmn_forward, TmnConfig, TmnState};
use crate::tensor::Tensor;

/// Distribution of the i.i.d. input currents `z[t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDist {
    /// Uniform on `[lo, hi)`; `lo == hi` is the constant `lo`.
    Uniform { lo: f64, hi: f64 },
}

impl InputDist {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::config(format!("bad uniform range [{lo}, {hi})")));
        }
        Ok(InputDist::Uniform { lo, hi })
    }

    /// Draws `n` values from the stream dedicated to `trial`.
    pub fn sample_trial(&self, seed: u64, trial: u64, n: usize) -> Vec<f64> {
        let InputDist::Uniform { lo, hi } = *self;
        if lo == hi {
            return vec![lo; n];
        }
        let mut rng = trial_rng(seed, trial);
        let d = Uniform::new(lo, hi);
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }
}

/// Independent random stream for one trial, so results do not depend on
/// evaluation order.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub trials: usize,
    pub horizon: usize,
    /// Largest `|u[T] - direct|` over the trials, divided by the kernel
    /// mass `Σ 2^(T-t) (|z[t]| + r·|s[t]|)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

const CHUNK: usize = 4096;

/// Compares the recurrent final membrane against the closed-form weighted
/// sum over replayed spike decisions (`α = ½`, no pre-charge, unit scale).
pub fn check_membrane_identity(
    trials: usize,
    horizon: usize,
    dist: InputDist,
    seed: u64,
) -> Result<IdentityCheck> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let cfg = TmnConfig::new(1.0, horizon);
    cfg.validate()?;
    let reset = cfg.reset_amount();
    let mut out = IdentityCheck {
        trials,
        horizon,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
    };
    for start in (0..trials).step_by(CHUNK) {
        let seqs: Vec<Vec<f64>> = (start..trials.min(start + CHUNK))
            .map(|i| dist.sample_trial(seed, i as u64, horizon))
            .collect();
        let frames = (0..horizon)
            .map(|t| Tensor::vector(seqs.iter().map(|s| s[t]).collect()))
            .collect::<Result<Vec<_>>>()?;
        let run = tmn_forward(&frames, &cfg)?;
        for (i, z) in seqs.iter().enumerate() {
            let decisions: Vec<_> = run.spikes.steps.iter().map(|s| s[i]).collect();
            let direct = direct_weighted_integrate(z, reset, &decisions)?;
            let u = run.residuals.data()[i];
            let mass: f64 = z
                .iter()
                .zip(&decisions)
                .enumerate()
                .map(|(t, (&zt, &s))| {
                    pow2(horizon - 1 - t) * (zt.abs() + reset * f64::from(s.abs()))
                })
                .sum();
            let abs = (u - direct).abs();
            out.max_abs_error = out.max_abs_error.max(abs);
            if mass > 0.0 {
                out.max_rel_error = out.max_rel_error.max(abs / mass);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMoments {
    /// One-based step.
    pub step: usize,
    pub mean: f64,
    pub mean_sq: f64,
}

/// Fixed-range histogram; out-of-range samples land in the edge bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Histogram {
            lo,
            hi,
            counts: vec![0; bins.max(1)],
        }
    }

    pub fn add(&mut self, x: f64) {
        let n = self.counts.len();
        let pos = (x - self.lo) / (self.hi - self.lo) * n as f64;
        let bin = if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(n - 1)
        };
        self.counts[bin] += 1;
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub const RESIDUAL_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub alpha: f64,
    pub n: usize,
    /// Mean of `u[T]`.
    pub mean: f64,
    /// Mean of `u[T]²`.
    pub mean_sq: f64,
    /// Standard error of `mean`.
    pub stderr: f64,
    pub per_step: Vec<StepMoments>,
    /// `u[T]` over `[-2·v_th, 2·v_th]`.
    pub histogram: Histogram,
}

/// Residual membrane statistics for each `α`, ungated and without
/// pre-charge. Every `α` sees the same input sequences.
pub fn residual_sweep(
    alphas: &[f64],
    trials: usize,
    horizon: usize,
    v_th: f64,
    dist: InputDist,
    seed: u64,
) -> Result<Vec<ResidualStats>> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let mut out = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let cfg = TmnConfig::new(v_th, horizon).with_alpha(alpha);
        cfg.validate()?;
        let mut sum = vec![0.0; horizon];
        let mut sum_sq = vec![0.0; horizon];
        let mut hist = Histogram::new(-2.0 * v_th, 2.0 * v_th, RESIDUAL_BINS);
        for trial in 0..trials {
            let z = dist.sample_trial(seed, trial as u64, horizon);
            let mut st = TmnState::new();
            for (t, &zt) in z.iter().enumerate() {
                st.step(zt, &cfg)?;
                sum[t] += st.u;
                sum_sq[t] += st.u * st.u;
            }
            hist.add(st.u);
        }
        let n = trials as f64;
        let per_step: Vec<StepMoments> = (0..horizon)
            .map(|t| StepMoments {
                step: t + 1,
                mean: sum[t] / n,
                mean_sq: sum_sq[t] / n,
            })
            .collect();
        let last = per_step[horizon - 1];
        let var = if trials > 1 {
            (last.mean_sq - last.mean * last.mean).max(0.0) * n / (n - 1.0)
        } else {
            0.0
        };
        out.push(ResidualStats {
            alpha,
            n: trials,
            mean: last.mean,
            mean_sq: last.mean_sq,
            stderr: (var / n).sqrt(),
            per_step,
            histogram: hist,
        });
    }
    Ok(out)
}

/// The two residual claims evaluated on a sweep that contains `α = ½`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualVerdict {
    /// `|mean(u[T])| / stderr` at `α = ½`.
    pub mean_z_score: f64,
    pub mean_within_3se: bool,
    /// Smallest `mean(u[T]²)` among the other `α`.
    pub best_other_mean_sq: f64,
    pub half_is_minimal: bool,
}

pub fn residual_verdict(stats: &[ResidualStats]) -> Option<ResidualVerdict> {
    let half = stats.iter().find(|s| s.alpha == 0.5)?;
    let z = if half.stderr > 0.0 {
        half.mean.abs() / half.stderr
    } else if half.mean == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let best_other = stats
        .iter()
        .filter(|s| s.alpha != 0.5)
        .map(|s| s.mean_sq)
        .fold(f64::INFINITY, f64::min);
    Some(ResidualVerdict {
        mean_z_score: z,
        mean_within_3se: z <= 3.0,
        best_other_mean_sq: best_other,
        half_is_minimal: half.mean_sq < best_other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sequences_have_zero_error() {
        let r = check_membrane_identity(100, 8, InputDist::uniform(0.0, 0.0).unwrap(), 1).unwrap();
        assert_eq!((r.max_rel_error, r.max_abs_error), (0.0, 0.0));
    }

    #[test]
    fn single_step_is_exact() {
        let r =
            check_membrane_identity(1000, 1, InputDist::uniform(-1.0, 1.0).unwrap(), 2).unwrap();
        assert_eq!(r.max_abs_error, 0.0);
    }

    #[test]
    fn identity_holds_on_random_sequences() {
        let r =
            check_membrane_identity(5000, 16, InputDist::uniform(-1.0, 1.0).unwrap(), 3).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert!(check_membrane_identity(0, 4, InputDist::uniform(0.0, 1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn trial_streams_are_order_independent() {
        let d = InputDist::uniform(0.0, 1.0).unwrap();
        assert_eq!(d.sample_trial(9, 5, 4), d.sample_trial(9, 5, 4));
        assert_ne!(d.sample_trial(9, 5, 4), d.sample_trial(9, 6, 4));
    }

    #[test]
    fn zero_input_gives_zero_residuals() {
        let d = InputDist::uniform(0.0, 0.0).unwrap();
        for s in residual_sweep(&[0.3, 0.5, 0.7], 50, 8, 1.0, d, 0).unwrap() {
            assert_eq!((s.mean, s.mean_sq, s.stderr), (0.0, 0.0, 0.0));
            assert_eq!(s.histogram.total(), 50);
        }
    }

    #[test]
    fn first_step_moments_match_closed_form() {
        // u[1] = z - v·[z >= αv] for z ~ U(0, v):
        //   E u = v(α - ½),  E u² = v²(α³ + (1 - α)³)/3.
        let d = InputDist::uniform(0.0, 2.0).unwrap();
        for s in residual_sweep(&[0.3, 0.5, 0.7], 200_000, 1, 2.0, d, 4).unwrap() {
            let a = s.alpha;
            let mean = 2.0 * (a - 0.5);
            let msq = 4.0 * (a.powi(3) + (1.0 - a).powi(3)) / 3.0;
            assert!(
                (s.mean - mean).abs() < 4.0 * s.stderr,
                "{a}: {} vs {mean}",
                s.mean
            );
            assert!(
                (s.mean_sq - msq).abs() < 0.01,
                "{a}: {} vs {msq}",
                s.mean_sq
            );
        }
    }

    #[test]
    fn centered_inputs_keep_half_optimal_at_every_step() {
        // With z ~ U(-v/2, v/2) the doubled residual never leaves the
        // reachable range, so the per-step argument applies at every t.
        let d = InputDist::uniform(-0.5, 0.5).unwrap();
        let stats = residual_sweep(&[0.3, 0.4, 0.5, 0.6, 0.7], 50_000, 8, 1.0, d, 5).unwrap();
        let v = residual_verdict(&stats).unwrap();
        assert!(v.mean_within_3se && v.half_is_minimal, "{v:?}");
    }

    #[test]
    fn histogram_clamps_and_counts() {
        let mut h = Histogram::new(-2.0, 2.0, 4);
        for x in [-9.0, -2.0, -0.1, 0.0, 1.99, 2.0, 50.0] {
            h.add(x);
        }
        assert_eq!(h.counts, vec![2, 1, 1, 3]);
        assert_eq!(h.bin_edges(1), (-1.0, 0.0));
    }
}
