//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::distributions::{Distribution, Uniform};
use tmn::analysis::mse::{css_mse, rate_mse, uniform_samples};
use tmn::analysis::theory::trial_rng;
use tmn::analysis::*;
use tmn::conversion::*;
use tmn::encoding::CssCodec;
use tmn::neuron::fixed::{FixedPointParams, FixedTmn};
use tmn::neuron::{tmn_run, TmnConfig};
use tmn::{Spike, Tensor};

const SEED: u64 = 20240;

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!(
        "{}; {:.2}s (limit {}s)",
        o.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    if took > limit {
        o.pass = false;
        o.detail.push_str(" TIME LIMIT EXCEEDED");
    }
    o
}

fn c1_identity() -> Outcome {
    let dist = InputDist::uniform(-1.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for t in [2, 4, 8, 16] {
        let r = check_membrane_identity(10_000, t, dist, SEED).unwrap();
        notes.push(format!(
            "T={t}: max rel {:.3e}, max abs {:.3e}",
            r.max_rel_error, r.max_abs_error
        ));
        worst = worst.max(r.max_rel_error);
    }
    Outcome {
        pass: worst < 1e-9,
        detail: format!("max relative error {worst:.3e} over 4x10^4 sequences (< 1e-9)"),
        notes,
    }
}

fn c2_residual() -> Outcome {
    let dist = InputDist::uniform(0.0, 1.0).unwrap();
    let alphas = [0.3, 0.4, 0.5, 0.6, 0.7];
    let stats = residual_sweep(&alphas, 100_000, 8, 1.0, dist, SEED).unwrap();
    let v = residual_verdict(&stats).unwrap();
    let notes = stats
        .iter()
        .map(|s| {
            format!(
                "alpha={}: mean {:.4} (se {:.4}), mean sq {:.4}",
                s.alpha, s.mean, s.stderr, s.mean_sq
            )
        })
        .collect();
    Outcome {
        pass: v.mean_within_3se && v.half_is_minimal,
        detail: format!(
            "(a) |mean|/se at 1/2 = {:.1} (<= 3: {}); (b) mean sq at 1/2 minimal: {} (best other {:.4})",
            v.mean_z_score, v.mean_within_3se, v.half_is_minimal, v.best_other_mean_sq
        ),
        notes,
    }
}

fn c3_css_vs_rate() -> Outcome {
    let samples = uniform_samples(100_000, 1.0, SEED);
    let mut pass = true;
    let mut notes = Vec::new();
    for t in 2..=6 {
        let css = css_mse(&samples, 1.0, t, 0).unwrap();
        let rate = rate_mse(&samples, 1.0, 1 << t);
        pass &= css <= rate;
        notes.push(format!(
            "T={t}: css {css:.3e} vs rate({}) {rate:.3e}, ratio {:.3}",
            1 << t,
            css / rate
        ));
    }
    Outcome {
        pass,
        detail: "CSS(T) MSE <= rate(2^T) MSE for T in 2..=6, alpha=1/2, P=0, 10^5 samples".into(),
        notes,
    }
}

fn c4_round_trip() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let mut worst_fraction: f64 = 1.0;
    for p in [0, 1] {
        for t in 3..=8 {
            let r = round_trip_grid(1.0, t, p, 10_000).unwrap();
            let f = r.fraction_within();
            worst_fraction = worst_fraction.min(f);
            pass &= f >= 0.999;
            let worst_u = r.exceptions.iter().map(|e| e.max_u_hat).fold(0.0, f64::max);
            let least_u = r
                .exceptions
                .iter()
                .map(|e| e.max_u_hat)
                .fold(f64::INFINITY, f64::min);
            let mut line = format!(
                "P={p} T={t}: {}/{} within {:.4e}",
                r.within, r.points, r.bound
            );
            if !r.exceptions.is_empty() {
                line.push_str(&format!(
                    "; {} exceptions, max error {:.4}, |u_hat|/v_th in [{least_u:.3}, {worst_u:.3}], first at a={:.4}",
                    r.exceptions.len(),
                    r.max_error,
                    r.exceptions[0].a
                ));
            }
            notes.push(line);
        }
    }
    Outcome {
        pass,
        detail: format!(
            "worst cell within bound on {:.2}% of the grid (>= 99.9%)",
            100.0 * worst_fraction
        ),
        notes,
    }
}

fn c5_fidelity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, need) in [("mlp", 0.99), ("cnn", 0.98)] {
        let fx = common::fixture(name);
        let e = evaluate(
            &fx.net,
            &fx.calib,
            &fx.test,
            SnnConfig::css(8, 1, 0.5),
            EnergyConstants::default(),
        )
        .unwrap();
        pass &= e.agreement >= need;
        parts.push(format!("{name} agreement {:.4} (>= {need})", e.agreement));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
        notes: Vec::new(),
    }
}

fn c6_ablation() -> Outcome {
    let fx = common::fixture("cnn");
    let rows =
        ablation_precharge(&fx.net, &fx.calib, &fx.test, 8, &[0, 1, 2], &[true, false]).unwrap();
    let cell = |p: usize, tps: bool| {
        rows.iter()
            .find(|r| r.precharge == p && r.tps == tps)
            .unwrap()
    };
    let (on, off) = (cell(1, true), cell(1, false));
    let acc_ok = on.accuracy >= off.accuracy;
    let ac_ok = on.ac_count >= off.ac_count;
    let notes = rows
        .iter()
        .map(|r| {
            format!(
                "P={} tps={}: accuracy {:.4}, ACs {}",
                r.precharge,
                r.tps,
                r.accuracy.unwrap(),
                r.ac_count
            )
        })
        .collect();
    Outcome {
        pass: acc_ok && ac_ok,
        detail: format!(
            "P=1 accuracy on {:.4} >= off {:.4}: {acc_ok}; ACs on {} >= off {}: {ac_ok}",
            on.accuracy.unwrap(),
            off.accuracy.unwrap(),
            on.ac_count,
            off.ac_count
        ),
        notes,
    }
}

fn c7_fixed_point() -> Outcome {
    let params = FixedPointParams::new(12, 40).unwrap();
    let cfg = TmnConfig::new(1.0, 8);
    let neuron = FixedTmn::new(cfg, params).unwrap();
    let (mut same, mut saturated) = (0, 0);
    let d = Uniform::new_inclusive(-4096i64, 4096);
    for trial in 0..10_000u64 {
        let mut rng = trial_rng(SEED, trial);
        let z_fx: Vec<i64> = (0..8).map(|_| d.sample(&mut rng)).collect();
        let z: Vec<f64> = z_fx.iter().map(|&q| q as f64 / 4096.0).collect();
        let fixed = neuron.run(&z_fx).unwrap();
        let (float, _) = tmn_run(&z, &cfg).unwrap();
        saturated += usize::from(fixed.saturated);
        same += usize::from(fixed.train.spikes == float.spikes);
    }
    Outcome {
        pass: same == 10_000 && saturated == 0,
        detail: format!("{same}/10000 identical trains, {saturated} saturated (F=12, W=40, T=8)"),
        notes: Vec::new(),
    }
}

fn decode(spikes: &[Spike], cfg: &TmnConfig) -> f64 {
    CssCodec::from_config(cfg).decode_spikes(spikes)
}

fn c8_gate() -> Outcome {
    let latch = TmnConfig::new(1.0, 8).with_gate(true);
    let plain = TmnConfig::new(1.0, 8);
    let (mut negative, mut sign_class_mismatch, mut strict_mismatch) = (0, 0, 0);
    let d = Uniform::new(-1.0, 1.0);
    for trial in 0..10_000u64 {
        let mut rng = trial_rng(SEED, trial);
        let z: Vec<f64> = (0..8).map(|_| d.sample(&mut rng)).collect();
        let (l, _) = tmn_run(&z, &latch).unwrap();
        let (p, _) = tmn_run(&z, &plain).unwrap();
        let filtered = &zero_negative_sequences(&[p])[0];
        let (dl, df) = (decode(&l.spikes, &latch), decode(&filtered.spikes, &plain));
        negative += usize::from(dl < 0.0) + usize::from(df < 0.0);
        sign_class_mismatch += usize::from((dl >= 0.0) != (df >= 0.0));
        strict_mismatch += usize::from((dl > 0.0) != (df > 0.0));
    }
    // Gated layers inside the converted MLP.
    let fx = common::fixture("mlp");
    let mut layer_negative = 0;
    for gate in [GateMode::PostFilter, GateMode::OnlineLatch] {
        let model = convert(
            &fx.net,
            &fx.calib,
            SnnConfig::css(8, 1, 0.5).with_gate(gate),
        )
        .unwrap();
        for (x, _) in fx.test.samples() {
            let (_, trace) = snn_forward(&model, x).unwrap();
            for st in &trace.stages {
                if let (Some(s), Some(v)) = (&st.spikes, st.v_th) {
                    let codec = CssCodec::new(v, 8, 1).unwrap();
                    layer_negative += (0..s.numel())
                        .filter(|&i| codec.decode(&s.train(i, v, 1)).unwrap() < 0.0)
                        .count();
                }
            }
        }
    }
    Outcome {
        pass: negative == 0 && sign_class_mismatch == 0 && layer_negative == 0,
        detail: format!(
            "{negative} negative decodes on 10^4 sequences, {layer_negative} in MLP layers; \
             sign (>= 0) disagreements {sign_class_mismatch}"
        ),
        notes: vec![format!(
            "latch positive while post-filter zero (or vice versa) on {strict_mismatch}/10000 sequences"
        )],
    }
}

/// Fan-out of every stage input, measured by pushing a unit impulse through
/// the stage with all-ones weights and counting the nonzero outputs.
fn probe_fan_out(stage: &Stage) -> Vec<u64> {
    let ones: Vec<Layer> = stage
        .ops
        .iter()
        .map(|l| match l {
            Layer::Dense { weights, bias } => Layer::Dense {
                weights: weights.map(|_| 1.0),
                bias: bias.map(|_| 0.0),
            },
            Layer::Conv2d {
                weights,
                bias,
                stride,
                pad,
            } => Layer::Conv2d {
                weights: weights.map(|_| 1.0),
                bias: bias.map(|_| 0.0),
                stride: *stride,
                pad: *pad,
            },
            other => other.clone(),
        })
        .collect();
    let n: usize = stage.input_shape.iter().product();
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let mut x = Tensor::new(stage.input_shape.clone(), e).unwrap();
            for l in &ones {
                x = l.apply(&x).unwrap();
            }
            x.data().iter().filter(|&&v| v != 0.0).count() as u64
        })
        .collect()
}

fn recount(model: &SnnModel, trace: &SimulationTrace) -> u64 {
    let mut acs = 0;
    for k in 1..model.stages.len() {
        let fan = probe_fan_out(&model.stages[k]);
        let spikes = trace.stages[k - 1].spikes.as_ref().unwrap();
        for step in &spikes.steps {
            for (i, &s) in step.iter().enumerate() {
                if s != 0 {
                    acs += fan[i];
                }
            }
        }
    }
    acs
}

fn small_cnn() -> NetworkSpec {
    let mut rng = trial_rng(SEED, 99);
    let d = Uniform::new(-0.6, 0.8);
    let mut t = |shape: Vec<usize>| {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| d.sample(&mut rng)).collect()).unwrap()
    };
    NetworkSpec::new(
        vec![1, 6, 6],
        vec![
            Layer::Conv2d {
                weights: t(vec![2, 1, 3, 3]),
                bias: t(vec![2]),
                stride: 1,
                pad: 1,
            },
            Layer::Relu,
            Layer::AvgPool {
                kernel: 2,
                stride: 2,
            },
            Layer::Conv2d {
                weights: t(vec![3, 2, 2, 2]),
                bias: t(vec![3]),
                stride: 1,
                pad: 0,
            },
            Layer::Relu,
            Layer::Flatten,
            Layer::Dense {
                weights: t(vec![2, 12]),
                bias: t(vec![2]),
            },
        ],
    )
    .unwrap()
}

fn c9_energy() -> Outcome {
    let mut checked = 0;
    let (mut mismatches, mut identity_failures) = (0, 0);
    let consts = EnergyConstants {
        e_ac: 0.9,
        e_mac: 4.6,
    };
    let mut cases: Vec<(SnnModel, Vec<Tensor>)> = Vec::new();

    let fx = common::fixture("mlp");
    let inputs: Vec<Tensor> = fx
        .test
        .samples()
        .take(100)
        .map(|(x, _)| x.clone())
        .collect();
    for cfg in [
        SnnConfig::css(8, 1, 0.5),
        SnnConfig::css(4, 0, 0.5),
        SnnConfig::rate(16),
    ] {
        cases.push((convert(&fx.net, &fx.calib, cfg).unwrap(), inputs.clone()));
    }
    let cnn = small_cnn();
    let mut rng = trial_rng(SEED, 7);
    let d = Uniform::new(0.0, 1.0);
    let xs: Vec<Tensor> = (0..50)
        .map(|_| Tensor::new(vec![1, 6, 6], (0..36).map(|_| d.sample(&mut rng)).collect()).unwrap())
        .collect();
    let batches = vec![xs.clone()];
    let calib = calibrate(&cnn, &batches, 99.0, SEED).unwrap();
    for cfg in [
        SnnConfig::css(6, 1, 0.5),
        SnnConfig::css(6, 1, 0.5).with_gate(GateMode::Off),
    ] {
        cases.push((convert(&cnn, &calib, cfg).unwrap(), xs.clone()));
    }

    for (model, inputs) in &cases {
        for x in inputs {
            let (_, trace) = snn_forward(model, x).unwrap();
            let report = energy_account(&trace, consts);
            identity_failures += usize::from(!report.identity_holds());
            if trace.total_spikes() <= 1000 {
                checked += 1;
                mismatches += usize::from(report.ac_count != recount(model, &trace));
            }
        }
    }
    Outcome {
        pass: checked > 0 && mismatches == 0 && identity_failures == 0,
        detail: format!(
            "{mismatches} AC mismatches on {checked} traces with <= 1000 spikes; {identity_failures} identity failures"
        ),
        notes: Vec::new(),
    }
}

type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("C1 membrane identity", 10, c1_identity),
        ("C2 residual optimality at alpha=1/2", 60, c2_residual),
        ("C3 CSS(T) vs rate(2^T) MSE", 60, c3_css_vs_rate),
        ("C4 round-trip quantization bound", 60, c4_round_trip),
        ("C5 toy conversion fidelity", 120, c5_fidelity),
        ("C6 TPS ablation direction", 120, c6_ablation),
        ("C7 fixed-point equivalence", 60, c7_fixed_point),
        ("C8 negative gate soundness", 60, c8_gate),
        ("C9 energy accounting identity", 60, c9_energy),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let o = timed(Duration::from_secs(limit), f);
        println!(
            "[{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        for n in &o.notes {
            println!("       {n}");
        }
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
