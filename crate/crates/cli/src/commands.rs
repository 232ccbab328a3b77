use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tmn::analysis::report::{self, AnalysisReport, ReportHeader};
use tmn::analysis::{self, mse, EnergyConstants, EnergyReport, InputDist};
use tmn::conversion::{
    argmax, calibrate, snn_forward, CalibrationResult, ConvertedNetwork, Dataset, GateMode,
    NetworkSpec, SnnConfig, TRACE_COLUMNS,
};

use crate::args::*;
use crate::config::resolved;
use crate::error::{at, CliError, EXIT_VALIDATION};

type Outcome = Result<u8, CliError>;

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::usage(format!("missing --{flag}")))
}

fn seed_of(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::usage("this command is stochastic and needs --seed"))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_report(
    dir: &Path,
    name: &str,
    format: Format,
    r: &AnalysisReport,
) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{name}.{}", format.ext()));
    let text = match format {
        Format::Csv => r.to_csv(),
        Format::Json => r.to_json(),
    };
    write(&path, &text)?;
    Ok(path)
}

fn snn_config(a: &SnnArgs) -> SnnConfig {
    match a.coding {
        CodingArg::Rate => SnnConfig::rate(a.horizon),
        CodingArg::Css => SnnConfig::css(a.horizon, a.precharge, a.alpha).with_gate(match a.gate {
            Gate::PostFilter => GateMode::PostFilter,
            Gate::OnlineLatch => GateMode::OnlineLatch,
            Gate::Off => GateMode::Off,
        }),
    }
}

fn constants(e: &EnergyArgs) -> Result<EnergyConstants, CliError> {
    if !(e.e_ac >= 0.0 && e.e_mac >= 0.0) {
        return Err(CliError::usage("energy constants must be non-negative"));
    }
    Ok(EnergyConstants {
        e_ac: e.e_ac,
        e_mac: e.e_mac,
    })
}

pub fn calibrate_cmd(a: &CalibrateArgs) -> Outcome {
    let net_path = required(&a.network, "network")?;
    let data_path = required(&a.dataset, "dataset")?;
    let net = at(net_path, NetworkSpec::load(net_path))?;
    let data = at(data_path, Dataset::load(data_path))?;
    let take = a.batches.unwrap_or(data.batches.len());
    if take == 0 || take > data.batches.len() {
        return Err(CliError::usage(format!(
            "--batches {take} outside 1..={}",
            data.batches.len()
        )));
    }
    let batches: Vec<_> = data.batches[..take]
        .iter()
        .map(|b| b.inputs.clone())
        .collect();
    let c = calibrate(&net, &batches, a.percentile, a.seed)?;
    at(&a.output, c.save(&a.output))?;
    for t in &c.thresholds {
        println!("layer {}: v_th = {}", t.layer, t.v_th);
    }
    Ok(0)
}

pub fn convert_cmd(a: &ConvertArgs) -> Outcome {
    let net_path = required(&a.network, "network")?;
    let cal_path = required(&a.calibration, "calibration")?;
    let net = at(net_path, NetworkSpec::load(net_path))?;
    let cal = at(cal_path, CalibrationResult::load(cal_path))?;
    let converted = ConvertedNetwork::new(net, cal, snn_config(&a.snn))?;
    at(&a.output, converted.save(&a.output))?;
    println!(
        "{} stages, {} spiking layers",
        converted.model.stages.len(),
        converted.model.thresholds().len()
    );
    Ok(0)
}

pub fn run_cmd(a: &RunArgs) -> Outcome {
    let model_path = required(&a.model, "model")?;
    let data_path = required(&a.dataset, "dataset")?;
    let conv = at(model_path, ConvertedNetwork::load(model_path))?;
    let data = at(data_path, Dataset::load(data_path))?;
    let consts = constants(&a.energy)?;
    let cfg = resolved(a);
    let mut preds = AnalysisReport::new(
        ReportHeader::new("predictions", a.seed, cfg.clone()),
        &["sample", "label", "prediction", "ann_prediction", "logits"],
    );
    let mut trace_report = AnalysisReport::new(
        ReportHeader::new("trace", a.seed, cfg.clone()),
        &TRACE_COLUMNS.split(',').collect::<Vec<_>>(),
    );
    let (mut correct, mut labeled, mut agree, mut spikes) = (0usize, 0usize, 0usize, 0u64);
    let mut energy = EnergyReport::new(0, 0, consts);
    let mut n = 0;
    for (i, (x, label)) in data.samples().enumerate() {
        let (y, trace) = snn_forward(&conv.model, x)?;
        let ann = argmax(&conv.spec.forward(x)?);
        let pred = argmax(&y);
        agree += usize::from(ann == pred);
        if let Some(l) = label {
            labeled += 1;
            correct += usize::from(l == pred);
        }
        spikes += trace.total_spikes() as u64;
        energy = energy.merge(&analysis::energy_account(&trace, consts));
        let logits: Vec<String> = y.data().iter().map(|v| v.to_string()).collect();
        preds.push(vec![
            json!(i),
            json!(label),
            json!(pred),
            json!(ann),
            json!(logits.join(" ")),
        ]);
        if i == a.trace_sample {
            for row in trace.rows() {
                let obj = serde_json::to_value(&row).expect("trace rows serialize");
                trace_report.push(TRACE_COLUMNS.split(',').map(|c| obj[c].clone()).collect());
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(CliError::usage("dataset has no samples"));
    }
    let accuracy = (labeled > 0).then(|| correct as f64 / labeled as f64);
    let agreement = agree as f64 / n as f64;
    let mut summary = AnalysisReport::new(
        ReportHeader::new("run_summary", a.seed, cfg),
        &["metric", "value"],
    );
    for (k, v) in [
        ("samples", json!(n)),
        ("accuracy", json!(accuracy)),
        ("ann_agreement", json!(agreement)),
        ("spikes", json!(spikes)),
        ("ac_count", json!(energy.ac_count)),
        ("mac_count", json!(energy.mac_count)),
        ("energy_pj", json!(energy.total)),
    ] {
        summary.push(vec![json!(k), v]);
    }
    write_report(&a.output_dir, "predictions", a.format, &preds)?;
    write_report(&a.output_dir, "trace", a.format, &trace_report)?;
    write_report(&a.output_dir, "summary", a.format, &summary)?;
    match accuracy {
        Some(acc) => println!("{n} samples: accuracy {acc:.4}, ANN agreement {agreement:.4}"),
        None => println!("{n} samples: ANN agreement {agreement:.4}"),
    }
    println!(
        "ACs {}, MACs {}, energy {:.1} pJ",
        energy.ac_count, energy.mac_count, energy.total
    );
    Ok(0)
}

fn input_dist(r: &ResidualArgs) -> Result<InputDist, CliError> {
    Ok(InputDist::uniform(
        r.input_lo.unwrap_or(0.0),
        r.input_hi.unwrap_or(r.v_th),
    )?)
}

fn check_trials(n: usize, flag: &str) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::usage(format!("--{flag} must be at least 1")));
    }
    Ok(())
}

pub fn validate_cmd(a: &ValidateArgs) -> Outcome {
    let seed = seed_of(a.seed)?;
    check_trials(a.residual.trials, "trials")?;
    check_trials(a.identity_trials, "identity-trials")?;
    let dist = input_dist(&a.residual)?;
    let mut rep = AnalysisReport::new(
        ReportHeader::new("validate", seed, resolved(a)),
        &["check", "measured", "threshold", "pass"],
    );
    let mut all = true;

    let id_dist = InputDist::uniform(-a.residual.v_th, a.residual.v_th)?;
    let mut worst: f64 = 0.0;
    for &t in &a.identity_horizons {
        let r = analysis::check_membrane_identity(a.identity_trials, t, id_dist, seed)?;
        worst = worst.max(r.max_rel_error);
    }
    let ok = worst < 1e-9;
    all &= ok;
    println!(
        "[{}] membrane identity: max relative error {worst:.3e} (< 1e-9)",
        verdict(ok)
    );
    rep.push(vec![
        json!("identity_max_rel_error"),
        json!(worst),
        json!(1e-9),
        json!(ok),
    ]);

    let stats = analysis::residual_sweep(
        &a.residual.alphas,
        a.residual.trials,
        a.residual.residual_horizon,
        a.residual.v_th,
        dist,
        seed,
    )?;
    match analysis::residual_verdict(&stats) {
        Some(v) => {
            all &= v.mean_within_3se && v.half_is_minimal;
            println!(
                "[{}] residual mean at alpha=1/2: |mean|/stderr = {:.2} (<= 3)",
                verdict(v.mean_within_3se),
                v.mean_z_score
            );
            let half = stats
                .iter()
                .find(|s| s.alpha == 0.5)
                .expect("verdict implies 1/2");
            println!(
                "[{}] residual mean square at alpha=1/2: {:.4} vs best other {:.4}",
                verdict(v.half_is_minimal),
                half.mean_sq,
                v.best_other_mean_sq
            );
            rep.push(vec![
                json!("residual_mean_z"),
                json!(v.mean_z_score),
                json!(3.0),
                json!(v.mean_within_3se),
            ]);
            rep.push(vec![
                json!("residual_mean_sq_half"),
                json!(half.mean_sq),
                json!(v.best_other_mean_sq),
                json!(v.half_is_minimal),
            ]);
        }
        None => println!("alpha sweep lacks 1/2; residual claims not evaluated"),
    }
    for s in &stats {
        println!(
            "  alpha={}: mean {:.4} (se {:.4}), mean sq {:.4}",
            s.alpha, s.mean, s.stderr, s.mean_sq
        );
        let minimal = stats
            .iter()
            .all(|o| o.alpha == s.alpha || o.mean_sq > s.mean_sq);
        rep.push(vec![
            json!(format!("mean_sq_alpha_{}", s.alpha)),
            json!(s.mean_sq),
            Value::Null,
            json!(minimal),
        ]);
    }
    if let Some(out) = &a.output {
        let text = match a.format {
            Format::Csv => rep.to_csv(),
            Format::Json => rep.to_json(),
        };
        write(out, &text)?;
    }
    Ok(if all { 0 } else { EXIT_VALIDATION })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn load_triplet(a: &AnalyzeArgs) -> Result<(NetworkSpec, CalibrationResult, Dataset), CliError> {
    let np = required(&a.network, "network")?;
    let cp = required(&a.calibration, "calibration")?;
    let dp = required(&a.dataset, "dataset")?;
    Ok((
        at(np, NetworkSpec::load(np))?,
        at(cp, CalibrationResult::load(cp))?,
        at(dp, Dataset::load(dp))?,
    ))
}

pub fn analyze_cmd(a: &AnalyzeArgs) -> Outcome {
    let cfg = resolved(a);
    let dir = &a.output_dir;
    let written = match a.which {
        Which::Mse => {
            let seed = seed_of(a.seed)?;
            check_trials(a.samples, "samples")?;
            let samples = mse::uniform_samples(a.samples, a.residual.v_th, seed);
            let mut rows = Vec::new();
            for (i, &p) in a.precharges.iter().enumerate() {
                let rate: &[usize] = if i == 0 { &a.rate_horizons } else { &[] };
                let css: Vec<usize> = a.css_horizons.iter().copied().filter(|&t| t > p).collect();
                rows.extend(analysis::encoding_error_curve(
                    &css,
                    rate,
                    p,
                    &samples,
                    a.residual.v_th,
                )?);
            }
            let mut out = vec![write_report(
                dir,
                "mse",
                a.format,
                &report::mse_report(ReportHeader::new("mse", seed, cfg.clone()), &rows),
            )?];
            if a.network.is_some() || a.calibration.is_some() || a.dataset.is_some() {
                let (net, cal, data) = load_triplet(a)?;
                let xs: Vec<_> = data.samples().map(|(x, _)| x.clone()).collect();
                let mut layer_rows = Vec::new();
                for &p in &a.precharges {
                    for &t in a.css_horizons.iter().filter(|&&t| t > p) {
                        layer_rows.extend(analysis::layerwise_mse(
                            &net,
                            &cal,
                            &xs,
                            SnnConfig::css(t, p, 0.5),
                        )?);
                    }
                }
                for &t in &a.rate_horizons {
                    layer_rows.extend(analysis::layerwise_mse(
                        &net,
                        &cal,
                        &xs,
                        SnnConfig::rate(t),
                    )?);
                }
                let r = report::layer_mse_report(
                    ReportHeader::new("layer_mse", seed, cfg),
                    &layer_rows,
                );
                out.push(write_report(dir, "layer_mse", a.format, &r)?);
            }
            out
        }
        Which::Residual => {
            let seed = seed_of(a.seed)?;
            check_trials(a.residual.trials, "trials")?;
            let r = &a.residual;
            let stats = analysis::residual_sweep(
                &r.alphas,
                r.trials,
                r.residual_horizon,
                r.v_th,
                input_dist(r)?,
                seed,
            )?;
            vec![
                write_report(
                    dir,
                    "residual_summary",
                    a.format,
                    &report::residual_summary_report(
                        ReportHeader::new("residual_summary", seed, cfg.clone()),
                        &stats,
                    ),
                )?,
                write_report(
                    dir,
                    "residual_hist",
                    a.format,
                    &report::residual_histogram_report(
                        ReportHeader::new("residual_hist", seed, cfg),
                        &stats,
                    ),
                )?,
            ]
        }
        Which::Energy => {
            let mp = required(&a.model, "model")?;
            let dp = required(&a.dataset, "dataset")?;
            let conv = at(mp, ConvertedNetwork::load(mp))?;
            let data = at(dp, Dataset::load(dp))?;
            let consts = constants(&a.energy)?;
            let mut rows = Vec::new();
            let mut total = EnergyReport::new(0, 0, consts);
            for (i, (x, _)) in data.samples().enumerate() {
                let (_, trace) = snn_forward(&conv.model, x)?;
                let e = analysis::energy_account(&trace, consts);
                total = total.merge(&e);
                rows.push((format!("sample_{i}"), e));
            }
            rows.push(("total".to_string(), total));
            let r =
                report::energy_report(ReportHeader::new("energy", a.seed.unwrap_or(0), cfg), &rows);
            vec![write_report(dir, "energy", a.format, &r)?]
        }
        Which::Ablation => {
            let (net, cal, data) = load_triplet(a)?;
            let rows = analysis::ablation_precharge(
                &net,
                &cal,
                &data,
                a.horizon,
                &a.precharges,
                &[true, false],
            )?;
            let r = report::ablation_report(
                ReportHeader::new("ablation", a.seed.unwrap_or(0), cfg),
                &rows,
            );
            vec![write_report(dir, "ablation", a.format, &r)?]
        }
        Which::Roundtrip => {
            check_trials(a.grid_points, "grid-points")?;
            let mut rows = Vec::new();
            for &p in &a.precharges {
                for &t in a.css_horizons.iter().filter(|&&t| t > p) {
                    rows.push(analysis::round_trip_grid(
                        a.residual.v_th,
                        t,
                        p,
                        a.grid_points,
                    )?);
                }
            }
            let r = report::round_trip_report(
                ReportHeader::new("roundtrip", a.seed.unwrap_or(0), cfg),
                &rows,
            );
            vec![write_report(dir, "roundtrip", a.format, &r)?]
        }
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(0)
}
