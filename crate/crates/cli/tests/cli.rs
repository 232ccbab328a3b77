use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str, file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .join(file)
}

fn tmn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn calibrate_mlp(dir: &Path, extra: &[&str]) -> Output {
    let net = fixture("mlp", "network.json");
    let data = fixture("mlp", "calib.json");
    let mut args = vec![
        "calibrate",
        "--network",
        p(&net),
        "--dataset",
        p(&data),
        "--output",
        "cal.json",
    ];
    args.extend_from_slice(extra);
    tmn(dir, &args)
}

fn thresholds(dir: &Path) -> Vec<(usize, f64)> {
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("cal.json")).unwrap()).unwrap();
    v["thresholds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            (
                t["layer"].as_u64().unwrap() as usize,
                t["v_th"].as_f64().unwrap(),
            )
        })
        .collect()
}

#[test]
fn calibrate_writes_two_thresholds() {
    let d = tempfile::tempdir().unwrap();
    let o = calibrate_mlp(d.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let th = thresholds(d.path());
    assert_eq!(th.iter().map(|t| t.0).collect::<Vec<_>>(), vec![1, 3]);
    assert!(th.iter().all(|t| t.1 > 0.0));
}

#[test]
fn percentile_100_gives_batch_maxima() {
    use tmn::conversion::{Dataset, NetworkSpec};
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&calibrate_mlp(d.path(), &["--percentile", "100"])), 0);
    let net = NetworkSpec::load(fixture("mlp", "network.json")).unwrap();
    let data = Dataset::load(fixture("mlp", "calib.json")).unwrap();
    // Oracle: mean over batches of the largest post-ReLU activation.
    let mut expected = [0.0; 2];
    for b in &data.batches {
        let mut max = [f64::NEG_INFINITY; 2];
        for x in &b.inputs {
            let outs = net.forward_trace(x).unwrap();
            for (k, l) in [1, 3].into_iter().enumerate() {
                max[k] = outs[l].data().iter().copied().fold(max[k], f64::max);
            }
        }
        for k in 0..2 {
            expected[k] += max[k] / data.batches.len() as f64;
        }
    }
    for (got, want) in thresholds(d.path()).iter().zip(expected) {
        assert!((got.1 - want).abs() <= 1e-12 * want, "{got:?} vs {want}");
    }
}

#[test]
fn missing_inputs_are_usage_or_io_errors() {
    let d = tempfile::tempdir().unwrap();
    let net = fixture("mlp", "network.json");
    assert_eq!(
        code(&tmn(d.path(), &["calibrate", "--network", p(&net)])),
        2
    );
    assert_eq!(
        code(&tmn(
            d.path(),
            &[
                "calibrate",
                "--network",
                p(&net),
                "--dataset",
                "absent.json"
            ]
        )),
        3
    );
    assert_eq!(code(&tmn(d.path(), &["analyze", "--which", "nonsense"])), 2);
    assert_eq!(code(&tmn(d.path(), &["frobnicate"])), 2);
}

#[test]
fn run_pipeline_is_faithful_and_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(code(&calibrate_mlp(dir, &[])), 0);
    let net = fixture("mlp", "network.json");
    let test = fixture("mlp", "test.json");
    let o = tmn(
        dir,
        &[
            "convert",
            "--network",
            p(&net),
            "--calibration",
            "cal.json",
            "--horizon",
            "8",
            "--precharge",
            "1",
            "--output",
            "model.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let run = |out: &str| {
        tmn(
            dir,
            &[
                "run",
                "--model",
                "model.json",
                "--dataset",
                p(&test),
                "--output-dir",
                out,
            ],
        )
    };
    assert_eq!(code(&run("out")), 0);
    let first: Vec<Vec<u8>> = ["predictions.csv", "summary.csv", "trace.csv"]
        .iter()
        .map(|f| std::fs::read(dir.join("out").join(f)).unwrap())
        .collect();
    assert_eq!(code(&run("out")), 0);
    for (f, bytes) in ["predictions.csv", "summary.csv", "trace.csv"]
        .iter()
        .zip(first)
    {
        assert_eq!(
            std::fs::read(dir.join("out").join(f)).unwrap(),
            bytes,
            "{f} changed between runs"
        );
    }

    let summary = std::fs::read_to_string(dir.join("out/summary.csv")).unwrap();
    assert!(summary.starts_with("# tool: tmn\n# version: "));
    assert!(summary.contains("# config: {"));
    let agreement: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("ann_agreement,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(agreement >= 0.99, "{agreement}");
}

#[test]
fn minimal_horizon_runs() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(code(&calibrate_mlp(dir, &[])), 0);
    let net = fixture("mlp", "network.json");
    let args = [
        "convert",
        "--network",
        p(&net),
        "--calibration",
        "cal.json",
        "--horizon",
        "1",
        "--precharge",
        "0",
        "--output",
        "m.json",
    ];
    assert_eq!(code(&tmn(dir, &args)), 0);
    let test = fixture("mlp", "test.json");
    let o = tmn(
        dir,
        &[
            "run",
            "--model",
            "m.json",
            "--dataset",
            p(&test),
            "--output-dir",
            "o",
            "--format",
            "json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("o/predictions.json")).unwrap())
            .unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 600);
    assert_eq!(v["header"]["config"]["trace_sample"], 0);
}

#[test]
fn validate_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&tmn(
            d.path(),
            &["validate", "--seed", "1", "--trials", "0"]
        )),
        2
    );
    assert_eq!(
        code(&tmn(d.path(), &["validate", "--trials", "10"])),
        2,
        "seed is mandatory"
    );
    // Centered inputs satisfy every check.
    let ok = tmn(
        d.path(),
        &[
            "validate",
            "--seed",
            "1",
            "--trials",
            "20000",
            "--input-lo=-0.5",
            "--input-hi",
            "0.5",
            "--output",
            "v.json",
        ],
    );
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(v["header"]["seed"], 1);
    let half = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r[0] == "mean_sq_alpha_0.5")
        .unwrap();
    assert_eq!(half[3], true, "alpha = 1/2 flagged minimal");
    // The default input range drives the residual away from zero.
    let o = tmn(d.path(), &["validate", "--seed", "1", "--trials", "20000"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[PASS] membrane identity"));
}

#[test]
fn analyze_reports() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    let o = tmn(
        dir,
        &[
            "analyze",
            "--which",
            "mse",
            "--seed",
            "4",
            "--samples",
            "2000",
            "--precharges",
            "0",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.join("reports/mse.csv")).unwrap();
    let rows: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    let horizons: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(
        horizons,
        ["2", "3", "4", "5", "6", "4", "8", "16", "32", "64"]
    );
    assert!(csv.contains("# seed: 4"));

    let o = tmn(
        dir,
        &[
            "analyze", "--which", "residual", "--seed", "4", "--trials", "500", "--alphas",
            "0.4,0.5",
        ],
    );
    assert_eq!(code(&o), 0);
    let hist = std::fs::read_to_string(dir.join("reports/residual_hist.csv")).unwrap();
    let counts: Vec<u64> = hist
        .lines()
        .filter(|l| l.starts_with("0.5,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(counts.len(), 40);
    assert_eq!(counts.iter().sum::<u64>(), 500);

    assert_eq!(
        code(&tmn(dir, &["analyze", "--which", "mse"])),
        2,
        "seed is mandatory"
    );
}

#[test]
fn energy_of_a_silent_network_is_macs_only() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    let net = r#"{"format":"tmn-network","version":1,"input_shape":[2],"layers":[
        {"kind":"dense","in_features":2,"out_features":2,"weights":[1,0,0,1],"bias":[0,0]},
        {"kind":"relu"},
        {"kind":"dense","in_features":2,"out_features":1,"weights":[1,1],"bias":[0]}]}"#;
    std::fs::write(dir.join("net.json"), net).unwrap();
    let data = r#"{"format":"tmn-dataset","version":1,"sample_shape":[2],"batches":[{"inputs":[[0,0],[0,0]]}]}"#;
    std::fs::write(dir.join("zero.json"), data).unwrap();
    let ok = |o: Output| assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    ok(tmn(
        dir,
        &[
            "calibrate",
            "--network",
            "net.json",
            "--dataset",
            "zero.json",
            "--output",
            "cal.json",
        ],
    ));
    ok(tmn(
        dir,
        &[
            "convert",
            "--network",
            "net.json",
            "--calibration",
            "cal.json",
            "--output",
            "m.json",
        ],
    ));
    ok(tmn(
        dir,
        &[
            "analyze",
            "--which",
            "energy",
            "--model",
            "m.json",
            "--dataset",
            "zero.json",
        ],
    ));
    let csv = std::fs::read_to_string(dir.join("reports/energy.csv")).unwrap();
    let total = csv.lines().find(|l| l.starts_with("total,")).unwrap();
    let cells: Vec<&str> = total.split(',').collect();
    assert_eq!(cells[1], "0", "no spikes, no accumulates");
    let macs: f64 = cells[2].parse().unwrap();
    let energy: f64 = cells[5].parse().unwrap();
    assert!(macs > 0.0);
    assert!((energy - macs * 4.6).abs() < 1e-9);
}

#[test]
fn config_file_overrides_flags() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    std::fs::write(
        dir.join("c.toml"),
        "seed = 9\nsamples = 100\noutput-dir = \"from_toml\"\n",
    )
    .unwrap();
    let o = tmn(
        dir,
        &[
            "analyze",
            "--which",
            "mse",
            "--seed",
            "1",
            "--output-dir",
            "from_flags",
            "--config",
            "c.toml",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.join("from_toml/mse.csv")).unwrap();
    assert!(csv.contains("# seed: 9"));
    assert!(!dir.join("from_flags").exists());

    std::fs::write(dir.join("bad.toml"), "no_such_option = 1\n").unwrap();
    assert_eq!(
        code(&tmn(
            dir,
            &["analyze", "--which", "mse", "--config", "bad.toml"]
        )),
        2
    );
}
