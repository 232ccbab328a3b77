#![allow(dead_code)]

use tmn::conversion::{calibrate, CalibrationResult, Dataset, NetworkSpec, DEFAULT_PERCENTILE};

pub struct Fixture {
    pub net: NetworkSpec,
    pub calib_data: Dataset,
    pub test: Dataset,
    pub calib: CalibrationResult,
}

pub fn fixture(name: &str) -> Fixture {
    let dir = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let net = NetworkSpec::load(format!("{dir}/network.json")).unwrap();
    let calib_data = Dataset::load(format!("{dir}/calib.json")).unwrap();
    let test = Dataset::load(format!("{dir}/test.json")).unwrap();
    let batches: Vec<_> = calib_data
        .batches
        .iter()
        .map(|b| b.inputs.clone())
        .collect();
    let calib = calibrate(&net, &batches, DEFAULT_PERCENTILE, 0).unwrap();
    Fixture {
        net,
        calib_data,
        test,
        calib,
    }
}
