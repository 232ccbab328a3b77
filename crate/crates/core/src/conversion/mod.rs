//! ANN to SNN conversion: network files, datasets, threshold calibration and
//! the converted network's simulation.

pub mod calibrate;
pub mod data;
pub mod model_file;
pub mod network;
pub mod snn;
pub mod trace;

pub use calibrate::{calibrate, percentile, CalibrationResult, LayerThreshold, DEFAULT_PERCENTILE};
pub use data::{Batch, Dataset};
pub use model_file::ConvertedNetwork;
pub use network::{Layer, NetworkSpec};
pub use snn::{
    argmax, bias_currents, convert, snn_forward, zero_negative_layer, zero_negative_sequences,
    Coding, GateMode, SimulationTrace, SnnConfig, SnnModel, Stage, StageTrace,
};
pub use trace::{TraceRow, TRACE_COLUMNS};
