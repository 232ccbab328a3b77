//! Validation studies and accounting on top of the neuron, encoding and
//! conversion modules. Every stochastic routine takes an explicit seed.

pub mod ablation;
pub mod energy;
pub mod mse;
pub mod report;
pub mod theory;

pub use ablation::{ablation_precharge, evaluate, AblationRow, Evaluation};
pub use energy::{energy_account, EnergyConstants, EnergyReport};
pub use mse::{
    encoding_error_curve, layerwise_mse, round_trip_grid, LayerMseRow, MseRow, RoundTripSummary,
};
pub use report::{AnalysisReport, ReportHeader};
pub use theory::{
    check_membrane_identity, residual_sweep, residual_verdict, Histogram, IdentityCheck, InputDist,
    ResidualStats, ResidualVerdict,
};
