//! Operation counts and energy estimate of a simulated forward pass.
//!
//! Every nonzero spike, positive or negative, triggers one accumulate per
//! outgoing synapse. Multiply-accumulates are the analog first stage's
//! products on every step plus one bias addition per stage output per step.

use serde::{Deserialize, Serialize};

use crate::conversion::SimulationTrace;

/// Energy per operation in picojoules. The defaults are a common op-counting
/// convention for 45 nm CMOS, not measured values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConstants {
    pub e_ac: f64,
    pub e_mac: f64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        EnergyConstants {
            e_ac: 0.9,
            e_mac: 4.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub ac_count: u64,
    pub mac_count: u64,
    pub e_ac: f64,
    pub e_mac: f64,
    /// `ac_count·e_ac + mac_count·e_mac`, in picojoules.
    pub total: f64,
}

impl EnergyReport {
    pub fn new(ac_count: u64, mac_count: u64, c: EnergyConstants) -> Self {
        EnergyReport {
            ac_count,
            mac_count,
            e_ac: c.e_ac,
            e_mac: c.e_mac,
            total: ac_count as f64 * c.e_ac + mac_count as f64 * c.e_mac,
        }
    }

    pub fn identity_holds(&self) -> bool {
        self.total == self.ac_count as f64 * self.e_ac + self.mac_count as f64 * self.e_mac
    }

    /// Sum of two reports under the same constants.
    pub fn merge(&self, other: &EnergyReport) -> EnergyReport {
        EnergyReport::new(
            self.ac_count + other.ac_count,
            self.mac_count + other.mac_count,
            EnergyConstants {
                e_ac: self.e_ac,
                e_mac: self.e_mac,
            },
        )
    }
}

pub fn energy_account(trace: &SimulationTrace, c: EnergyConstants) -> EnergyReport {
    let k = trace.stages.len();
    let acs = (0..k).map(|i| trace.stage_acs(i)).sum();
    let macs = (0..k).map(|i| trace.stage_macs(i)).sum();
    EnergyReport::new(acs, macs, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_by_construction() {
        let r = EnergyReport::new(10, 3, EnergyConstants::default());
        assert!((r.total - (9.0 + 13.8)).abs() < 1e-12);
        assert!(r.identity_holds());
        let m = r.merge(&EnergyReport::new(0, 2, EnergyConstants::default()));
        assert_eq!((m.ac_count, m.mac_count), (10, 5));
        assert!(m.identity_holds());
    }
}
