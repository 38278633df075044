//! Event-level energy accounting.
//!
//! Wire energy is `C V^2` per energized wire (no 1/2 factor), device
//! programming energy is `V^2 t / R` with the cell conductance averaged over
//! the pulse, and communication energy is charged per inter-array event.

use serde::{Deserialize, Serialize};

use crate::crossbar::ArrayGeometry;
use crate::device::{Polarity, PulseSpec};
use crate::error::{Error, Result};

/// Energy of charging `n_row_wires` full rows and `n_col_wires` full columns.
pub fn wire_event_energy(
    geometry: &ArrayGeometry,
    n_row_wires: usize,
    n_col_wires: usize,
    volts: f64,
) -> f64 {
    let cells = (n_row_wires * geometry.cols + n_col_wires * geometry.rows) as f64;
    cells * geometry.wire_cap_per_cell * volts * volts
}

/// Programming energy of one pulse; conductance taken as the mean of its
/// values before and after the pulse.
pub fn programming_event_energy(volts: f64, width: f64, g_before: f64, g_after: f64) -> f64 {
    volts * volts * width * 0.5 * (g_before + g_after)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochEnergy {
    pub epoch: usize,
    pub wire_j: f64,
    pub device_j: f64,
    pub comm_j: f64,
}

/// Cumulative energies and event counts of one simulation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub wire_j: f64,
    pub device_j: f64,
    pub comm_j: f64,
    pub pulse_events: u64,
    pub wire_events: u64,
    pub comm_events: u64,
    pub snapshots: Vec<EpochEnergy>,
}

impl EnergyLedger {
    pub fn charge_wire(&mut self, joules: f64) {
        self.wire_j += joules;
        self.wire_events += 1;
    }

    pub fn charge_device(&mut self, joules: f64) {
        self.device_j += joules;
        self.pulse_events += 1;
    }

    pub fn charge_comm(&mut self, joules: f64, events: u64) {
        self.comm_j += joules;
        self.comm_events += events;
    }

    /// Records cumulative totals at the end of `epoch`.
    pub fn snapshot(&mut self, epoch: usize) {
        self.snapshots.push(EpochEnergy {
            epoch,
            wire_j: self.wire_j,
            device_j: self.device_j,
            comm_j: self.comm_j,
        });
    }

    /// Energy spent during each epoch (differences of cumulative snapshots).
    pub fn per_epoch(&self) -> Vec<EpochEnergy> {
        let mut prev = EpochEnergy {
            epoch: 0,
            wire_j: 0.0,
            device_j: 0.0,
            comm_j: 0.0,
        };
        self.snapshots
            .iter()
            .map(|s| {
                let d = EpochEnergy {
                    epoch: s.epoch,
                    wire_j: s.wire_j - prev.wire_j,
                    device_j: s.device_j - prev.device_j,
                    comm_j: s.comm_j - prev.comm_j,
                };
                prev = *s;
                d
            })
            .collect()
    }

    pub fn total_j(&self) -> f64 {
        self.wire_j + self.device_j + self.comm_j
    }

    pub fn ratio_device_to_wire(&self) -> Result<f64> {
        if self.wire_j > 0.0 {
            Ok(self.device_j / self.wire_j)
        } else {
            Err(Error::UndefinedRatio)
        }
    }

    /// Combines two ledgers from independent runs. Snapshots are concatenated.
    pub fn merge(&self, other: &Self) -> Self {
        let mut snapshots = self.snapshots.clone();
        snapshots.extend_from_slice(&other.snapshots);
        Self {
            wire_j: self.wire_j + other.wire_j,
            device_j: self.device_j + other.device_j,
            comm_j: self.comm_j + other.comm_j,
            pulse_events: self.pulse_events + other.pulse_events,
            wire_events: self.wire_events + other.wire_events,
            comm_events: self.comm_events + other.comm_events,
            snapshots,
        }
    }
}

/// A ledger bound to the array whose wires get energized on every pulse.
///
/// Each pulse selects one row and one column of `geometry`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMeter {
    pub geometry: ArrayGeometry,
    pub ledger: EnergyLedger,
}

impl EnergyMeter {
    pub fn new(geometry: ArrayGeometry) -> Self {
        Self {
            geometry,
            ledger: EnergyLedger::default(),
        }
    }

    /// RESET pulses use the trapezoidal conductance; SET pulses are charged at
    /// the post-SET conductance.
    pub fn charge_pulse(&mut self, pulse: &PulseSpec, g_before: f64, g_after: f64) {
        let g_before = match pulse.polarity {
            Polarity::Reset => g_before,
            Polarity::Set => g_after,
        };
        self.ledger.charge_device(programming_event_energy(
            pulse.amplitude,
            pulse.width,
            g_before,
            g_after,
        ));
        self.ledger
            .charge_wire(wire_event_energy(&self.geometry, 1, 1, pulse.amplitude));
    }
}
