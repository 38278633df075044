//! First-order corelet partitioning: tile a layered network onto square arrays
//! of side `A` and account wire energy, inter-array event traffic and the
//! time-multiplexing latency.
//!
//! Neurons of every layer are placed linearly: neuron `n` lives in block
//! `n / A`. A layer with fan-in `I` and fan-out `O` occupies the
//! `ceil(I/A) x ceil(O/A)` array tiles, and an input event from block `s`
//! is delivered once to every output block `d`. Deliveries with `s == d` stay
//! inside their array column; the others cross array boundaries and pay the
//! communication cost.

use serde::{Deserialize, Serialize};

use crate::crossbar::ArrayGeometry;
use crate::error::{Error, Result};

/// Largest array side accepted by [`plan`].
pub const MAX_ARRAY_SIDE: usize = 1 << 16;

/// Default energy per boundary-crossing event and hop.
pub const DEFAULT_E_AER: f64 = 2.2e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub layer_sizes: Vec<usize>,
    /// Expected events per neuron per inference.
    pub activity: f64,
}

impl NetworkShape {
    pub fn new(layer_sizes: Vec<usize>) -> Self {
        Self {
            layer_sizes,
            activity: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "network needs >= 2 layers of size >= 1, got {:?}",
                self.layer_sizes
            )));
        }
        if !(self.activity >= 0.0 && self.activity.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "activity must be >= 0, got {}",
                self.activity
            )));
        }
        Ok(())
    }

    pub fn max_layer(&self) -> usize {
        self.layer_sizes.iter().copied().max().unwrap_or(0)
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_sizes.windows(2).map(|w| (w[0], w[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommModel {
    /// Joules per boundary-crossing event (per hop when `hop_scaled`).
    pub e_aer: f64,
    /// Seconds per time-multiplexing slot.
    pub latency_per_slot: f64,
    /// Charge `|s - d|` hops per crossing instead of one.
    pub hop_scaled: bool,
    /// When set, `e_aer` is quoted at this voltage and scales with `(V/v_ref)^2`.
    pub v_ref: Option<f64>,
}

impl Default for CommModel {
    fn default() -> Self {
        Self {
            e_aer: DEFAULT_E_AER,
            latency_per_slot: 1e-8,
            hop_scaled: true,
            v_ref: None,
        }
    }
}

impl CommModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_aer >= 0.0 && self.e_aer.is_finite() && self.latency_per_slot >= 0.0) {
            return Err(Error::InvalidParameter(
                "e_aer and latency_per_slot must be >= 0".into(),
            ));
        }
        if let Some(v) = self.v_ref {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter("v_ref must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Energy of one crossing unit at supply `volts`.
    pub fn event_energy(&self, volts: f64) -> f64 {
        match self.v_ref {
            Some(v) => self.e_aer * (volts / v).powi(2),
            None => self.e_aer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub fan_in: usize,
    pub fan_out: usize,
    pub arrays_needed: usize,
    pub time_mux_factor: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreletPlan {
    pub array_side: usize,
    pub layers: Vec<LayerPlan>,
}

impl CoreletPlan {
    pub fn total_arrays(&self) -> usize {
        self.layers.iter().map(|l| l.arrays_needed).sum()
    }

    pub fn latency_slots(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.time_mux_factor)
            .max()
            .unwrap_or(1)
    }
}

pub fn plan(network: &NetworkShape, array_side: usize) -> Result<CoreletPlan> {
    network.validate()?;
    if array_side == 0 || array_side > MAX_ARRAY_SIDE {
        return Err(Error::InvalidParameter(format!(
            "array side must be in 1..={MAX_ARRAY_SIDE}, got {array_side}"
        )));
    }
    let layers = network
        .layers()
        .map(|(fan_in, fan_out)| LayerPlan {
            fan_in,
            fan_out,
            arrays_needed: fan_in.div_ceil(array_side) * fan_out.div_ceil(array_side),
            time_mux_factor: fan_in.div_ceil(array_side),
        })
        .collect();
    Ok(CoreletPlan { array_side, layers })
}

/// One event drives one row and one column wire of an `A x A` array.
pub fn per_event_wire_energy(
    array_side: usize,
    geometry: &ArrayGeometry,
    volts: f64,
) -> Result<f64> {
    if array_side == 0 {
        return Err(Error::InvalidParameter("array side must be >= 1".into()));
    }
    Ok(2.0 * array_side as f64 * geometry.wire_cap_per_cell * volts * volts)
}

/// Delivery counts of one inference, per unit activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventCounts {
    /// Source events times destination blocks.
    pub total: u64,
    pub intra: u64,
    pub crossing: u64,
    /// Sum of `|s - d|` over crossing deliveries.
    pub hops: u64,
}

/// Closed-form delivery counts for one layer.
pub fn layer_event_counts(fan_in: usize, fan_out: usize, array_side: usize) -> EventCounts {
    let in_blocks = fan_in.div_ceil(array_side);
    let out_blocks = fan_out.div_ceil(array_side);
    let mut c = EventCounts::default();
    for s in 0..in_blocks {
        let members = (fan_in - s * array_side).min(array_side) as u64;
        let hops: usize = (0..out_blocks).map(|d| s.abs_diff(d)).sum();
        let inside = u64::from(s < out_blocks);
        c.total += members * out_blocks as u64;
        c.intra += members * inside;
        c.crossing += members * (out_blocks as u64 - inside);
        c.hops += members * hops as u64;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub array_side: usize,
    pub arrays: usize,
    pub time_mux: usize,
    pub wire_j: f64,
    pub comm_j: f64,
    pub total_j: f64,
    pub latency_slots: usize,
    pub latency_s: f64,
    pub savings: f64,
}

fn energies(
    network: &NetworkShape,
    array_side: usize,
    geometry: &ArrayGeometry,
    comm: &CommModel,
    volts: f64,
) -> Result<(f64, f64)> {
    let e_wire = per_event_wire_energy(array_side, geometry, volts)?;
    let e_comm = comm.event_energy(volts);
    let mut wire = 0.0;
    let mut units = 0u64;
    for (fan_in, fan_out) in network.layers() {
        wire += network.activity * fan_in as f64 * e_wire;
        let c = layer_event_counts(fan_in, fan_out, array_side);
        units += if comm.hop_scaled { c.hops } else { c.crossing };
    }
    Ok((wire, network.activity * units as f64 * e_comm))
}

/// Energies, latency and savings against the monolithic array whose side is
/// the largest layer size.
pub fn evaluate(
    network: &NetworkShape,
    array_side: usize,
    geometry: &ArrayGeometry,
    comm: &CommModel,
    volts: f64,
) -> Result<Evaluation> {
    comm.validate()?;
    let p = plan(network, array_side)?;
    let (wire_j, comm_j) = energies(network, array_side, geometry, comm, volts)?;
    let (w0, c0) = energies(network, network.max_layer(), geometry, comm, volts)?;
    let total_j = wire_j + comm_j;
    let base = w0 + c0;
    let savings = if base > 0.0 {
        1.0 - total_j / base
    } else {
        0.0
    };
    let latency_slots = p.latency_slots();
    Ok(Evaluation {
        array_side,
        arrays: p.total_arrays(),
        time_mux: latency_slots,
        wire_j,
        comm_j,
        total_j,
        latency_slots,
        latency_s: latency_slots as f64 * comm.latency_per_slot,
        savings,
    })
}
