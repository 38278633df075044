//! Supervised restricted Boltzmann machine trained by contrastive divergence.
//!
//! The visible layer is the binary image followed by ten one-hot label units.
//! Weights are either plain reals or two-cell device synapses programmed with
//! RESET pulses; biases are always digital. Classification picks the label
//! whose clamped visible vector has the lowest free energy.

mod sweep;
mod train;

pub use sweep::{energy_sweep, variation_sweep, EnergySweepRow, SweepRow};
pub use train::{evaluate, train, EpochReport, TrainReport};

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::crossbar::ArrayGeometry;
use crate::device::{DeviceParams, PulseSpec};
use crate::energy::EnergyMeter;
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::synapse::{
    map_weight_update, nominal_alpha, DifferentialSynapse, RefreshPolicy, RefreshTrigger,
};

pub const N_LABELS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynapseMode {
    IdealReal,
    DeviceBacked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbmConfig {
    pub n_pixels: usize,
    pub n_labels: usize,
    pub n_hidden: usize,
    pub learning_rate: f64,
    pub cd_steps: usize,
    pub epochs: usize,
    /// Weight change represented by one pulse; derived from the device when unset.
    pub dw_per_pulse: Option<f64>,
    pub max_pulses_per_update: u32,
    pub synapse_mode: SynapseMode,
    /// Volts.
    pub pulse_voltage: f64,
    /// Seconds.
    pub pulse_width: f64,
    /// Samples per weight update.
    pub minibatch: usize,
    /// Std of the initial real-valued weights.
    pub init_std: f64,
    /// Read-out gain applied on top of the normalized synapse scale.
    pub weight_gain: f64,
}

impl Default for RbmConfig {
    fn default() -> Self {
        Self {
            n_pixels: 196,
            n_labels: N_LABELS,
            n_hidden: 100,
            learning_rate: 0.06,
            cd_steps: 1,
            epochs: 3,
            dw_per_pulse: None,
            max_pulses_per_update: 8,
            synapse_mode: SynapseMode::DeviceBacked,
            pulse_voltage: 1.1,
            pulse_width: 20e-9,
            minibatch: 1,
            init_std: 0.01,
            weight_gain: 12.0,
        }
    }
}

impl RbmConfig {
    pub fn n_visible(&self) -> usize {
        self.n_pixels + self.n_labels
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.n_pixels == 0
            || self.n_hidden == 0
            || self.epochs == 0
            || self.cd_steps == 0
            || self.minibatch == 0
        {
            return bad("n_pixels, n_hidden, epochs, cd_steps and minibatch must be >= 1");
        }
        if self.n_labels != N_LABELS {
            return bad("n_labels must be 10");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if let Some(dw) = self.dw_per_pulse {
            if !(dw > 0.0 && dw.is_finite()) {
                return bad("dw_per_pulse must be > 0");
            }
        }
        if self.max_pulses_per_update == 0 {
            return bad("max_pulses_per_update must be >= 1");
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return bad("init_std must be >= 0");
        }
        if !(self.weight_gain > 0.0 && self.weight_gain.is_finite()) {
            return bad("weight_gain must be > 0");
        }
        PulseSpec::reset(self.pulse_voltage, self.pulse_width).validate()
    }

    /// Weight scale of a synapse built from `device`.
    pub fn alpha(&self, device: &DeviceParams) -> f64 {
        self.weight_gain * nominal_alpha(device)
    }

    /// The configured pulse quantum, or the first-pulse weight step at the
    /// configured voltage.
    pub fn resolved_dw_per_pulse(&self, device: &DeviceParams) -> Result<f64> {
        match self.dw_per_pulse {
            Some(dw) => Ok(dw),
            None => Ok(self.weight_gain * default_dw_per_pulse(device, self.pulse_voltage)?),
        }
    }
}

/// Device-side settings shared by every synapse of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hardware {
    pub device: DeviceParams,
    pub refresh: RefreshPolicy,
    /// Array whose wires every programming pulse charges.
    pub geometry: ArrayGeometry,
}

/// Per-run counters of the device update path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Pulses asked for by the learning rule after discretization.
    pub requested_pulses: u64,
    /// Programming pulses actually applied (first attempt plus retry).
    pub program_pulses: u64,
    /// Requested pulses still lost after the retry.
    pub lost_pulses: u64,
    /// Pulses re-issued after a refresh.
    pub retried_pulses: u64,
    pub refreshes: u64,
    /// SET and verify pulses spent inside refreshes.
    pub refresh_pulses: u64,
    pub unconverged_refreshes: u64,
}

/// Device synapses of a DEVICE_BACKED model.
#[derive(Debug, Clone)]
pub struct DeviceBank {
    pub params: DeviceParams,
    pub policy: RefreshPolicy,
    pub pulse: PulseSpec,
    pub dw_per_pulse: f64,
    pub synapses: Vec<DifferentialSynapse>,
    /// Programming updates per synapse since its last refresh.
    since_refresh: Vec<u32>,
    pub meter: EnergyMeter,
    pub stats: UpdateStats,
}

/// Default pulse quantum: the weight change of the first RESET pulse applied
/// to a cell sitting at `g_max`.
pub fn default_dw_per_pulse(params: &DeviceParams, volts: f64) -> Result<f64> {
    let mu = params.mu(volts)?;
    Ok(nominal_alpha(params) * params.g_max * (1.0 - (-mu).exp()))
}

/// Weight and bias changes of one (mini)batch. Weight rows are stored only for
/// visible units that carry a nonzero change.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub n_hidden: usize,
    pub rows: BTreeMap<usize, Vec<f64>>,
    pub visible: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_hidden,
            rows: BTreeMap::new(),
            visible: vec![0.0; n_visible],
            hidden: vec![0.0; n_hidden],
        }
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows.get(&i).map_or(0.0, |r| r[j])
    }

    pub fn add(&mut self, other: &Gradient) {
        for (&i, row) in &other.rows {
            let dst = self
                .rows
                .entry(i)
                .or_insert_with(|| vec![0.0; self.n_hidden]);
            dst.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        self.visible
            .iter_mut()
            .zip(&other.visible)
            .for_each(|(a, b)| *a += b);
        self.hidden
            .iter_mut()
            .zip(&other.hidden)
            .for_each(|(a, b)| *a += b);
    }

    pub fn scale(&mut self, s: f64) {
        self.rows.values_mut().flatten().for_each(|x| *x *= s);
        self.visible.iter_mut().for_each(|x| *x *= s);
        self.hidden.iter_mut().for_each(|x| *x *= s);
    }
}

/// Overflow-safe logistic, kept strictly inside (0, 1).
pub fn logistic(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Overflow-safe `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn bernoulli<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Vec<u8> {
    p.iter().map(|&p| u8::from(rng.gen::<f64>() < p)).collect()
}

#[derive(Debug, Clone)]
pub struct RbmModel {
    pub config: RbmConfig,
    /// Row-major `n_visible x n_hidden`. In DEVICE_BACKED mode a write-through
    /// copy of the synapse reads.
    weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub device: Option<DeviceBank>,
    /// Device noise stream.
    rng: Stream,
}

impl RbmModel {
    /// Builds a model. Initial weights come from `rng`, which is then kept for
    /// device noise.
    pub fn init(config: &RbmConfig, hw: &Hardware, mut rng: Stream) -> Result<Self> {
        config.validate()?;
        let nv = config.n_visible();
        let nh = config.n_hidden;
        let (weights, device) = match config.synapse_mode {
            SynapseMode::IdealReal => {
                let normal = Normal::new(0.0, config.init_std)
                    .map_err(|e| Error::InvalidParameter(format!("init_std: {e}")))?;
                (
                    (0..nv * nh).map(|_| normal.sample(&mut rng)).collect(),
                    None,
                )
            }
            SynapseMode::DeviceBacked => {
                hw.device.validate()?;
                hw.refresh.validate()?;
                hw.geometry.validate()?;
                let dw = config.resolved_dw_per_pulse(&hw.device)?;
                hw.device.mu(config.pulse_voltage)?;
                let alpha = config.alpha(&hw.device);
                let synapses = (0..nv * nh)
                    .map(|_| DifferentialSynapse::sample(&hw.device, alpha, &mut rng))
                    .collect::<Result<Vec<_>>>()?;
                let weights = synapses.iter().map(|s| s.weight()).collect();
                let bank = DeviceBank {
                    params: hw.device.clone(),
                    policy: hw.refresh,
                    pulse: PulseSpec::reset(config.pulse_voltage, config.pulse_width),
                    dw_per_pulse: dw,
                    since_refresh: vec![0; synapses.len()],
                    synapses,
                    meter: EnergyMeter::new(hw.geometry),
                    stats: UpdateStats::default(),
                };
                (weights, Some(bank))
            }
        };
        Ok(Self {
            config: *config,
            weights,
            visible_bias: vec![0.0; nv],
            hidden_bias: vec![0.0; nh],
            device,
            rng,
        })
    }

    /// Inference-only model with the given real weights.
    pub fn from_weights(
        config: &RbmConfig,
        weights: Vec<f64>,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
    ) -> Result<Self> {
        let nv = config.n_visible();
        let nh = config.n_hidden;
        if weights.len() != nv * nh || visible_bias.len() != nv || hidden_bias.len() != nh {
            return Err(Error::InvalidParameter(
                "weight or bias shape does not match the config".into(),
            ));
        }
        let config = RbmConfig {
            synapse_mode: SynapseMode::IdealReal,
            ..*config
        };
        Ok(Self {
            config,
            weights,
            visible_bias,
            hidden_bias,
            device: None,
            rng: crate::rng::derive_stream(0, &[]),
        })
    }

    pub fn n_visible(&self) -> usize {
        self.config.n_visible()
    }

    pub fn n_hidden(&self) -> usize {
        self.config.n_hidden
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.config.n_hidden + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        let nh = self.config.n_hidden;
        &self.weights[i * nh..(i + 1) * nh]
    }

    /// Number of cached weights that differ from a fresh device read.
    pub fn weight_cache_mismatches(&self) -> usize {
        match &self.device {
            Some(bank) => bank
                .synapses
                .iter()
                .zip(&self.weights)
                .filter(|(s, w)| s.weight() != **w)
                .count(),
            None => 0,
        }
    }

    /// `logistic(c + W^T v)` for a binary visible vector.
    pub fn hidden_probs(&self, v: &[u8]) -> Vec<f64> {
        let mut x = self.hidden_bias.clone();
        for (i, _) in v.iter().enumerate().filter(|(_, &b)| b != 0) {
            x.iter_mut().zip(self.row(i)).for_each(|(a, w)| *a += w);
        }
        x.into_iter().map(logistic).collect()
    }

    /// `logistic(b + W h)` for a binary hidden vector.
    pub fn visible_probs(&self, h: &[u8]) -> Vec<f64> {
        let active: Vec<usize> = h
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(j, _)| j)
            .collect();
        (0..self.n_visible())
            .map(|i| {
                let row = self.row(i);
                logistic(self.visible_bias[i] + active.iter().map(|&j| row[j]).sum::<f64>())
            })
            .collect()
    }

    /// One CD-k estimate of the learning-rate-scaled update for `v_data`.
    pub fn cd_step<R: Rng + ?Sized>(&self, v_data: &[u8], rng: &mut R) -> Gradient {
        assert_eq!(v_data.len(), self.n_visible(), "visible vector length");
        let lr = self.config.learning_rate;
        let h_prob = self.hidden_probs(v_data);
        let mut h = bernoulli(&h_prob, rng);
        let mut v_recon = Vec::new();
        let mut h_recon_prob = Vec::new();
        for step in 0..self.config.cd_steps {
            v_recon = bernoulli(&self.visible_probs(&h), rng);
            h_recon_prob = self.hidden_probs(&v_recon);
            if step + 1 < self.config.cd_steps {
                h = bernoulli(&h_recon_prob, rng);
            }
        }
        let nh = self.n_hidden();
        let mut g = Gradient::zeros(self.n_visible(), nh);
        for i in 0..self.n_visible() {
            let (a, b) = (v_data[i] != 0, v_recon[i] != 0);
            g.visible[i] = lr * (f64::from(v_data[i]) - f64::from(v_recon[i]));
            if !(a || b) {
                continue;
            }
            let row = (0..nh)
                .map(|j| {
                    let pos = if a { h_prob[j] } else { 0.0 };
                    let neg = if b { h_recon_prob[j] } else { 0.0 };
                    lr * (pos - neg)
                })
                .collect();
            g.rows.insert(i, row);
        }
        g.hidden = h_prob
            .iter()
            .zip(&h_recon_prob)
            .map(|(p, q)| lr * (p - q))
            .collect();
        g
    }

    /// Applies a gradient: real weights directly, device weights through pulses
    /// with refresh-and-retry on saturation. Biases are updated digitally.
    pub fn apply_updates(&mut self, g: &Gradient) -> Result<()> {
        let nh = self.n_hidden();
        self.visible_bias
            .iter_mut()
            .zip(&g.visible)
            .for_each(|(b, d)| *b += d);
        self.hidden_bias
            .iter_mut()
            .zip(&g.hidden)
            .for_each(|(b, d)| *b += d);
        let Some(bank) = self.device.as_mut() else {
            for (&i, row) in &g.rows {
                self.weights[i * nh..(i + 1) * nh]
                    .iter_mut()
                    .zip(row)
                    .for_each(|(w, d)| *w += d);
            }
            return Ok(());
        };
        let max = self.config.max_pulses_per_update;
        for (&i, row) in &g.rows {
            for (j, &dw) in row.iter().enumerate() {
                let (direction, n) = map_weight_update(dw, bank.dw_per_pulse, max);
                if n == 0 {
                    continue;
                }
                let k = i * nh + j;
                bank.update_synapse(k, direction, n, &mut self.rng)?;
                self.weights[k] = bank.synapses[k].weight();
            }
        }
        Ok(())
    }

    /// Free energy of each label clamped next to `image`.
    pub fn free_energies(&self, image: &[u8]) -> [f64; N_LABELS] {
        assert_eq!(image.len(), self.config.n_pixels, "image length");
        let mut base = self.hidden_bias.clone();
        let mut bias_term = 0.0;
        for (i, _) in image.iter().enumerate().filter(|(_, &b)| b != 0) {
            base.iter_mut().zip(self.row(i)).for_each(|(a, w)| *a += w);
            bias_term += self.visible_bias[i];
        }
        let mut f = [0.0; N_LABELS];
        for (l, fl) in f.iter_mut().enumerate() {
            let u = self.config.n_pixels + l;
            let s: f64 = base
                .iter()
                .zip(self.row(u))
                .map(|(a, w)| softplus(a + w))
                .sum();
            *fl = -(bias_term + self.visible_bias[u]) - s;
        }
        f
    }

    /// Label with the lowest free energy; ties go to the smallest label.
    pub fn classify(&self, image: &[u8]) -> u8 {
        argmin(&self.free_energies(image))
    }

    /// Inference copy with weights uniformly quantized to `2^bits` levels
    /// spanning `[min W, max W]`.
    pub fn quantize_weights(&self, bits: u32) -> Result<Self> {
        let q = quantize(&self.weights, bits)?;
        Self::from_weights(
            &self.config,
            q,
            self.visible_bias.clone(),
            self.hidden_bias.clone(),
        )
    }
}

impl DeviceBank {
    fn update_synapse(
        &mut self,
        k: usize,
        direction: crate::synapse::Direction,
        n: u32,
        rng: &mut Stream,
    ) -> Result<()> {
        self.stats.requested_pulses += u64::from(n);
        let syn = &mut self.synapses[k];
        let out = syn.program(
            &self.params,
            direction,
            n,
            &self.pulse,
            rng,
            &mut self.meter,
        )?;
        self.stats.program_pulses += u64::from(out.applied);
        let mut lost = out.lost;
        match self.policy.trigger {
            RefreshTrigger::OnFloor => {
                if out.refresh_needed {
                    Self::refresh(
                        syn,
                        &self.params,
                        &self.policy,
                        &self.pulse,
                        rng,
                        &mut self.meter,
                        &mut self.stats,
                    )?;
                    self.since_refresh[k] = 0;
                    let retry = syn.program(
                        &self.params,
                        direction,
                        lost,
                        &self.pulse,
                        rng,
                        &mut self.meter,
                    )?;
                    self.stats.retried_pulses += u64::from(lost);
                    self.stats.program_pulses += u64::from(retry.applied);
                    lost = retry.lost;
                }
            }
            RefreshTrigger::Periodic(every) => {
                self.since_refresh[k] += 1;
                if self.since_refresh[k] >= every {
                    Self::refresh(
                        syn,
                        &self.params,
                        &self.policy,
                        &self.pulse,
                        rng,
                        &mut self.meter,
                        &mut self.stats,
                    )?;
                    self.since_refresh[k] = 0;
                }
            }
        }
        self.stats.lost_pulses += u64::from(lost);
        Ok(())
    }

    fn refresh(
        syn: &mut DifferentialSynapse,
        params: &DeviceParams,
        policy: &RefreshPolicy,
        pulse: &PulseSpec,
        rng: &mut Stream,
        meter: &mut EnergyMeter,
        stats: &mut UpdateStats,
    ) -> Result<()> {
        let r = syn.refresh(params, policy, pulse, rng, meter)?;
        stats.refreshes += 1;
        stats.refresh_pulses += u64::from(r.pulses());
        stats.unconverged_refreshes += u64::from(!r.converged);
        Ok(())
    }
}

/// Index of the smallest value; the first one wins ties.
pub fn argmin(values: &[f64]) -> u8 {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = k;
        }
    }
    best as u8
}

/// Uniform quantization of `values` onto `2^bits` levels over their range.
pub fn quantize(values: &[f64], bits: u32) -> Result<Vec<f64>> {
    if !(1..=16).contains(&bits) {
        return Err(Error::InvalidParameter(format!(
            "bits must be in 1..=16, got {bits}"
        )));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || hi <= lo {
        return Ok(values.to_vec());
    }
    let steps = ((1u32 << bits) - 1) as f64;
    let step = (hi - lo) / steps;
    Ok(values
        .iter()
        .map(|&w| {
            let k = ((w - lo) / step).round().clamp(0.0, steps);
            if k == steps {
                hi
            } else {
                lo + k * step
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use crate::synapse::RefreshTrigger;

    fn hw(d2d: f64) -> Hardware {
        Hardware {
            device: DeviceParams {
                d2d_spread: d2d,
                ..DeviceParams::nominal(600.0, 500.0)
            },
            refresh: RefreshPolicy {
                tolerance_w: 0.01,
                max_pulses: 200,
                trigger: RefreshTrigger::OnFloor,
            },
            geometry: ArrayGeometry::default(),
        }
    }

    fn small(mode: SynapseMode) -> RbmConfig {
        RbmConfig {
            n_pixels: 4,
            n_hidden: 3,
            synapse_mode: mode,
            ..RbmConfig::default()
        }
    }

    #[test]
    fn logistic_and_softplus_are_safe() {
        for x in [-500.0, -40.0, 0.0, 40.0, 500.0, -1e308, 1e308] {
            let p = logistic(x);
            assert!(p > 0.0 && p < 1.0, "{x} -> {p}");
            assert!(softplus(x).is_finite());
        }
        assert_eq!(logistic(0.0), 0.5);
        assert_eq!(softplus(500.0), 500.0);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(softplus(-500.0) > 0.0);
    }

    #[test]
    fn identical_devices_start_at_zero_weight() {
        let m = RbmModel::init(
            &small(SynapseMode::DeviceBacked),
            &hw(0.0),
            derive_stream(1, &[]),
        )
        .unwrap();
        assert!(m.weights().iter().all(|&w| w == 0.0));
        assert!(m
            .hidden_bias
            .iter()
            .chain(&m.visible_bias)
            .all(|&b| b == 0.0));
    }

    #[test]
    fn device_spread_breaks_symmetry() {
        let m = RbmModel::init(
            &small(SynapseMode::DeviceBacked),
            &hw(0.25),
            derive_stream(1, &[]),
        )
        .unwrap();
        let col = |j: usize| {
            (0..m.n_visible())
                .map(|i| m.weight(i, j))
                .collect::<Vec<_>>()
        };
        assert_ne!(col(0), col(1));
        assert_ne!(col(1), col(2));
        assert_eq!(m.weight_cache_mismatches(), 0);
    }

    #[test]
    fn ideal_init_is_reproducible() {
        let c = small(SynapseMode::IdealReal);
        let a = RbmModel::init(&c, &hw(0.0), derive_stream(9, &[])).unwrap();
        let b = RbmModel::init(&c, &hw(0.0), derive_stream(9, &[])).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert!(a.weights().iter().any(|&w| w != 0.0));
    }

    #[test]
    fn zero_model_hidden_prob_is_half() {
        let mut m = RbmModel::init(
            &small(SynapseMode::IdealReal),
            &hw(0.0),
            derive_stream(1, &[]),
        )
        .unwrap();
        m.weights.iter_mut().for_each(|w| *w = 0.0);
        assert!(m.hidden_probs(&[1; 14]).iter().all(|&p| p == 0.5));
    }

    #[test]
    fn zero_gradient_issues_no_pulses() {
        let mut m = RbmModel::init(
            &small(SynapseMode::DeviceBacked),
            &hw(0.0),
            derive_stream(1, &[]),
        )
        .unwrap();
        let mut g = Gradient::zeros(14, 3);
        g.rows.insert(2, vec![0.0; 3]);
        m.apply_updates(&g).unwrap();
        let bank = m.device.as_ref().unwrap();
        assert_eq!(bank.meter.ledger.pulse_events, 0);
        assert_eq!(bank.stats, UpdateStats::default());
    }

    #[test]
    fn three_quanta_become_three_pulses_on_neg() {
        let mut m = RbmModel::init(
            &small(SynapseMode::DeviceBacked),
            &hw(0.0),
            derive_stream(1, &[]),
        )
        .unwrap();
        let dw = m.device.as_ref().unwrap().dw_per_pulse;
        let mut g = Gradient::zeros(14, 3);
        g.rows.insert(0, vec![3.0 * dw, 0.0, 0.0]);
        m.apply_updates(&g).unwrap();
        let bank = m.device.as_ref().unwrap();
        assert_eq!(bank.synapses[0].neg.pulse_count, 3);
        assert_eq!(bank.synapses[0].pos.pulse_count, 0);
        assert_eq!(bank.meter.ledger.pulse_events, 3);
        assert!(m.weight(0, 0) > 0.0);
    }

    #[test]
    fn floored_neg_triggers_one_refresh() {
        let mut m = RbmModel::init(
            &small(SynapseMode::DeviceBacked),
            &hw(0.0),
            derive_stream(1, &[]),
        )
        .unwrap();
        let dw = m.device.as_ref().unwrap().dw_per_pulse;
        {
            let bank = m.device.as_mut().unwrap();
            let s = &mut bank.synapses[0];
            s.neg.g = s.neg.eff_g_min;
            s.pos.g = s.pos.eff_g_max * 0.5;
            m.weights[0] = s.weight();
        }
        let mut g = Gradient::zeros(14, 3);
        g.rows.insert(0, vec![dw, 0.0, 0.0]);
        m.apply_updates(&g).unwrap();
        let bank = m.device.as_ref().unwrap();
        assert_eq!(bank.stats.refreshes, 1);
        assert_eq!(bank.stats.retried_pulses, 1);
        assert_eq!(bank.stats.lost_pulses, 0);
        assert_eq!(
            bank.meter.ledger.pulse_events,
            bank.stats.program_pulses + bank.stats.refresh_pulses
        );
        assert_eq!(m.weight_cache_mismatches(), 0);
    }

    #[test]
    fn tie_goes_to_label_zero() {
        let c = small(SynapseMode::IdealReal);
        let m = RbmModel::from_weights(&c, vec![0.0; 42], vec![0.0; 14], vec![0.0; 3]).unwrap();
        assert_eq!(m.classify(&[1, 0, 1, 1]), 0);
        assert_eq!(argmin(&[1.0, 0.5, 0.5]), 1);
    }

    #[test]
    fn hand_wired_label_wins() {
        let c = RbmConfig {
            n_pixels: 4,
            n_hidden: 1,
            ..small(SynapseMode::IdealReal)
        };
        let mut w = vec![0.0; 14];
        w[4 + 7] = 20.0;
        let m = RbmModel::from_weights(&c, w, vec![0.0; 14], vec![0.0; 1]).unwrap();
        assert_eq!(m.classify(&[0, 1, 1, 0]), 7);
    }

    #[test]
    fn quantize_examples() {
        let w: Vec<f64> = (0..=1000).map(|k| -1.0 + 2.0 * k as f64 / 1000.0).collect();
        let q = quantize(&w, 16).unwrap();
        let err = w
            .iter()
            .zip(&q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2.0 / 65535.0 / 2.0 * (1.0 + 1e-12), "{err}");
        let q = quantize(&w, 1).unwrap();
        assert!(q.iter().all(|&x| x == -1.0 || x == 1.0));
        assert!(quantize(&w, 0).is_err());
        assert!(quantize(&w, 17).is_err());
    }

    #[test]
    fn cd_fixed_point_has_zero_weight_delta() {
        // Saturated model: reconstruction reproduces the data exactly.
        let c = RbmConfig {
            n_pixels: 4,
            n_hidden: 2,
            ..small(SynapseMode::IdealReal)
        };
        let v: Vec<u8> = vec![1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let vb: Vec<f64> = v
            .iter()
            .map(|&b| if b == 1 { 800.0 } else { -800.0 })
            .collect();
        let m = RbmModel::from_weights(&c, vec![0.0; 28], vb, vec![900.0, -900.0]).unwrap();
        let g = m.cd_step(&v, &mut derive_stream(0, &[]));
        assert!(g.rows.values().flatten().all(|&d| d == 0.0));
        assert!(g.visible.iter().all(|&d| d == 0.0));
    }
}
