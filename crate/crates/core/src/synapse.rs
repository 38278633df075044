//! Two-cell differential synapse.
//!
//! The weight is `alpha * (g_pos - g_neg)`. Both directions are realized with
//! gradual RESET only: potentiation lowers `g_neg`, depression lowers `g_pos`.
//! When a cell runs out of headroom the pair is refreshed: both cells are SET
//! back to the top of their windows and the weight is rewritten with
//! read-verify RESET pulses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, DeviceState, Polarity, PulseSpec};
use crate::energy::EnergyMeter;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Potentiate,
    Depress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshTrigger {
    /// Refresh when a floored cell is asked to decrease further.
    OnFloor,
    /// Refresh every `n` programming updates of a synapse.
    Periodic(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefreshPolicy {
    /// Weight units.
    pub tolerance_w: f64,
    pub max_pulses: u32,
    pub trigger: RefreshTrigger,
}

impl Default for RefreshPolicy {
    fn default() -> Self {
        Self {
            tolerance_w: 0.02,
            max_pulses: 400,
            trigger: RefreshTrigger::OnFloor,
        }
    }
}

impl RefreshPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_w > 0.0) || self.max_pulses == 0 {
            return Err(Error::InvalidParameter(
                "refresh needs tolerance_w > 0 and max_pulses >= 1".into(),
            ));
        }
        if self.trigger == RefreshTrigger::Periodic(0) {
            return Err(Error::InvalidParameter(
                "periodic refresh interval must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one programming request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProgramOutcome {
    pub applied: u32,
    /// Requested pulses not applied because the target cell was floored.
    pub lost: u32,
    pub refresh_needed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RefreshReport {
    pub set_pulses: u32,
    /// Closed-loop RESET pulses.
    pub reset_pulses: u32,
    /// `|weight - target|` after the refresh.
    pub residual: f64,
    pub converged: bool,
}

impl RefreshReport {
    pub fn pulses(&self) -> u32 {
        self.set_pulses + self.reset_pulses
    }
}

/// Rounds a weight update onto a whole number of pulses.
pub fn map_weight_update(
    delta_w: f64,
    dw_per_pulse: f64,
    max_pulses_per_update: u32,
) -> (Direction, u32) {
    let direction = if delta_w < 0.0 {
        Direction::Depress
    } else {
        Direction::Potentiate
    };
    let n = (delta_w.abs() / dw_per_pulse).round();
    let n = if n >= max_pulses_per_update as f64 {
        max_pulses_per_update
    } else {
        n as u32
    };
    (direction, n)
}

/// Weight scale that maps the nominal conductance window onto one weight unit.
pub fn nominal_alpha(params: &DeviceParams) -> f64 {
    1.0 / (params.g_max - params.g_min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferentialSynapse {
    pub pos: DeviceState,
    pub neg: DeviceState,
    pub alpha: f64,
}

impl DifferentialSynapse {
    pub fn new(pos: DeviceState, neg: DeviceState, alpha: f64) -> Self {
        Self { pos, neg, alpha }
    }

    pub fn sample<R: Rng + ?Sized>(params: &DeviceParams, alpha: f64, rng: &mut R) -> Result<Self> {
        let pos = params.sample_device(rng)?;
        let neg = params.sample_device(rng)?;
        Ok(Self { pos, neg, alpha })
    }

    pub fn weight(&self) -> f64 {
        self.alpha * (self.pos.g - self.neg.g)
    }

    /// Largest attainable `|weight|` given the two windows.
    pub fn weight_bound(&self) -> f64 {
        self.alpha
            * (self.pos.eff_g_max.max(self.neg.eff_g_max)
                - self.pos.eff_g_min.min(self.neg.eff_g_min))
    }

    fn cell_mut(&mut self, direction: Direction) -> &mut DeviceState {
        match direction {
            Direction::Potentiate => &mut self.neg,
            Direction::Depress => &mut self.pos,
        }
    }

    /// Issues up to `n_pulses` RESET pulses on the cell selected by `direction`.
    /// Pulses that would hit a floored cell are not issued and are reported as
    /// lost, with `refresh_needed` set.
    pub fn program<R: Rng + ?Sized>(
        &mut self,
        params: &DeviceParams,
        direction: Direction,
        n_pulses: u32,
        pulse: &PulseSpec,
        rng: &mut R,
        meter: &mut EnergyMeter,
    ) -> Result<ProgramOutcome> {
        if pulse.polarity != Polarity::Reset {
            return Err(Error::InvalidParameter(
                "synapse programming uses RESET pulses".into(),
            ));
        }
        let mut out = ProgramOutcome::default();
        let cell = self.cell_mut(direction);
        for k in 0..n_pulses {
            if cell.at_floor() {
                out.lost = n_pulses - k;
                out.refresh_needed = true;
                break;
            }
            let before = cell.apply_pulse(params, pulse, rng)?;
            meter.charge_pulse(pulse, before, cell.g);
            out.applied += 1;
        }
        Ok(out)
    }

    /// SETs both cells and rewrites the pre-refresh weight closed-loop.
    ///
    /// Each verify step pulses whichever cell moves the weight toward the
    /// target (`pos` when the weight is too high, `neg` when too low), until
    /// the error is within tolerance, the budget is spent, or the cell that
    /// would need to move is floored.
    pub fn refresh<R: Rng + ?Sized>(
        &mut self,
        params: &DeviceParams,
        policy: &RefreshPolicy,
        pulse: &PulseSpec,
        rng: &mut R,
        meter: &mut EnergyMeter,
    ) -> Result<RefreshReport> {
        let target = self.weight();
        let set = PulseSpec {
            polarity: Polarity::Set,
            ..*pulse
        };
        let reset = PulseSpec {
            polarity: Polarity::Reset,
            ..*pulse
        };
        let mut report = RefreshReport::default();
        for cell in [&mut self.pos, &mut self.neg] {
            let before = cell.apply_pulse(params, &set, rng)?;
            meter.charge_pulse(&set, before, cell.g);
            report.set_pulses += 1;
        }
        loop {
            let err = self.weight() - target;
            if err.abs() <= policy.tolerance_w {
                report.converged = true;
                break;
            }
            if report.reset_pulses >= policy.max_pulses {
                break;
            }
            let cell = if err > 0.0 {
                &mut self.pos
            } else {
                &mut self.neg
            };
            if cell.at_floor() {
                break;
            }
            let before = cell.apply_pulse(params, &reset, rng)?;
            meter.charge_pulse(&reset, before, cell.g);
            report.reset_pulses += 1;
        }
        report.residual = (self.weight() - target).abs();
        Ok(report)
    }
}
