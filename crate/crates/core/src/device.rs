//! Stochastic conductance model of a single RRAM cell.
//!
//! Conductance moves in the log domain. A RESET pulse at amplitude `V` lowers
//! `ln g` by `mu(V) * mu_scale * f(g)` plus Gaussian cycle-to-cycle noise, and
//! the result is clipped to the per-device window `[eff_g_min, eff_g_max]`.
//! SET is one-shot back to the top of the window.
//!
//! `mu(V)` is calibrated from a gradual-level count: a device with dynamic
//! range `g_max / g_min` and `L` levels has `mu = ln(g_max / g_min) / L`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured (pulse amplitude in volts, gradual level count) pairs.
pub const DEFAULT_LEVELS: [(f64, f64); 5] = [
    (1.1, 1000.0),
    (1.15, 270.0),
    (1.2, 170.0),
    (1.25, 90.0),
    (1.3, 45.0),
];

/// Dynamic range at which [`DEFAULT_LEVELS`] are interpreted.
pub const DEFAULT_CALIBRATION_RATIO: f64 = 500.0;

const VOLT_MATCH_TOL: f64 = 1e-9;
/// Log-domain distance below which a decremented conductance snaps onto the floor.
const FLOOR_SNAP: f64 = 1e-9;
const MAX_SAMPLE_ATTEMPTS: usize = 100;

/// Mean per-pulse log-conductance decrement for `levels` levels over `ratio`.
pub fn calibrate_mu(levels: f64, ratio: f64) -> f64 {
    ratio.ln() / levels
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Set,
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub polarity: Polarity,
    /// Volts.
    pub amplitude: f64,
    /// Seconds.
    pub width: f64,
}

impl PulseSpec {
    pub fn reset(amplitude: f64, width: f64) -> Self {
        Self {
            polarity: Polarity::Reset,
            amplitude,
            width,
        }
    }

    pub fn set(amplitude: f64, width: f64) -> Self {
        Self {
            polarity: Polarity::Set,
            amplitude,
            width,
        }
    }

    /// Same amplitude and width with the opposite polarity.
    pub fn flipped(&self) -> Self {
        let polarity = match self.polarity {
            Polarity::Set => Polarity::Reset,
            Polarity::Reset => Polarity::Set,
        };
        Self { polarity, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pulse amplitude {} must be > 0",
                self.amplitude
            )));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pulse width {} must be > 0",
                self.width
            )));
        }
        Ok(())
    }
}

/// Nominal device parameters shared by every cell of an array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Siemens (high-R state).
    pub g_min: f64,
    /// Siemens (low-R state).
    pub g_max: f64,
    /// (volts, mu) pairs; mu in natural-log units per pulse.
    pub mu_table: Vec<(f64, f64)>,
    pub sigma_c2c: f64,
    pub d2d_spread: f64,
    pub nonlinearity_gamma: f64,
    pub set_spread: f64,
}

impl DeviceParams {
    /// Parameters with the default level table calibrated at the default ratio,
    /// low-R state `r_on` ohms and dynamic range `ratio`. No variation.
    pub fn nominal(r_on: f64, ratio: f64) -> Self {
        let mu_table = DEFAULT_LEVELS
            .iter()
            .map(|&(v, levels)| (v, calibrate_mu(levels, DEFAULT_CALIBRATION_RATIO)))
            .collect();
        Self {
            g_min: 1.0 / (r_on * ratio),
            g_max: 1.0 / r_on,
            mu_table,
            sigma_c2c: 0.0,
            d2d_spread: 0.0,
            nonlinearity_gamma: 0.0,
            set_spread: 0.0,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.g_max / self.g_min
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.g_min > 0.0 && self.g_min < self.g_max && self.g_max.is_finite()) {
            return bad(format!(
                "need 0 < g_min < g_max, got g_min={} g_max={}",
                self.g_min, self.g_max
            ));
        }
        if self.mu_table.is_empty() {
            return bad("mu_table is empty".into());
        }
        for &(v, mu) in &self.mu_table {
            if !(v > 0.0 && mu > 0.0 && mu.is_finite()) {
                return bad(format!("mu_table entry ({v} V, {mu}) must be positive"));
            }
        }
        for (name, x) in [
            ("sigma_c2c", self.sigma_c2c),
            ("d2d_spread", self.d2d_spread),
            ("set_spread", self.set_spread),
            ("nonlinearity_gamma", self.nonlinearity_gamma),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(format!("{name} must be >= 0, got {x}"));
            }
        }
        Ok(())
    }

    /// Calibrated mean log decrement at `volts`.
    pub fn mu(&self, volts: f64) -> Result<f64> {
        self.mu_table
            .iter()
            .find(|(v, _)| (v - volts).abs() <= VOLT_MATCH_TOL)
            .map(|&(_, mu)| mu)
            .ok_or(Error::CalibrationMissing { volts })
    }

    /// Number of gradual levels across the nominal window at `volts`.
    pub fn num_levels(&self, volts: f64) -> Result<f64> {
        Ok(self.ratio().ln() / self.mu(volts)?)
    }

    /// Draws one device with device-to-device variation applied.
    pub fn sample_device<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DeviceState> {
        let s = self.d2d_spread;
        let eff_mu_scale = (rng.sample::<f64, _>(StandardNormal) * s).exp();
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let zmax: f64 = rng.sample(StandardNormal);
            let zmin: f64 = rng.sample(StandardNormal);
            let eff_g_max = self.g_max * (zmax * s).exp();
            let eff_g_min = self.g_min * (zmin * s).exp();
            if eff_g_min < eff_g_max {
                return Ok(DeviceState {
                    g: eff_g_max,
                    eff_g_min,
                    eff_g_max,
                    eff_mu_scale,
                    pulse_count: 0,
                });
            }
        }
        Err(Error::DeviceSampling {
            attempts: MAX_SAMPLE_ATTEMPTS,
        })
    }

    /// A device sitting exactly on the nominal parameters.
    pub fn nominal_device(&self) -> DeviceState {
        DeviceState {
            g: self.g_max,
            eff_g_min: self.g_min,
            eff_g_max: self.g_max,
            eff_mu_scale: 1.0,
            pulse_count: 0,
        }
    }
}

/// One cell's conductance and its frozen device-to-device parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub g: f64,
    pub eff_g_min: f64,
    pub eff_g_max: f64,
    pub eff_mu_scale: f64,
    pub pulse_count: u64,
}

impl DeviceState {
    pub fn at_floor(&self) -> bool {
        self.g <= self.eff_g_min
    }

    /// State-dependent window `f(g)`; identically one when `gamma == 0`.
    pub fn window(&self, gamma: f64) -> f64 {
        if gamma == 0.0 {
            return 1.0;
        }
        let x = ((self.g - self.eff_g_min) / (self.eff_g_max - self.eff_g_min)).clamp(0.0, 1.0);
        x.powf(gamma)
    }

    /// Applies one programming pulse and returns the conductance before it.
    pub fn apply_pulse<R: Rng + ?Sized>(
        &mut self,
        params: &DeviceParams,
        pulse: &PulseSpec,
        rng: &mut R,
    ) -> Result<f64> {
        let before = self.g;
        match pulse.polarity {
            Polarity::Reset => {
                let mu = params.mu(pulse.amplitude)?;
                let noise = if params.sigma_c2c > 0.0 {
                    params.sigma_c2c * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let step = mu * self.eff_mu_scale * self.window(params.nonlinearity_gamma) + noise;
                let ln_g = self.g.ln() - step;
                self.g = if ln_g - self.eff_g_min.ln() < FLOOR_SNAP {
                    self.eff_g_min
                } else {
                    ln_g.exp().min(self.eff_g_max)
                };
            }
            Polarity::Set => {
                let jitter = if params.set_spread > 0.0 {
                    params.set_spread * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                self.g = (self.eff_g_max * jitter.exp()).clamp(self.eff_g_min, self.eff_g_max);
            }
        }
        self.pulse_count += 1;
        Ok(before)
    }
}
