use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Hardware, RbmConfig, SynapseMode};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Absolute cycle-to-cycle std (log-conductance units).
    pub sigma: f64,
    pub voltage: f64,
    pub seed: u64,
    pub final_error: f64,
    pub epochs_to_best: usize,
    pub device_j: f64,
    pub wire_j: f64,
    pub refreshes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySweepRow {
    pub low_r_ohms: f64,
    #[serde(flatten)]
    pub run: SweepRow,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} grid is empty")));
    }
    Ok(())
}

/// Pins the pulse quantum of `config` so that every cell of a sweep uses the
/// same learning rule.
fn pin_quantum(config: &RbmConfig, hw: &Hardware) -> Result<RbmConfig> {
    let mut cfg = *config;
    if cfg.synapse_mode == SynapseMode::DeviceBacked {
        cfg.dw_per_pulse = Some(cfg.resolved_dw_per_pulse(&hw.device)?);
    }
    Ok(cfg)
}

/// One training run per `(sigma, voltage, seed)`; with `sigma_relative` the
/// sigma grid is in multiples of `mu` at each voltage. Replica `s` uses stream path
/// `[s]` in every cell, so cells differ only in their device parameters; the
/// pulse quantum is the one resolved at the base voltage. Rows come back in
/// grid order whatever the thread count.
#[allow(clippy::too_many_arguments)]
pub fn variation_sweep(
    config: &RbmConfig,
    hw: &Hardware,
    train_set: &Dataset,
    test_set: &Dataset,
    sigmas: &[f64],
    sigma_relative: bool,
    voltages: &[f64],
    n_seeds: u64,
    master_seed: u64,
) -> Result<Vec<SweepRow>> {
    check_grid("sigma", sigmas)?;
    check_grid("voltage", voltages)?;
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let config = &pin_quantum(config, hw)?;
    let cells: Vec<(f64, f64, u64)> = sigmas
        .iter()
        .flat_map(|&s| {
            voltages
                .iter()
                .flat_map(move |&v| (0..n_seeds).map(move |k| (s, v, k)))
        })
        .collect();
    cells
        .into_par_iter()
        .map(|(s, voltage, seed)| {
            let cfg = RbmConfig {
                pulse_voltage: voltage,
                ..*config
            };
            let mut hw = hw.clone();
            let sigma = if sigma_relative {
                s * hw.device.mu(voltage)?
            } else {
                s
            };
            hw.device.sigma_c2c = sigma;
            run(&cfg, &hw, train_set, test_set, master_seed, sigma, seed)
        })
        .collect()
}

/// Training energy and error over a grid of low-R values and pulse voltages.
#[allow(clippy::too_many_arguments)]
pub fn energy_sweep(
    config: &RbmConfig,
    hw: &Hardware,
    train_set: &Dataset,
    test_set: &Dataset,
    low_r_ohms: &[f64],
    voltages: &[f64],
    n_seeds: u64,
    master_seed: u64,
) -> Result<Vec<EnergySweepRow>> {
    check_grid("low-R", low_r_ohms)?;
    check_grid("voltage", voltages)?;
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let config = &pin_quantum(config, hw)?;
    let ratio = hw.device.ratio();
    let cells: Vec<(f64, f64, u64)> = low_r_ohms
        .iter()
        .flat_map(|&r| {
            voltages
                .iter()
                .flat_map(move |&v| (0..n_seeds).map(move |k| (r, v, k)))
        })
        .collect();
    cells
        .into_par_iter()
        .map(|(r_on, voltage, seed)| {
            let cfg = RbmConfig {
                pulse_voltage: voltage,
                ..*config
            };
            let mut hw = hw.clone();
            hw.device.g_max = 1.0 / r_on;
            hw.device.g_min = 1.0 / (r_on * ratio);
            let sigma = hw.device.sigma_c2c;
            let run = run(&cfg, &hw, train_set, test_set, master_seed, sigma, seed)?;
            Ok(EnergySweepRow {
                low_r_ohms: r_on,
                run,
            })
        })
        .collect()
}

fn run(
    cfg: &RbmConfig,
    hw: &Hardware,
    train_set: &Dataset,
    test_set: &Dataset,
    master_seed: u64,
    sigma: f64,
    seed: u64,
) -> Result<SweepRow> {
    let (_, report) = train(cfg, hw, train_set, test_set, master_seed, &[seed])?;
    Ok(SweepRow {
        sigma,
        voltage: cfg.pulse_voltage,
        seed,
        final_error: report.final_error(),
        epochs_to_best: report.epochs_to_best,
        device_j: report.energy.device_j,
        wire_j: report.energy.wire_j,
        refreshes: report.stats.refreshes,
    })
}
