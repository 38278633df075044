use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Gradient, Hardware, RbmConfig, RbmModel, UpdateStats};
use crate::data::Dataset;
use crate::energy::{EnergyLedger, EpochEnergy};
use crate::error::{Error, Result};
use crate::rng::derive_stream;

// Sub-stream indices appended to a run's stream path.
const INIT: u64 = 0;
const ORDER: u64 = 1;
const GIBBS: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub test_accuracy: f64,
    /// Cumulative counters at the end of the epoch.
    pub program_pulses: u64,
    pub refreshes: u64,
    pub lost_pulses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Energy spent during each epoch.
    pub ledger: Vec<EpochEnergy>,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    /// First epoch reaching `best_accuracy`.
    pub epochs_to_best: usize,
    pub stats: UpdateStats,
    pub energy: EnergyLedger,
    /// Device weight reads that disagreed with the cached weights at an epoch audit.
    pub audit_mismatches: usize,
}

impl TrainReport {
    pub fn final_error(&self) -> f64 {
        1.0 - self.final_accuracy
    }
}

/// Visible vector: pixels followed by the one-hot label.
pub fn visible_vector(image: &[u8], label: u8, n_labels: usize) -> Vec<u8> {
    let mut v = Vec::with_capacity(image.len() + n_labels);
    v.extend_from_slice(image);
    v.extend((0..n_labels).map(|l| u8::from(l == label as usize)));
    v
}

/// Fraction of `data` classified correctly.
pub fn evaluate(model: &RbmModel, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = (0..data.len())
        .filter(|&k| model.classify(data.image(k)) == data.labels[k])
        .count();
    correct as f64 / data.len() as f64
}

/// Trains from scratch with streams derived from `(master_seed, path)`.
/// Returns the trained model and a per-epoch report.
pub fn train(
    config: &RbmConfig,
    hw: &Hardware,
    train_set: &Dataset,
    test_set: &Dataset,
    master_seed: u64,
    path: &[u64],
) -> Result<(RbmModel, TrainReport)> {
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train_set.n_pixels != config.n_pixels || test_set.n_pixels != config.n_pixels {
        return Err(Error::InvalidParameter(format!(
            "dataset has {} pixels per image, config expects {}",
            train_set.n_pixels, config.n_pixels
        )));
    }
    let sub = |k: u64| {
        let mut p = path.to_vec();
        p.push(k);
        derive_stream(master_seed, &p)
    };
    let mut model = RbmModel::init(config, hw, sub(INIT))?;
    let mut order_rng = sub(ORDER);
    let mut gibbs_rng = sub(GIBBS);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut ledger = EnergyLedger::default();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut audit_mismatches = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        for batch in order.chunks(config.minibatch) {
            let mut grad: Option<Gradient> = None;
            for &k in batch {
                let v = visible_vector(train_set.image(k), train_set.labels[k], config.n_labels);
                let g = model.cd_step(&v, &mut gibbs_rng);
                match grad.as_mut() {
                    Some(acc) => acc.add(&g),
                    None => grad = Some(g),
                }
            }
            let mut grad = grad.expect("chunks are nonempty");
            if batch.len() > 1 {
                grad.scale(1.0 / batch.len() as f64);
            }
            model.apply_updates(&grad)?;
        }
        audit_mismatches += model.weight_cache_mismatches();
        let stats = model.device.as_ref().map(|b| b.stats).unwrap_or_default();
        if let Some(bank) = model.device.as_mut() {
            bank.meter.ledger.snapshot(epoch);
            ledger = bank.meter.ledger.clone();
        } else {
            ledger.snapshot(epoch);
        }
        epochs.push(EpochReport {
            epoch,
            test_accuracy: evaluate(&model, test_set),
            program_pulses: stats.program_pulses,
            refreshes: stats.refreshes,
            lost_pulses: stats.lost_pulses,
        });
    }

    let final_accuracy = epochs.last().map_or(0.0, |e| e.test_accuracy);
    let best = epochs.iter().fold(epochs[0], |b, e| {
        if e.test_accuracy > b.test_accuracy {
            *e
        } else {
            b
        }
    });
    let report = TrainReport {
        ledger: ledger.per_epoch(),
        final_accuracy,
        best_accuracy: best.test_accuracy,
        epochs_to_best: best.epoch,
        stats: model.device.as_ref().map(|b| b.stats).unwrap_or_default(),
        energy: ledger,
        audit_mismatches,
        epochs,
    };
    Ok((model, report))
}
