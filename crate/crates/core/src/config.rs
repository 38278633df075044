//! Experiment configuration file (TOML). Every section has defaults and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crossbar::ArrayGeometry;
use crate::device::{calibrate_mu, DeviceParams, DEFAULT_CALIBRATION_RATIO, DEFAULT_LEVELS};
use crate::error::{Error, Result};
use crate::nn::{Hardware, RbmConfig};
use crate::partition::{CommModel, NetworkShape};
use crate::synapse::RefreshPolicy;

/// Device parameters as written in a config file: resistances instead of
/// conductances and a `[volts, levels]` table instead of raw `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSection {
    /// Low-R state, ohms.
    pub r_on: f64,
    /// R_off / R_on.
    pub ratio: f64,
    /// `[volts, levels]` pairs.
    pub levels: Vec<(f64, f64)>,
    /// Dynamic range at which the level counts were measured.
    pub calibration_ratio: f64,
    pub sigma_c2c: f64,
    pub d2d_spread: f64,
    pub nonlinearity_gamma: f64,
    pub set_spread: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        Self {
            r_on: 600.0,
            ratio: 500.0,
            levels: DEFAULT_LEVELS.to_vec(),
            calibration_ratio: DEFAULT_CALIBRATION_RATIO,
            sigma_c2c: 0.0,
            d2d_spread: 0.01,
            nonlinearity_gamma: 0.0,
            set_spread: 0.0,
        }
    }
}

impl DeviceSection {
    pub fn params(&self) -> Result<DeviceParams> {
        if !(self.r_on > 0.0 && self.ratio > 1.0 && self.calibration_ratio > 1.0) {
            return Err(Error::InvalidParameter(
                "need r_on > 0, ratio > 1 and calibration_ratio > 1".into(),
            ));
        }
        if self.levels.iter().any(|&(_, l)| !(l > 0.0)) {
            return Err(Error::InvalidParameter("level counts must be > 0".into()));
        }
        let p = DeviceParams {
            g_min: 1.0 / (self.r_on * self.ratio),
            g_max: 1.0 / self.r_on,
            mu_table: self
                .levels
                .iter()
                .map(|&(v, l)| (v, calibrate_mu(l, self.calibration_ratio)))
                .collect(),
            sigma_c2c: self.sigma_c2c,
            d2d_spread: self.d2d_spread,
            nonlinearity_gamma: self.nonlinearity_gamma,
            set_spread: self.set_spread,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Directory holding the four MNIST IDX files (optionally `.gz`).
    pub mnist_dir: Option<PathBuf>,
    /// Pooling factor, 1 (28x28) or 2 (14x14).
    pub factor: usize,
    pub threshold: f64,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            mnist_dir: None,
            factor: 2,
            threshold: 0.5,
            n_train: 10_000,
            n_test: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Inference bit widths evaluated on the trained model.
    pub quantize_bits: Vec<u32>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            quantize_bits: vec![5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub sigmas: Vec<f64>,
    /// Read `sigmas` as multiples of `mu` at each voltage.
    pub sigma_relative: bool,
    pub voltages: Vec<f64>,
    pub seeds: u64,
    pub low_r_ohms: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            sigmas: vec![0.0, 0.005, 0.01, 0.02, 0.05, 0.1],
            sigma_relative: false,
            voltages: vec![1.1, 1.2, 1.3],
            seeds: 3,
            low_r_ohms: vec![600.0, 6e3, 6e4, 6e5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrDropSection {
    pub sizes: Vec<usize>,
    pub r_cells: Vec<f64>,
    /// Programming supply for the far-corner study, volts.
    pub supply: f64,
    /// Read voltage for the read-inaccuracy study, volts.
    pub v_read: f64,
}

impl Default for IrDropSection {
    fn default() -> Self {
        Self {
            sizes: vec![32, 128, 512, 1024],
            r_cells: vec![1e4, 1e5, 1e6],
            supply: 1.2,
            v_read: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSection {
    pub layers: Vec<usize>,
    pub activity: f64,
    pub sides: Vec<usize>,
    pub volts: f64,
}

impl Default for PartitionSection {
    fn default() -> Self {
        Self {
            layers: vec![256, 4, 256],
            activity: 1.0,
            sides: vec![256, 128, 64, 32, 16, 8],
            volts: 1.2,
        }
    }
}

impl PartitionSection {
    pub fn network(&self) -> NetworkShape {
        NetworkShape {
            layer_sizes: self.layers.clone(),
            activity: self.activity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub device: DeviceSection,
    pub refresh: RefreshPolicy,
    pub geometry: ArrayGeometry,
    pub rbm: RbmConfig,
    pub comm: CommModel,
    pub data: DataSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub irdrop: IrDropSection,
    pub partition: PartitionSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            device: DeviceSection::default(),
            refresh: RefreshPolicy::default(),
            geometry: ArrayGeometry::default(),
            rbm: RbmConfig::default(),
            comm: CommModel::default(),
            data: DataSection::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
            irdrop: IrDropSection::default(),
            partition: PartitionSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Checks every section against its own invariants.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        let params = self.device.params().map_err(cfg)?;
        self.refresh.validate().map_err(cfg)?;
        self.geometry.validate().map_err(cfg)?;
        self.rbm.validate().map_err(cfg)?;
        params.mu(self.rbm.pulse_voltage).map_err(cfg)?;
        self.comm.validate().map_err(cfg)?;
        self.partition.network().validate().map_err(cfg)?;
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.rbm.n_pixels != (28 / self.data.factor.max(1)).pow(2)
            || 28 % self.data.factor.max(1) != 0
        {
            return bad("rbm.n_pixels must equal (28 / data.factor)^2 with factor 1 or 2");
        }
        if !(0.0..=1.0).contains(&self.data.threshold) {
            return bad("data.threshold must be in [0, 1]");
        }
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return bad("data.n_train and data.n_test must be >= 1");
        }
        if self
            .train
            .quantize_bits
            .iter()
            .any(|b| !(1..=16).contains(b))
        {
            return bad("train.quantize_bits entries must be in 1..=16");
        }
        if self.sweep.sigmas.iter().any(|s| !(*s >= 0.0))
            || self.sweep.low_r_ohms.iter().any(|r| !(*r > 0.0))
        {
            return bad("sweep.sigmas must be >= 0 and sweep.low_r_ohms > 0");
        }
        if self.sweep.seeds == 0 {
            return bad("sweep.seeds must be >= 1");
        }
        for &v in &self.sweep.voltages {
            params.mu(v).map_err(cfg)?;
        }
        if self.irdrop.sizes.contains(&0) || self.irdrop.r_cells.iter().any(|r| !(*r > 0.0)) {
            return bad("irdrop sizes and r_cells must be positive");
        }
        if self.partition.sides.contains(&0) {
            return bad("partition sides must be >= 1");
        }
        Ok(())
    }

    pub fn hardware(&self) -> Result<Hardware> {
        Ok(Hardware {
            device: self.device.params()?,
            refresh: self.refresh,
            geometry: self.geometry,
        })
    }

    /// SHA-256 of the canonical JSON form, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
