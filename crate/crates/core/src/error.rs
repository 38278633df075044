use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no calibration for pulse amplitude {volts} V")]
    CalibrationMissing { volts: f64 },

    #[error("device sampling failed: eff_g_min >= eff_g_max after {attempts} draws (d2d_spread too large?)")]
    DeviceSampling { attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("crossbar network has no path to ground: {0}")]
    Connectivity(String),

    #[error("iterative solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("device/wire energy ratio undefined: wire energy is zero")]
    UndefinedRatio,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Idx(#[from] crate::data::IdxError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
