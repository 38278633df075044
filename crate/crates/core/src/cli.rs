//! Command-line harness. Every artifact carries the tool version, the config
//! hash and the master seed; the resolved config is written next to it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::crossbar::{far_corner_voltage, read_inaccuracy, CellGrid};
use crate::data::{downsample_binarize, load_mnist, Dataset};
use crate::device::{DeviceParams, PulseSpec};
use crate::error::{Error, Result};
use crate::nn::{energy_sweep, evaluate, train, variation_sweep, TrainReport};
use crate::partition::evaluate as evaluate_partition;
use crate::rng::derive_stream;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment fallback for the MNIST directory.
pub const MNIST_DIR_ENV: &str = "NVMSIM_MNIST_DIR";

// Stream path prefix for dataset subset selection.
const DATA_STREAM: u64 = 0xDA7A;

#[derive(Debug, Parser)]
#[command(
    name = "nvmsim",
    version,
    about = "Analog NVM crossbar co-design simulator"
)]
pub struct Cli {
    /// TOML experiment config; defaults are used for missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Directory with the MNIST IDX files.
    #[arg(long, global = true)]
    pub mnist_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one RBM and report per-epoch accuracy and energy.
    Train,
    /// Parameter sweeps over repeated training runs.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Far-corner programming voltage and read inaccuracy table.
    Irdrop(IrdropArgs),
    /// Corelet partitioning table.
    Partition(PartitionArgs),
    /// Calibrated level table.
    Levels,
}

#[derive(Debug, Subcommand)]
pub enum SweepKind {
    /// Classification error over cycle-to-cycle variation and voltage.
    Variation(VariationArgs),
    /// Training energy and error over low-R values and voltage.
    Energy(EnergyArgs),
}

#[derive(Debug, Args)]
pub struct VariationArgs {
    /// `start:stop:step` or a comma list.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Interpret sigma values as multiples of mu at each voltage.
    #[arg(long)]
    pub sigma_relative: bool,
    #[arg(long)]
    pub voltages: Option<String>,
    #[arg(long)]
    pub seeds: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    /// Low-R values in ohms, `start:stop:step` or a comma list.
    #[arg(long)]
    pub low_r: Option<String>,
    #[arg(long)]
    pub voltages: Option<String>,
    #[arg(long)]
    pub seeds: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IrdropArgs {
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub r_cells: Option<String>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// Layer sizes, e.g. `256,4,256`.
    #[arg(long)]
    pub layers: Option<String>,
    /// Array sides to evaluate.
    #[arg(long)]
    pub sides: Option<String>,
    #[arg(long)]
    pub e_aer: Option<f64>,
}

/// Parses `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_grid(text: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number {s:?}: {e}"))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.len() {
        1 => text.split(',').map(num).collect(),
        3 => {
            let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || b < a {
                return Err(format!("range {text:?} needs step > 0 and stop >= start"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..n)
                .map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        _ => Err(format!("cannot parse grid {text:?}")),
    }
}

fn parse_usize_list(text: &str) -> std::result::Result<Vec<usize>, String> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad integer {s:?}: {e}"))
        })
        .collect()
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_hash: String,
    pub master_seed: u64,
}

impl Meta {
    fn csv_line(&self) -> String {
        format!(
            "# {} {} {} config_hash={} master_seed={}\n",
            self.tool, self.version, self.subcommand, self.config_hash, self.master_seed
        )
    }
}

/// Config after file, flag and environment overrides.
fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(d) = &cli.mnist_dir {
        cfg.data.mnist_dir = Some(d.clone());
    } else if cfg.data.mnist_dir.is_none() {
        cfg.data.mnist_dir = std::env::var_os(MNIST_DIR_ENV).map(PathBuf::from);
    }
    match &cli.command {
        Command::Sweep {
            kind: SweepKind::Variation(a),
        } => {
            if let Some(s) = &a.sigma {
                cfg.sweep.sigmas = parse_grid(s).map_err(config_err)?;
            }
            if a.sigma_relative {
                cfg.sweep.sigma_relative = true;
            }
            if let Some(v) = &a.voltages {
                cfg.sweep.voltages = parse_grid(v).map_err(config_err)?;
            }
            if let Some(n) = a.seeds {
                cfg.sweep.seeds = n;
            }
        }
        Command::Sweep {
            kind: SweepKind::Energy(a),
        } => {
            if let Some(r) = &a.low_r {
                cfg.sweep.low_r_ohms = parse_grid(r).map_err(config_err)?;
            }
            if let Some(v) = &a.voltages {
                cfg.sweep.voltages = parse_grid(v).map_err(config_err)?;
            }
            if let Some(n) = a.seeds {
                cfg.sweep.seeds = n;
            }
        }
        Command::Irdrop(a) => {
            if let Some(s) = &a.sizes {
                cfg.irdrop.sizes = parse_usize_list(s).map_err(config_err)?;
            }
            if let Some(r) = &a.r_cells {
                cfg.irdrop.r_cells = parse_grid(r).map_err(config_err)?;
            }
        }
        Command::Partition(a) => {
            if let Some(l) = &a.layers {
                cfg.partition.layers = parse_usize_list(l).map_err(config_err)?;
            }
            if let Some(s) = &a.sides {
                cfg.partition.sides = parse_usize_list(s).map_err(config_err)?;
            }
            if let Some(e) = a.e_aer {
                cfg.comm.e_aer = e;
            }
        }
        Command::Train | Command::Levels => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Train => "train",
        Command::Sweep {
            kind: SweepKind::Variation(_),
        } => "sweep-variation",
        Command::Sweep {
            kind: SweepKind::Energy(_),
        } => "sweep-energy",
        Command::Irdrop(_) => "irdrop",
        Command::Partition(_) => "partition",
        Command::Levels => "levels",
    }
}

/// Loads MNIST from the configured directory and draws the seeded subsets.
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let dir = cfg.data.mnist_dir.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "no MNIST directory: pass --mnist-dir, set data.mnist_dir or {MNIST_DIR_ENV}"
        ))
    })?;
    let (train_raw, test_raw) = load_mnist(dir)?;
    let train = downsample_binarize(&train_raw, cfg.data.factor, cfg.data.threshold)?;
    let test = downsample_binarize(&test_raw, cfg.data.factor, cfg.data.threshold)?;
    let train = train.sample(
        cfg.data.n_train,
        &mut derive_stream(cfg.master_seed, &[DATA_STREAM, 0, 0]),
    );
    let test = test.sample(
        cfg.data.n_test,
        &mut derive_stream(cfg.master_seed, &[DATA_STREAM, 1, 0]),
    );
    Ok((train, test))
}

#[derive(Debug, Serialize)]
struct QuantizedAccuracy {
    bits: u32,
    test_accuracy: f64,
}

#[derive(Debug, Serialize)]
struct TrainArtifact<'a> {
    meta: &'a Meta,
    config: &'a ExperimentConfig,
    report: &'a TrainReport,
    quantized: Vec<QuantizedAccuracy>,
}

fn write_artifact(dir: &Path, name: &str, body: &str, cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    fs::write(dir.join(format!("{name}.config.toml")), cfg.to_toml())?;
    Ok(path)
}

fn run_train(cfg: &ExperimentConfig, meta: &Meta) -> Result<String> {
    let (train_set, test_set) = load_datasets(cfg)?;
    let (model, report) = train(
        &cfg.rbm,
        &cfg.hardware()?,
        &train_set,
        &test_set,
        cfg.master_seed,
        &[0],
    )?;
    let quantized = cfg
        .train
        .quantize_bits
        .iter()
        .map(|&bits| {
            Ok(QuantizedAccuracy {
                bits,
                test_accuracy: evaluate(&model.quantize_weights(bits)?, &test_set),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let art = TrainArtifact {
        meta,
        config: cfg,
        report: &report,
        quantized,
    };
    let mut json = serde_json::to_string_pretty(&art).map_err(|e| Error::Config(e.to_string()))?;
    json.push('\n');
    let path = write_artifact(&cfg.output.dir, "train_report.json", &json, cfg)?;
    let mut msg = String::new();
    for e in &report.epochs {
        let _ = writeln!(
            msg,
            "epoch {} test accuracy {:.4}",
            e.epoch, e.test_accuracy
        );
    }
    let _ = writeln!(msg, "wrote {}", path.display());
    Ok(msg)
}

fn run_variation(cfg: &ExperimentConfig, meta: &Meta) -> Result<String> {
    let (train_set, test_set) = load_datasets(cfg)?;
    let s = &cfg.sweep;
    let rows = variation_sweep(
        &cfg.rbm,
        &cfg.hardware()?,
        &train_set,
        &test_set,
        &s.sigmas,
        s.sigma_relative,
        &s.voltages,
        s.seeds,
        cfg.master_seed,
    )?;
    let mut csv = meta.csv_line();
    csv.push_str("sigma,voltage,seed,final_error,epochs_to_best,device_j,wire_j,refreshes\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.sigma,
            r.voltage,
            r.seed,
            r.final_error,
            r.epochs_to_best,
            r.device_j,
            r.wire_j,
            r.refreshes
        );
    }
    let path = write_artifact(&cfg.output.dir, "sweep_variation.csv", &csv, cfg)?;
    Ok(format!("{} rows, wrote {}\n", rows.len(), path.display()))
}

fn run_energy(cfg: &ExperimentConfig, meta: &Meta) -> Result<String> {
    let (train_set, test_set) = load_datasets(cfg)?;
    let s = &cfg.sweep;
    let rows = energy_sweep(
        &cfg.rbm,
        &cfg.hardware()?,
        &train_set,
        &test_set,
        &s.low_r_ohms,
        &s.voltages,
        s.seeds,
        cfg.master_seed,
    )?;
    let mut csv = meta.csv_line();
    csv.push_str(
        "low_r_ohms,sigma,voltage,seed,final_error,epochs_to_best,device_j,wire_j,refreshes\n",
    );
    for e in &rows {
        let r = &e.run;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            e.low_r_ohms,
            r.sigma,
            r.voltage,
            r.seed,
            r.final_error,
            r.epochs_to_best,
            r.device_j,
            r.wire_j,
            r.refreshes
        );
    }
    let path = write_artifact(&cfg.output.dir, "sweep_energy.csv", &csv, cfg)?;
    Ok(format!("{} rows, wrote {}\n", rows.len(), path.display()))
}

fn run_irdrop(cfg: &ExperimentConfig, meta: &Meta) -> Result<String> {
    let ir = &cfg.irdrop;
    let cells: Vec<(usize, f64)> = ir
        .sizes
        .iter()
        .flat_map(|&n| ir.r_cells.iter().map(move |&r| (n, r)))
        .collect();
    let rows = cells
        .into_par_iter()
        .map(|(n, r)| {
            let geometry = cfg.geometry.with_size(n, n);
            let far = far_corner_voltage(n, r, &geometry, ir.supply)?;
            let read = read_inaccuracy(&geometry, &CellGrid::uniform(n, n, r)?, ir.v_read)?;
            Ok((n, r, far, read.worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = meta.csv_line();
    csv.push_str("N,R_ohms,wire_res,far_corner_V,worst_read_inaccuracy\n");
    for (n, r, far, worst) in &rows {
        let _ = writeln!(
            csv,
            "{n},{r},{},{far},{worst}",
            cfg.geometry.wire_res_per_cell
        );
    }
    let path = write_artifact(&cfg.output.dir, "irdrop.csv", &csv, cfg)?;
    Ok(format!("{csv}wrote {}\n", path.display()))
}

fn run_partition(cfg: &ExperimentConfig, meta: &Meta) -> Result<String> {
    let p = &cfg.partition;
    let net = p.network();
    let mut csv = meta.csv_line();
    csv.push_str("A,arrays,time_mux,wire_j,comm_j,total_j,savings,latency_slots\n");
    for &a in &p.sides {
        let e = evaluate_partition(&net, a, &cfg.geometry, &cfg.comm, p.volts)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            a, e.arrays, e.time_mux, e.wire_j, e.comm_j, e.total_j, e.savings, e.latency_slots
        );
    }
    let path = write_artifact(&cfg.output.dir, "partition.csv", &csv, cfg)?;
    Ok(format!("{csv}wrote {}\n", path.display()))
}

/// RESET pulses that take a variation-free device from `g_max` to `g_min`.
pub fn pulses_to_floor(params: &DeviceParams, volts: f64) -> Result<u64> {
    let p = DeviceParams {
        sigma_c2c: 0.0,
        d2d_spread: 0.0,
        nonlinearity_gamma: 0.0,
        set_spread: 0.0,
        ..params.clone()
    };
    let mut d = p.nominal_device();
    let pulse = PulseSpec::reset(volts, 1e-8);
    let mut rng = derive_stream(0, &[]);
    let limit = (p.num_levels(volts)?.ceil() as u64)
        .saturating_mul(4)
        .max(16);
    while !d.at_floor() {
        if d.pulse_count >= limit {
            return Err(Error::InvalidParameter(format!(
                "no floor after {limit} pulses at {volts} V"
            )));
        }
        d.apply_pulse(&p, &pulse, &mut rng)?;
    }
    Ok(d.pulse_count)
}

fn run_levels(cfg: &ExperimentConfig, meta: &Meta) -> Result<String> {
    let params = cfg.device.params()?;
    let mut csv = meta.csv_line();
    csv.push_str("volts,levels,mu,pulses_to_floor\n");
    for &(v, mu) in &params.mu_table {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            v,
            params.num_levels(v)?,
            mu,
            pulses_to_floor(&params, v)?
        );
    }
    let path = write_artifact(&cfg.output.dir, "levels.csv", &csv, cfg)?;
    Ok(format!("{csv}wrote {}\n", path.display()))
}

fn execute(cli: &Cli, cfg: &ExperimentConfig) -> Result<String> {
    let meta = Meta {
        tool: "nvmsim",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: subcommand_name(&cli.command).into(),
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
    };
    match &cli.command {
        Command::Train => run_train(cfg, &meta),
        Command::Sweep {
            kind: SweepKind::Variation(_),
        } => run_variation(cfg, &meta),
        Command::Sweep {
            kind: SweepKind::Energy(_),
        } => run_energy(cfg, &meta),
        Command::Irdrop(_) => run_irdrop(cfg, &meta),
        Command::Partition(_) => run_partition(cfg, &meta),
        Command::Levels => run_levels(cfg, &meta),
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| execute(&cli, &cfg)) {
        Ok(msg) => {
            print!("{msg}");
            EXIT_OK
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(
            parse_grid("0:0.3:0.05").unwrap(),
            vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
        );
        assert_eq!(parse_grid("1.1,1.3").unwrap(), vec![1.1, 1.3]);
        assert_eq!(parse_grid("2").unwrap(), vec![2.0]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn level_pulse_counts() {
        let p = DeviceParams::nominal(600.0, 500.0);
        let counts: Vec<u64> = [1.1, 1.15, 1.2, 1.25, 1.3]
            .iter()
            .map(|&v| pulses_to_floor(&p, v).unwrap())
            .collect();
        assert_eq!(counts, vec![1000, 270, 170, 90, 45]);
    }

    #[test]
    fn bad_flags_are_config_errors() {
        assert_eq!(run(["nvmsim", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(
            run(["nvmsim", "sweep", "variation", "--sigma", "x"]),
            EXIT_CONFIG
        );
    }
}
