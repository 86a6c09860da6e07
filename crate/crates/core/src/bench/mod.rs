//! Experiment runner: data preparation, the two sweep drivers, metrics
//! persistence and chart emission.

pub mod config;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::datasets::{self, Dataset};
use crate::encoding::EncodingKind;
use crate::error::{Error, Result};
use crate::federation::{run_experiment, RoundRecord};
use crate::seed::sub_seed;

pub use config::{parse_config, DatasetKind, ExperimentConfig};

/// Environment variable naming the dataset root directory.
pub const DATA_DIR_ENV: &str = "QFLSIM_DATA_DIR";

pub const METRICS_HEADER: [&str; 7] = [
    "round",
    "mean_train_loss",
    "mean_train_accuracy",
    "test_loss",
    "test_accuracy",
    "wall_clock_s",
    "modeled_delay_s",
];

pub const POC1_SUMMARY_HEADER: [&str; 5] = [
    "n_devices",
    "qubits",
    "layers",
    "round_wall_clock_s",
    "modeled_delay_s",
];

pub const POC2_SUMMARY_HEADER: [&str; 6] = [
    "layers",
    "encoding",
    "final_train_loss",
    "final_train_accuracy",
    "final_test_loss",
    "final_test_accuracy",
];

/// `$QFLSIM_DATA_DIR`, or `./data`.
pub fn data_root() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Train/test splits ready for federation.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentData {
    pub train: Dataset,
    pub test: Dataset,
}

fn resolve(root: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        root.join(path)
    }
}

/// Loads, filters, pools and splits the configured dataset.
pub fn load_data(config: &ExperimentConfig, data_root: &Path) -> Result<ExperimentData> {
    config.validate()?;
    let dataset = match config.dataset {
        DatasetKind::Iris => datasets::load_iris(resolve(data_root, &config.iris.path))?
            .filter_classes(config.classes)?,
        DatasetKind::Mnist => {
            let mut d = datasets::load_mnist(
                resolve(data_root, &config.mnist.images),
                resolve(data_root, &config.mnist.labels),
                None,
            )?
            .filter_classes(config.classes)?;
            if let Some(limit) = config.mnist.limit {
                d.truncate(limit);
            }
            d.resize_images(config.mnist.side)?
        }
        DatasetKind::Synthetic => {
            datasets::synthetic(&config.synthetic_spec(), sub_seed(config.seed, "synthetic"))?
        }
    };
    let (train, test) = datasets::split(
        &dataset,
        config.test_fraction,
        sub_seed(config.seed, "split"),
    )?;
    Ok(ExperimentData { train, test })
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip form, stable across runs
    format!("{v}")
}

pub fn metrics_csv(records: &[RoundRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.round.to_string(),
            fmt_f64(r.mean_train_loss),
            fmt_f64(r.mean_train_accuracy),
            fmt_f64(r.test_loss),
            fmt_f64(r.test_accuracy),
            fmt_f64(r.wall_clock_s),
            fmt_f64(r.modeled_delay_s),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::output("<metrics>", e.into_error()))
}

/// Writes each `(path, bytes)` pair, creating parent directories.
fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    for (path, bytes) in files {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::output(parent, e))?;
        }
        fs::write(path, bytes).map_err(|e| Error::output(path, e))?;
    }
    Ok(files.iter().map(|(p, _)| p.clone()).collect())
}

/// A single experiment: `output_dir/metrics.csv`.
pub fn run_single(
    config: &ExperimentConfig,
    data_root: &Path,
) -> Result<(Vec<RoundRecord>, PathBuf)> {
    let data = load_data(config, data_root)?;
    let records = run_experiment(config, &data)?;
    let path = config.output_dir.join("metrics.csv");
    write_all(&[(path.clone(), metrics_csv(&records)?)])?;
    Ok((records, path))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn mean_wall_clock(records: &[RoundRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.wall_clock_s).sum::<f64>() / records.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poc1Point {
    pub n_devices: usize,
    pub qubits: usize,
    pub layers: usize,
    /// Records of the first repeat.
    pub records: Vec<RoundRecord>,
    /// Median over repeats of the mean per-round wall-clock.
    pub round_wall_clock_s: f64,
    pub modeled_delay_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poc1Report {
    pub points: Vec<Poc1Point>,
}

/// Device-count × qubit-count sweep. Every point is validated before any
/// training starts, and wall-clock is always measured.
pub fn run_poc1(
    base: &ExperimentConfig,
    device_counts: &[usize],
    qubit_counts: &[usize],
    repeats: usize,
    parallel: bool,
    data_root: &Path,
) -> Result<Poc1Report> {
    if !matches!(base.dataset, DatasetKind::Iris | DatasetKind::Synthetic) {
        return Err(Error::config(
            "dataset",
            "poc1 runs on iris or synthetic data",
        ));
    }
    if device_counts.is_empty() || qubit_counts.is_empty() {
        return Err(Error::config(
            "sweep",
            "poc1 needs at least one device count and qubit count",
        ));
    }
    if repeats == 0 {
        return Err(Error::config("repeats", "must be >= 1"));
    }
    let mut points = Vec::new();
    for &n in device_counts {
        for &q in qubit_counts {
            let config = ExperimentConfig {
                n_devices: n,
                qubits: q,
                record_wall_clock: true,
                ..base.clone()
            };
            config.validate()?;
            points.push(config);
        }
    }
    let run_point = |config: &ExperimentConfig| -> Result<Poc1Point> {
        let data = load_data(config, data_root)?;
        let mut first = None;
        let mut wall = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let records = run_experiment(config, &data)?;
            wall.push(mean_wall_clock(&records));
            first.get_or_insert(records);
        }
        info!("poc1 n={} q={} done", config.n_devices, config.qubits);
        Ok(Poc1Point {
            n_devices: config.n_devices,
            qubits: config.qubits,
            layers: config.layers,
            records: first.unwrap_or_default(),
            round_wall_clock_s: median(&mut wall),
            modeled_delay_s: crate::federation::model_delay(
                config.n_devices,
                config.qubits,
                config.layers,
                &config.delay,
            )?,
        })
    };
    let points = if parallel {
        points
            .par_iter()
            .map(run_point)
            .collect::<Result<Vec<_>>>()?
    } else {
        points.iter().map(run_point).collect::<Result<Vec<_>>>()?
    };
    Ok(Poc1Report { points })
}

impl Poc1Report {
    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(POC1_SUMMARY_HEADER)?;
        for p in &self.points {
            w.write_record([
                p.n_devices.to_string(),
                p.qubits.to_string(),
                p.layers.to_string(),
                fmt_f64(p.round_wall_clock_s),
                fmt_f64(p.modeled_delay_s),
            ])?;
        }
        w.into_inner()
            .map_err(|e| Error::output("<summary>", e.into_error()))
    }

    /// `dir/poc1/n{n}_q{q}.csv` per point plus `dir/poc1/summary.csv`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let root = dir.join("poc1");
        let mut files = Vec::new();
        for p in &self.points {
            files.push((
                root.join(format!("n{}_q{}.csv", p.n_devices, p.qubits)),
                metrics_csv(&p.records)?,
            ));
        }
        files.push((root.join("summary.csv"), self.summary_csv()?));
        write_all(&files)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poc2Run {
    pub layers: usize,
    pub encoding: EncodingKind,
    pub records: Vec<RoundRecord>,
}

impl Poc2Run {
    pub fn final_record(&self) -> Option<&RoundRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poc2Report {
    pub runs: Vec<Poc2Run>,
}

/// Layer-count × encoding sweep on a label-skewed partition. All runs share
/// the base seed, so data split and partition are identical across runs.
pub fn run_poc2(
    base: &ExperimentConfig,
    layer_counts: &[usize],
    encodings: &[EncodingKind],
    parallel: bool,
    data_root: &Path,
) -> Result<Poc2Report> {
    if !matches!(base.dataset, DatasetKind::Mnist | DatasetKind::Synthetic) {
        return Err(Error::config(
            "dataset",
            "poc2 runs on mnist or synthetic data",
        ));
    }
    if base.classes_per_device.is_none() {
        return Err(Error::config(
            "classes_per_device",
            "poc2 needs the label-skewed partition; set classes_per_device",
        ));
    }
    if layer_counts.is_empty() || encodings.is_empty() {
        return Err(Error::config(
            "sweep",
            "poc2 needs at least one layer count and encoding",
        ));
    }
    let mut points = Vec::new();
    for &k in layer_counts {
        for &encoding in encodings {
            let config = ExperimentConfig {
                layers: k,
                encoding,
                ..base.clone()
            };
            config.validate()?;
            points.push(config);
        }
    }
    // the data only depends on fields shared by all points
    let data = load_data(base, data_root)?;
    let run_point = |config: &ExperimentConfig| -> Result<Poc2Run> {
        let records = run_experiment(config, &data)?;
        info!("poc2 k={} encoding={} done", config.layers, config.encoding);
        Ok(Poc2Run {
            layers: config.layers,
            encoding: config.encoding,
            records,
        })
    };
    let runs = if parallel {
        points
            .par_iter()
            .map(run_point)
            .collect::<Result<Vec<_>>>()?
    } else {
        points.iter().map(run_point).collect::<Result<Vec<_>>>()?
    };
    Ok(Poc2Report { runs })
}

impl Poc2Report {
    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(POC2_SUMMARY_HEADER)?;
        for run in &self.runs {
            let Some(last) = run.final_record() else {
                continue;
            };
            w.write_record([
                run.layers.to_string(),
                run.encoding.to_string(),
                fmt_f64(last.mean_train_loss),
                fmt_f64(last.mean_train_accuracy),
                fmt_f64(last.test_loss),
                fmt_f64(last.test_accuracy),
            ])?;
        }
        w.into_inner()
            .map_err(|e| Error::output("<summary>", e.into_error()))
    }

    /// `dir/poc2/k{k}_{encoding}.csv` per run plus `dir/poc2/summary.csv`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let root = dir.join("poc2");
        let mut files = Vec::new();
        for run in &self.runs {
            files.push((
                root.join(format!("k{}_{}.csv", run.layers, run.encoding)),
                metrics_csv(&run.records)?,
            ));
        }
        files.push((root.join("summary.csv"), self.summary_csv()?));
        write_all(&files)
    }
}

pub use plot::emit_plots;
