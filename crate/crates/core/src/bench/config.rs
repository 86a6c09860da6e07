//! Experiment configuration.
//!
//! The file format is line oriented: `key = value`, `#` starts a comment,
//! nested settings use dotted keys (`train.learning_rate = 0.05`) or a
//! `[train]` section header that prefixes the keys below it. Values may be
//! quoted. Absent keys take the defaults of [`ExperimentConfig::default`].

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::datasets::SyntheticSpec;
use crate::encoding::{EncodingKind, StatePrep};
use crate::error::{Error, Result};
use crate::federation::DelayParams;
use crate::qstate::DEFAULT_MAX_QUBITS;
use crate::vqc::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Iris,
    Mnist,
    Synthetic,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Iris => "iris",
            DatasetKind::Mnist => "mnist",
            DatasetKind::Synthetic => "synthetic",
        }
    }

    /// Classes used when `classes` is not given.
    fn default_classes(self) -> usize {
        match self {
            DatasetKind::Iris => 3,
            // readout needs classes <= qubits; the desk-scale MNIST run keeps digits 0-3
            DatasetKind::Mnist => 4,
            DatasetKind::Synthetic => 3,
        }
    }

    fn max_classes(self) -> Option<usize> {
        match self {
            DatasetKind::Iris => Some(3),
            DatasetKind::Mnist => Some(10),
            DatasetKind::Synthetic => None,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iris" => Ok(DatasetKind::Iris),
            "mnist" => Ok(DatasetKind::Mnist),
            "synthetic" => Ok(DatasetKind::Synthetic),
            other => Err(format!(
                "unknown dataset `{other}` (expected iris, mnist or synthetic)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrisOptions {
    /// Relative paths resolve against the data directory.
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MnistOptions {
    pub images: PathBuf,
    pub labels: PathBuf,
    /// Samples kept after class filtering, before the train/test split.
    pub limit: Option<usize>,
    /// Images are pooled to `side × side`.
    pub side: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticOptions {
    /// Dataset size is `samples_per_device · n_devices` before the test split.
    pub samples_per_device: usize,
    pub features: usize,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub n_devices: usize,
    pub qubits: usize,
    pub layers: usize,
    pub rounds: usize,
    pub encoding: EncodingKind,
    pub state_prep: StatePrep,
    /// Number of classes read out (and kept from the dataset).
    pub classes: usize,
    /// `None` gives an IID split; `Some(c)` the label-skewed partition.
    pub classes_per_device: Option<usize>,
    pub test_fraction: f64,
    pub seed: u64,
    pub train: TrainConfig,
    pub delay: DelayParams,
    pub weighted: bool,
    pub parallel_devices: bool,
    pub record_wall_clock: bool,
    pub output_dir: PathBuf,
    pub iris: IrisOptions,
    pub mnist: MnistOptions,
    pub synthetic: SyntheticOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Iris,
            n_devices: 4,
            qubits: 4,
            layers: 2,
            rounds: 10,
            encoding: EncodingKind::Vanilla,
            state_prep: StatePrep::Angle,
            classes: DatasetKind::Iris.default_classes(),
            classes_per_device: None,
            test_fraction: 0.2,
            seed: 0,
            train: TrainConfig::default(),
            delay: DelayParams::default(),
            weighted: false,
            parallel_devices: false,
            record_wall_clock: true,
            output_dir: PathBuf::from("out"),
            iris: IrisOptions {
                path: PathBuf::from("iris.csv"),
            },
            mnist: MnistOptions {
                images: PathBuf::from("mnist/mnist-subset-images-idx3-ubyte"),
                labels: PathBuf::from("mnist/mnist-subset-labels-idx1-ubyte"),
                limit: Some(750),
                side: 4,
            },
            synthetic: SyntheticOptions {
                samples_per_device: 40,
                features: 4,
                spread: 0.08,
            },
        }
    }
}

pub const KEYS: &[&str] = &[
    "dataset",
    "n_devices",
    "qubits",
    "layers",
    "rounds",
    "encoding",
    "state_prep",
    "classes",
    "classes_per_device",
    "test_fraction",
    "seed",
    "output_dir",
    "train.learning_rate",
    "train.local_epochs",
    "train.batch_size",
    "train.init_range",
    "delay.bandwidth_bps",
    "delay.per_device_latency_s",
    "federation.weighted",
    "federation.parallel_devices",
    "metrics.record_wall_clock",
    "iris.path",
    "mnist.images",
    "mnist.labels",
    "mnist.limit",
    "mnist.side",
    "synthetic.samples_per_device",
    "synthetic.features",
    "synthetic.spread",
];

impl ExperimentConfig {
    /// Feature count presented to the encoder.
    pub fn feature_dim(&self) -> usize {
        match self.dataset {
            DatasetKind::Iris => 4,
            DatasetKind::Mnist => self.mnist.side * self.mnist.side,
            DatasetKind::Synthetic => self.synthetic.features,
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            samples: self.synthetic.samples_per_device * self.n_devices,
            features: self.synthetic.features,
            classes: self.classes,
            spread: self.synthetic.spread,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("n_devices", self.n_devices)?;
        positive("layers", self.layers)?;
        if self.qubits == 0 || self.qubits > DEFAULT_MAX_QUBITS {
            return Err(Error::config(
                "qubits",
                format!("must lie in 1..={DEFAULT_MAX_QUBITS}, got {}", self.qubits),
            ));
        }
        positive("classes", self.classes)?;
        if self.classes > self.qubits {
            return Err(Error::config(
                "classes",
                format!(
                    "classes ({}) must not exceed qubits ({}): one readout qubit per class",
                    self.classes, self.qubits
                ),
            ));
        }
        if let Some(max) = self.dataset.max_classes() {
            if self.classes > max {
                return Err(Error::config(
                    "classes",
                    format!(
                        "dataset {} has {max} classes, got {}",
                        self.dataset, self.classes
                    ),
                ));
            }
        }
        if let Some(cpd) = self.classes_per_device {
            if cpd == 0 || cpd > self.classes {
                return Err(Error::config(
                    "classes_per_device",
                    format!("must lie in 1..={}, got {cpd}", self.classes),
                ));
            }
            if cpd * self.n_devices < self.classes {
                return Err(Error::config(
                    "classes_per_device",
                    format!(
                        "{} devices x {cpd} classes cannot cover {} classes",
                        self.n_devices, self.classes
                    ),
                ));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config(
                "test_fraction",
                format!("must lie in (0, 1), got {}", self.test_fraction),
            ));
        }
        self.train.validate()?;
        self.delay.validate()?;
        if self.state_prep == StatePrep::Amplitude && self.feature_dim() > 1 << self.qubits {
            return Err(Error::config(
                "state_prep",
                format!(
                    "amplitude preparation of {} features needs at least {} qubits, got {}",
                    self.feature_dim(),
                    (self.feature_dim() as f64).log2().ceil(),
                    self.qubits
                ),
            ));
        }
        match self.dataset {
            DatasetKind::Mnist => {
                positive("mnist.side", self.mnist.side)?;
                if let Some(limit) = self.mnist.limit {
                    positive("mnist.limit", limit)?;
                }
            }
            DatasetKind::Synthetic => {
                positive(
                    "synthetic.samples_per_device",
                    self.synthetic.samples_per_device,
                )?;
                positive("synthetic.features", self.synthetic.features)?;
                if !(self.synthetic.spread.is_finite() && self.synthetic.spread >= 0.0) {
                    return Err(Error::config("synthetic.spread", "must be finite and >= 0"));
                }
            }
            DatasetKind::Iris => {}
        }
        Ok(())
    }
}

fn positive(field: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(Error::config(field, "must be >= 1, got 0"));
    }
    Ok(())
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}")))
}

fn flag(key: &str, raw: &str) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected a boolean, got `{raw}`"),
        )),
    }
}

fn optional_count(key: &str, raw: &str) -> Result<Option<usize>> {
    match raw.to_ascii_lowercase().as_str() {
        "none" | "all" | "" => Ok(None),
        _ => value(key, raw).map(Some),
    }
}

/// Strips a trailing comment and surrounding quotes from a value.
fn clean_value(raw: &str) -> &str {
    let raw = raw.trim();
    for quote in ['"', '\''] {
        if let Some(rest) = raw.strip_prefix(quote) {
            if let Some(end) = rest.find(quote) {
                return &rest[..end];
            }
        }
    }
    raw.split('#').next().unwrap_or("").trim()
}

/// Parses and validates a configuration file.
pub fn parse_config(bytes: &[u8]) -> Result<ExperimentConfig> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::config("<file>", format!("not valid UTF-8: {e}")))?;
    let mut config = ExperimentConfig::default();
    let mut explicit_classes = None;
    let mut seen = BTreeSet::new();
    let mut section = String::new();

    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let name = header
                .split(']')
                .next()
                .filter(|_| header.contains(']'))
                .ok_or_else(|| {
                    Error::config(
                        "<file>",
                        format!("line {}: unterminated section header", number + 1),
                    )
                })?;
            section = name.trim().to_string();
            continue;
        }
        let (raw_key, raw_value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                "<file>",
                format!("line {}: expected `key = value`", number + 1),
            )
        })?;
        let key = match (section.as_str(), raw_key.trim()) {
            ("", k) => k.to_string(),
            (s, k) => format!("{s}.{k}"),
        };
        let v = clean_value(raw_value);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::config(key, "unknown key"));
        }
        if !seen.insert(key.clone()) {
            return Err(Error::config(key, "duplicate key"));
        }
        let k = key.as_str();
        match k {
            "dataset" => config.dataset = value(k, v)?,
            "n_devices" => config.n_devices = value(k, v)?,
            "qubits" => config.qubits = value(k, v)?,
            "layers" => config.layers = value(k, v)?,
            "rounds" => config.rounds = value(k, v)?,
            "encoding" => config.encoding = value(k, v)?,
            "state_prep" => config.state_prep = value(k, v)?,
            "classes" => explicit_classes = Some(value(k, v)?),
            "classes_per_device" => config.classes_per_device = optional_count(k, v)?,
            "test_fraction" => config.test_fraction = value(k, v)?,
            "seed" => config.seed = value(k, v)?,
            "output_dir" => config.output_dir = PathBuf::from(v),
            "train.learning_rate" => config.train.learning_rate = value(k, v)?,
            "train.local_epochs" => config.train.local_epochs = value(k, v)?,
            "train.batch_size" => config.train.batch_size = value(k, v)?,
            "train.init_range" => config.train.init_range = value(k, v)?,
            "delay.bandwidth_bps" => config.delay.bandwidth_bps = value(k, v)?,
            "delay.per_device_latency_s" => config.delay.per_device_latency_s = value(k, v)?,
            "federation.weighted" => config.weighted = flag(k, v)?,
            "federation.parallel_devices" => config.parallel_devices = flag(k, v)?,
            "metrics.record_wall_clock" => config.record_wall_clock = flag(k, v)?,
            "iris.path" => config.iris.path = PathBuf::from(v),
            "mnist.images" => config.mnist.images = PathBuf::from(v),
            "mnist.labels" => config.mnist.labels = PathBuf::from(v),
            "mnist.limit" => config.mnist.limit = optional_count(k, v)?,
            "mnist.side" => config.mnist.side = value(k, v)?,
            "synthetic.samples_per_device" => config.synthetic.samples_per_device = value(k, v)?,
            "synthetic.features" => config.synthetic.features = value(k, v)?,
            "synthetic.spread" => config.synthetic.spread = value(k, v)?,
            _ => unreachable!("key list and match arms out of sync: {k}"),
        }
    }
    config.classes = explicit_classes.unwrap_or_else(|| config.dataset.default_classes());
    config.validate()?;
    Ok(config)
}
