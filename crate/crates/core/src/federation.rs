//! Round-based federated training: broadcast, local training, parameter
//! averaging, and the analytic communication-delay model.

use std::time::Instant;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bench::config::ExperimentConfig;
use crate::bench::ExperimentData;
use crate::encoding::FeatureVector;
use crate::error::{Error, Result};
use crate::seed::{mix, sub_seed};
use crate::vqc::{Classifier, Evaluation, TrainConfig, VqcParams};

/// Bytes per transported parameter (f64).
const BYTES_PER_PARAM: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayParams {
    pub bandwidth_bps: f64,
    pub per_device_latency_s: f64,
}

impl Default for DelayParams {
    fn default() -> Self {
        Self {
            bandwidth_bps: 1e6,
            per_device_latency_s: 0.01,
        }
    }
}

impl DelayParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_bps.is_finite() && self.bandwidth_bps > 0.0) {
            return Err(Error::config(
                "delay.bandwidth_bps",
                format!("must be > 0, got {}", self.bandwidth_bps),
            ));
        }
        if !(self.per_device_latency_s.is_finite() && self.per_device_latency_s >= 0.0) {
            return Err(Error::config(
                "delay.per_device_latency_s",
                format!("must be >= 0, got {}", self.per_device_latency_s),
            ));
        }
        Ok(())
    }
}

/// Download plus upload of the flat parameter vector.
pub fn payload_bytes(qubits: usize, layers: usize) -> f64 {
    BYTES_PER_PARAM * (3 * layers * qubits) as f64 * 2.0
}

/// `n · (payload / bandwidth + latency)` seconds for one synchronous round.
pub fn model_delay(
    devices: usize,
    qubits: usize,
    layers: usize,
    link: &DelayParams,
) -> Result<f64> {
    link.validate()?;
    if devices == 0 || qubits == 0 || layers == 0 {
        return Err(Error::config(
            "delay",
            format!("delay model needs positive n, q, k; got n={devices} q={qubits} k={layers}"),
        ));
    }
    Ok(devices as f64
        * (payload_bytes(qubits, layers) / link.bandwidth_bps + link.per_device_latency_s))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceState {
    pub id: usize,
    pub shard: Vec<FeatureVector>,
    pub params: VqcParams,
    pub seed: u64,
}

impl DeviceState {
    pub fn new(id: usize, shard: Vec<FeatureVector>, params: VqcParams, seed: u64) -> Result<Self> {
        if shard.is_empty() {
            return Err(Error::DegenerateInput(format!(
                "device {id} has an empty shard"
            )));
        }
        Ok(Self {
            id,
            shard,
            params,
            seed,
        })
    }

    /// Local training settings for `round`: the base config with a shuffle
    /// seed unique to this device and round.
    pub fn train_config(&self, base: &TrainConfig, round: usize) -> TrainConfig {
        TrainConfig {
            seed: mix(self.seed, round as u64),
            ..*base
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalModel {
    pub params: VqcParams,
    pub round: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub mean_train_loss: f64,
    pub mean_train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub wall_clock_s: f64,
    pub modeled_delay_s: f64,
}

/// Stratified IID partition: each class is shuffled and dealt round-robin,
/// continuing the device cursor across classes.
pub fn partition_iid(
    samples: &[FeatureVector],
    devices: usize,
    seed: u64,
) -> Result<Vec<Vec<FeatureVector>>> {
    if devices == 0 {
        return Err(Error::Partition("need at least one device".into()));
    }
    if samples.len() < devices {
        return Err(Error::Partition(format!(
            "{} samples cannot fill {devices} non-empty shards",
            samples.len()
        )));
    }
    let num_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Vec::new(); devices];
    let mut cursor = 0;
    for label in 0..num_classes {
        let mut indices: Vec<usize> = (0..samples.len())
            .filter(|&i| samples[i].label == label)
            .collect();
        indices.shuffle(&mut rng);
        for i in indices {
            assignment[cursor % devices].push(i);
            cursor += 1;
        }
    }
    Ok(collect_shards(samples, assignment))
}

/// Label-skewed partition. Device `d` holds classes
/// `perm[(d·cpd + j) mod C]` for `j < cpd`, where `perm` is a seeded class
/// permutation; each class's samples are shuffled and split into near-equal
/// contiguous parts among its holders.
pub fn partition_non_iid(
    samples: &[FeatureVector],
    num_classes: usize,
    devices: usize,
    classes_per_device: usize,
    seed: u64,
) -> Result<Vec<Vec<FeatureVector>>> {
    if devices == 0 {
        return Err(Error::Partition("need at least one device".into()));
    }
    if classes_per_device == 0 || classes_per_device > num_classes {
        return Err(Error::Partition(format!(
            "classes_per_device must lie in 1..={num_classes}, got {classes_per_device}"
        )));
    }
    if devices * classes_per_device < num_classes {
        return Err(Error::Partition(format!(
            "{devices} devices x {classes_per_device} classes cannot cover {num_classes} classes"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, s) in samples.iter().enumerate() {
        if s.label >= num_classes {
            return Err(Error::Label {
                label: s.label,
                num_classes,
            });
        }
        by_class[s.label].push(i);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::Partition(format!("class {empty} has no samples")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..num_classes).collect();
    perm.shuffle(&mut rng);
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for device in 0..devices {
        for j in 0..classes_per_device {
            holders[perm[(device * classes_per_device + j) % num_classes]].push(device);
        }
    }

    let mut assignment = vec![Vec::new(); devices];
    for (label, mut indices) in by_class.into_iter().enumerate() {
        let owners = &holders[label];
        if indices.len() < owners.len() {
            return Err(Error::Partition(format!(
                "class {label} has {} samples for {} devices",
                indices.len(),
                owners.len()
            )));
        }
        indices.shuffle(&mut rng);
        let (base, extra) = (indices.len() / owners.len(), indices.len() % owners.len());
        let mut start = 0;
        for (k, &device) in owners.iter().enumerate() {
            let len = base + usize::from(k < extra);
            assignment[device].extend_from_slice(&indices[start..start + len]);
            start += len;
        }
    }
    Ok(collect_shards(samples, assignment))
}

fn collect_shards(
    samples: &[FeatureVector],
    assignment: Vec<Vec<usize>>,
) -> Vec<Vec<FeatureVector>> {
    assignment
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            idx.into_iter().map(|i| samples[i].clone()).collect()
        })
        .collect()
}

/// Elementwise arithmetic mean.
pub fn aggregate(models: &[VqcParams]) -> Result<VqcParams> {
    aggregate_with(models, None)
}

/// Elementwise mean weighted by `weights` (e.g. shard sizes).
pub fn aggregate_weighted(models: &[VqcParams], weights: &[f64]) -> Result<VqcParams> {
    if weights.len() != models.len() {
        return Err(Error::Shape {
            expected: models.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateInput(
            "aggregation weights must be >= 0 with positive sum".into(),
        ));
    }
    aggregate_with(models, Some(weights))
}

fn aggregate_with(models: &[VqcParams], weights: Option<&[f64]>) -> Result<VqcParams> {
    let first = models
        .first()
        .ok_or_else(|| Error::DegenerateInput("aggregation of zero models".into()))?;
    if let Some(bad) = models.iter().find(|m| !m.same_shape(first)) {
        return Err(Error::Shape {
            expected: first.len(),
            got: bad.len(),
        });
    }
    let mut sum = vec![0.0; first.len()];
    let total = match weights {
        None => {
            for m in models {
                sum.iter_mut().zip(m.as_slice()).for_each(|(s, v)| *s += v);
            }
            models.len() as f64
        }
        Some(w) => {
            for (m, &wi) in models.iter().zip(w) {
                sum.iter_mut()
                    .zip(m.as_slice())
                    .for_each(|(s, v)| *s += wi * v);
            }
            w.iter().sum()
        }
    };
    // rounding can push the quotient an ulp outside the inputs' range
    let angles = sum
        .into_iter()
        .enumerate()
        .map(|(j, s)| {
            let (lo, hi) = models
                .iter()
                .map(|m| m.as_slice()[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            if lo == hi {
                lo
            } else {
                (s / total).clamp(lo, hi)
            }
        })
        .collect();
    VqcParams::from_flat(first.layers(), first.qubits(), angles)
}

/// Per-round protocol settings.
#[derive(Clone, Debug)]
pub struct Federation {
    pub classifier: Classifier,
    pub train: TrainConfig,
    pub delay: DelayParams,
    /// Weight device parameters by shard size instead of uniformly.
    pub weighted: bool,
    /// Train devices on the rayon pool instead of one after another.
    pub parallel_devices: bool,
    /// When false, `wall_clock_s` is recorded as 0 so metrics are reproducible.
    pub record_wall_clock: bool,
}

impl Federation {
    pub fn new(classifier: Classifier, train: TrainConfig) -> Self {
        Self {
            classifier,
            train,
            delay: DelayParams::default(),
            weighted: false,
            parallel_devices: false,
            record_wall_clock: true,
        }
    }

    /// One synchronous round: broadcast `global`, train every device locally,
    /// average, then evaluate the new global model on each shard (averaged over
    /// devices) and on `test`. Test metrics are 0 when `test` is empty.
    pub fn run_round(
        &self,
        global: &GlobalModel,
        devices: &mut [DeviceState],
        test: &[FeatureVector],
    ) -> Result<(GlobalModel, RoundRecord)> {
        if devices.is_empty() {
            return Err(Error::DegenerateInput("round with no devices".into()));
        }
        let started = Instant::now();
        let round = global.round + 1;
        let train_one = |device: &mut DeviceState| -> Result<()> {
            let cfg = device.train_config(&self.train, round);
            let (params, losses) =
                self.classifier
                    .train_local(&global.params, &device.shard, &cfg)?;
            debug!("round {round} device {} epoch losses {losses:?}", device.id);
            device.params = params;
            Ok(())
        };
        if self.parallel_devices {
            devices.par_iter_mut().try_for_each(train_one)?;
        } else {
            devices.iter_mut().try_for_each(train_one)?;
        }

        let models: Vec<VqcParams> = devices.iter().map(|d| d.params.clone()).collect();
        let params = if self.weighted {
            let weights: Vec<f64> = devices.iter().map(|d| d.shard.len() as f64).collect();
            aggregate_weighted(&models, &weights)?
        } else {
            aggregate(&models)?
        };

        let mut train_loss = 0.0;
        let mut train_accuracy = 0.0;
        for device in devices.iter() {
            let eval = self.classifier.evaluate(&params, &device.shard)?;
            train_loss += eval.loss;
            train_accuracy += eval.accuracy;
        }
        let n = devices.len() as f64;
        let test_eval = if test.is_empty() {
            Evaluation {
                loss: 0.0,
                accuracy: 0.0,
            }
        } else {
            self.classifier.evaluate(&params, test)?
        };
        let wall_clock_s = if self.record_wall_clock {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let record = RoundRecord {
            round,
            mean_train_loss: train_loss / n,
            mean_train_accuracy: train_accuracy / n,
            test_loss: test_eval.loss,
            test_accuracy: test_eval.accuracy,
            wall_clock_s,
            modeled_delay_s: model_delay(
                devices.len(),
                self.classifier.qubits(),
                self.classifier.layers(),
                &self.delay,
            )?,
        };
        Ok((GlobalModel { params, round }, record))
    }
}

/// Builds the device population for `config` from its training split.
pub fn build_devices(
    config: &ExperimentConfig,
    data: &ExperimentData,
    init: &VqcParams,
) -> Result<Vec<DeviceState>> {
    let partition_seed = sub_seed(config.seed, "partition");
    let shards = match config.classes_per_device {
        Some(cpd) => partition_non_iid(
            &data.train.samples,
            data.train.num_classes,
            config.n_devices,
            cpd,
            partition_seed,
        )?,
        None => partition_iid(&data.train.samples, config.n_devices, partition_seed)?,
    };
    let shuffle_seed = sub_seed(config.seed, "shuffle");
    shards
        .into_iter()
        .enumerate()
        .map(|(id, shard)| DeviceState::new(id, shard, init.clone(), mix(shuffle_seed, id as u64)))
        .collect()
}

/// Runs `config.rounds` rounds from a seeded initialization and returns one
/// record per round.
pub fn run_experiment(
    config: &ExperimentConfig,
    data: &ExperimentData,
) -> Result<Vec<RoundRecord>> {
    config.validate()?;
    let classifier = Classifier::new(
        config.qubits,
        config.layers,
        config.classes,
        config.encoding,
        config.state_prep,
    )?;
    let init = classifier.init_params(config.train.init_range, sub_seed(config.seed, "init"));
    let mut devices = build_devices(config, data, &init)?;
    let federation = Federation {
        classifier,
        train: config.train,
        delay: config.delay,
        weighted: config.weighted,
        parallel_devices: config.parallel_devices,
        record_wall_clock: config.record_wall_clock,
    };
    let mut global = GlobalModel {
        params: init,
        round: 0,
    };
    let mut records = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        let (next, record) = federation.run_round(&global, &mut devices, &data.test.samples)?;
        debug!(
            "round {} train_loss {:.4} train_acc {:.3} test_acc {:.3}",
            record.round, record.mean_train_loss, record.mean_train_accuracy, record.test_accuracy
        );
        global = next;
        records.push(record);
    }
    Ok(records)
}
