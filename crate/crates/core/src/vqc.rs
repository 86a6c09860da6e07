//! Variational quantum classifier: layered ansatz, Z readout, softmax
//! cross-entropy and parameter-shift training.

use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoding::{prepare_state, EncodingKind, FeatureVector, StatePrep};
use crate::error::{Error, Result};
use crate::qstate::{check_capacity, Axis, Circuit, Gate, StateVector, DEFAULT_MAX_QUBITS};

/// Rotations applied to every qubit in each layer, in slot order.
pub const LAYER_ROTATIONS: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

/// Default half-width of the uniform initialization interval.
pub const INIT_RANGE: f64 = std::f64::consts::PI;

/// Trainable angles, shape `[layers][qubits][3]`, stored flat in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct VqcParams {
    layers: usize,
    qubits: usize,
    angles: Vec<f64>,
}

impl VqcParams {
    pub fn zeros(layers: usize, qubits: usize) -> Self {
        Self {
            layers,
            qubits,
            angles: vec![0.0; flat_len(layers, qubits)],
        }
    }

    pub fn from_flat(layers: usize, qubits: usize, angles: Vec<f64>) -> Result<Self> {
        let expected = flat_len(layers, qubits);
        if angles.len() != expected {
            return Err(Error::Shape {
                expected,
                got: angles.len(),
            });
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::DegenerateInput("non-finite parameter".into()));
        }
        Ok(Self {
            layers,
            qubits,
            angles,
        })
    }

    /// Uniform on `[-half_width, half_width]`.
    pub fn random(layers: usize, qubits: usize, half_width: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angles = (0..flat_len(layers, qubits))
            .map(|_| rng.random_range(-half_width..=half_width))
            .collect();
        Self {
            layers,
            qubits,
            angles,
        }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.angles
    }

    pub fn angle(&self, layer: usize, qubit: usize, rotation: usize) -> f64 {
        self.angles[(layer * self.qubits + qubit) * LAYER_ROTATIONS.len() + rotation]
    }

    pub fn same_shape(&self, other: &VqcParams) -> bool {
        self.layers == other.layers && self.qubits == other.qubits
    }
}

fn flat_len(layers: usize, qubits: usize) -> usize {
    layers * qubits * LAYER_ROTATIONS.len()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    /// Half-width of the initial parameter interval.
    pub init_range: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            local_epochs: 1,
            batch_size: 10,
            init_range: INIT_RANGE,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config(
                "train.learning_rate",
                format!("must be finite and >= 0, got {}", self.learning_rate),
            ));
        }
        if self.local_epochs == 0 {
            return Err(Error::config("train.local_epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return Err(Error::config(
                "train.init_range",
                format!("must be finite and >= 0, got {}", self.init_range),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub predicted: usize,
}

impl Prediction {
    /// Argmax with ties going to the lowest index.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut predicted = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[predicted] {
                predicted = i;
            }
        }
        Self { scores, predicted }
    }
}

/// `layers` repetitions of RX·RY·RZ on each qubit followed by a CNOT ring
/// `j → j+1 mod q` (absent for a single qubit).
pub fn build_vqc(qubits: usize, layers: usize) -> Result<Circuit> {
    check_capacity(qubits, DEFAULT_MAX_QUBITS)?;
    let mut circuit = Circuit::new(qubits);
    for _ in 0..layers {
        for qubit in 0..qubits {
            for axis in LAYER_ROTATIONS {
                circuit.push_trainable(axis, qubit)?;
            }
        }
        if qubits > 1 {
            for control in 0..qubits {
                circuit.push(Gate::Cnot {
                    control,
                    target: (control + 1) % qubits,
                })?;
            }
        }
    }
    Ok(circuit)
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `−log softmax(scores)[label]`, temperature 1.
pub fn cross_entropy(scores: &[f64], label: usize) -> Result<f64> {
    if label >= scores.len() {
        return Err(Error::Label {
            label,
            num_classes: scores.len(),
        });
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln() + max;
    Ok((log_total - scores[label]).max(0.0))
}

pub fn loss(prediction: &Prediction, label: usize) -> Result<f64> {
    cross_entropy(&prediction.scores, label)
}

/// `params − η·grad`.
pub fn sgd_step(params: &VqcParams, grad: &[f64], cfg: &TrainConfig) -> Result<VqcParams> {
    if grad.len() != params.len() {
        return Err(Error::Shape {
            expected: params.len(),
            got: grad.len(),
        });
    }
    let angles = params
        .angles
        .iter()
        .zip(grad)
        .map(|(p, g)| p - cfg.learning_rate * g)
        .collect();
    Ok(VqcParams {
        layers: params.layers,
        qubits: params.qubits,
        angles,
    })
}

/// Mean loss and accuracy over a sample set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// Encoder, ansatz and readout for one experiment shape.
#[derive(Clone, Debug)]
pub struct Classifier {
    qubits: usize,
    layers: usize,
    num_classes: usize,
    encoding: EncodingKind,
    state_prep: StatePrep,
    circuit: Circuit,
}

impl Classifier {
    pub fn new(
        qubits: usize,
        layers: usize,
        num_classes: usize,
        encoding: EncodingKind,
        state_prep: StatePrep,
    ) -> Result<Self> {
        if num_classes == 0 || num_classes > qubits {
            return Err(Error::config(
                "classes",
                format!("readout needs 1 <= classes <= qubits, got {num_classes} classes on {qubits} qubits"),
            ));
        }
        Ok(Self {
            qubits,
            layers,
            num_classes,
            encoding,
            state_prep,
            circuit: build_vqc(qubits, layers)?,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn encoding(&self) -> EncodingKind {
        self.encoding
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn init_params(&self, half_width: f64, seed: u64) -> VqcParams {
        VqcParams::random(self.layers, self.qubits, half_width, seed)
    }

    fn check_params(&self, params: &VqcParams) -> Result<()> {
        if params.layers != self.layers || params.qubits != self.qubits {
            return Err(Error::Shape {
                expected: self.circuit.num_params(),
                got: params.len(),
            });
        }
        Ok(())
    }

    fn check_label(&self, sample: &FeatureVector) -> Result<()> {
        if sample.label >= self.num_classes {
            return Err(Error::Label {
                label: sample.label,
                num_classes: self.num_classes,
            });
        }
        Ok(())
    }

    pub fn encode(&self, sample: &FeatureVector) -> Result<StateVector> {
        prepare_state(sample, self.encoding, self.state_prep, self.qubits)
    }

    pub fn forward(&self, params: &VqcParams, sample: &FeatureVector) -> Result<Prediction> {
        self.check_params(params)?;
        let mut state = self.encode(sample)?;
        state.apply_circuit(&self.circuit, params.as_slice())?;
        Ok(Prediction::from_scores(
            state.expectations_z(self.num_classes)?,
        ))
    }

    pub fn sample_loss(&self, params: &VqcParams, sample: &FeatureVector) -> Result<f64> {
        self.check_label(sample)?;
        loss(&self.forward(params, sample)?, sample.label)
    }

    pub fn evaluate(&self, params: &VqcParams, samples: &[FeatureVector]) -> Result<Evaluation> {
        if samples.is_empty() {
            return Err(Error::DegenerateInput(
                "evaluation on an empty sample set".into(),
            ));
        }
        let mut total_loss = 0.0;
        let mut correct = 0usize;
        for sample in samples {
            self.check_label(sample)?;
            let prediction = self.forward(params, sample)?;
            total_loss += loss(&prediction, sample.label)?;
            correct += usize::from(prediction.predicted == sample.label);
        }
        let n = samples.len() as f64;
        Ok(Evaluation {
            loss: total_loss / n,
            accuracy: correct as f64 / n,
        })
    }

    /// Loss and parameter-shift gradient for one sample.
    ///
    /// Each slot is evaluated at `θ ± π/2`; the shifted runs reuse the cached
    /// state preceding that gate. Score derivatives `(S₊ − S₋)/2` are exact for
    /// `exp(−iθσ/2)` gates and are chained through the softmax with
    /// `∂L/∂s_c = p_c − [c = label]`.
    pub fn sample_loss_and_gradient(
        &self,
        params: &VqcParams,
        sample: &FeatureVector,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_params(params)?;
        self.check_label(sample)?;
        let angles = params.as_slice();
        let mut prefix = self.encode(sample)?;
        // score derivative per slot, flattened [slot][class]
        let mut dscores = vec![0.0; angles.len() * self.num_classes];
        for index in 0..self.circuit.len() {
            if let Some(slot) = self.circuit.trainable_gate(index) {
                let plus = self.shifted_scores(&prefix, angles, index, FRAC_PI_2)?;
                let minus = self.shifted_scores(&prefix, angles, index, -FRAC_PI_2)?;
                let row = &mut dscores[slot * self.num_classes..(slot + 1) * self.num_classes];
                for ((d, p), m) in row.iter_mut().zip(&plus).zip(&minus) {
                    *d = (p - m) / 2.0;
                }
            }
            self.circuit
                .apply_gate_at_unchecked(&mut prefix, angles, index, None);
        }
        let scores = prefix.expectations_z(self.num_classes)?;
        let loss = cross_entropy(&scores, sample.label)?;
        let mut dloss = softmax(&scores);
        dloss[sample.label] -= 1.0;
        let grad = dscores
            .chunks_exact(self.num_classes.max(1))
            .map(|row| row.iter().zip(&dloss).map(|(d, w)| d * w).sum())
            .collect();
        Ok((loss, grad))
    }

    fn shifted_scores(
        &self,
        prefix: &StateVector,
        angles: &[f64],
        index: usize,
        delta: f64,
    ) -> Result<Vec<f64>> {
        let mut state = prefix.clone();
        self.circuit
            .apply_gate_at_unchecked(&mut state, angles, index, Some((index, delta)));
        self.circuit
            .apply_range_unchecked(&mut state, angles, index + 1, None);
        state.expectations_z(self.num_classes)
    }

    /// Per-sample losses plus the batch-mean gradient. Samples are evaluated in
    /// parallel and reduced in input order.
    pub fn batch_loss_and_gradient(
        &self,
        params: &VqcParams,
        batch: &[&FeatureVector],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::DegenerateInput("gradient of an empty batch".into()));
        }
        let per_sample: Vec<(f64, Vec<f64>)> = batch
            .par_iter()
            .map(|s| self.sample_loss_and_gradient(params, s))
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; params.len()];
        let mut losses = Vec::with_capacity(batch.len());
        for (loss, g) in &per_sample {
            losses.push(*loss);
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
        }
        let n = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((losses, grad))
    }

    /// Gradient of the mean loss over `batch`.
    pub fn gradient(&self, params: &VqcParams, batch: &[FeatureVector]) -> Result<Vec<f64>> {
        let refs: Vec<&FeatureVector> = batch.iter().collect();
        Ok(self.batch_loss_and_gradient(params, &refs)?.1)
    }

    /// Mini-batch SGD over `shard` for `cfg.local_epochs` epochs, reshuffling
    /// each epoch from `cfg.seed`. Returns the trained parameters and the mean
    /// pre-step sample loss of each epoch.
    pub fn train_local(
        &self,
        params: &VqcParams,
        shard: &[FeatureVector],
        cfg: &TrainConfig,
    ) -> Result<(VqcParams, Vec<f64>)> {
        cfg.validate()?;
        self.check_params(params)?;
        if shard.is_empty() {
            return Err(Error::DegenerateInput(
                "local training on an empty shard".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..shard.len()).collect();
        let mut current = params.clone();
        let mut epoch_losses = Vec::with_capacity(cfg.local_epochs);
        for _ in 0..cfg.local_epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<&FeatureVector> = chunk.iter().map(|&i| &shard[i]).collect();
                let (losses, grad) = self.batch_loss_and_gradient(&current, &batch)?;
                epoch_loss += losses.iter().sum::<f64>();
                current = sgd_step(&current, &grad, cfg)?;
            }
            epoch_losses.push(epoch_loss / shard.len() as f64);
        }
        Ok((current, epoch_losses))
    }
}
