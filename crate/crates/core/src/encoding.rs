//! Classical preprocessing and state preparation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qstate::{Circuit, Gate, StateVector};

/// One labelled sample.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: usize,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, label: usize) -> Self {
        Self { values, label }
    }
}

/// Feature preprocessing applied before state preparation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EncodingKind {
    /// Values pass through unchanged.
    Vanilla,
    /// Each sample is centred on its own feature mean.
    Mean,
    /// 0.5 is subtracted from every value (features are assumed in [0, 1]).
    Half,
}

impl EncodingKind {
    pub const ALL: [EncodingKind; 3] = [
        EncodingKind::Vanilla,
        EncodingKind::Mean,
        EncodingKind::Half,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EncodingKind::Vanilla => "vanilla",
            EncodingKind::Mean => "mean",
            EncodingKind::Half => "half",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vanilla" => Ok(EncodingKind::Vanilla),
            "mean" => Ok(EncodingKind::Mean),
            "half" => Ok(EncodingKind::Half),
            other => Err(format!(
                "unknown encoding `{other}` (expected vanilla, mean or half)"
            )),
        }
    }
}

/// How preprocessed features are loaded into the register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StatePrep {
    /// `RY(π·x_j)` on qubit `j mod q`.
    Angle,
    /// Features become the (normalized) amplitudes.
    Amplitude,
}

impl StatePrep {
    pub fn as_str(self) -> &'static str {
        match self {
            StatePrep::Angle => "angle",
            StatePrep::Amplitude => "amplitude",
        }
    }
}

impl FromStr for StatePrep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "angle" => Ok(StatePrep::Angle),
            "amplitude" => Ok(StatePrep::Amplitude),
            other => Err(format!(
                "unknown state_prep `{other}` (expected angle or amplitude)"
            )),
        }
    }
}

pub fn preprocess(features: &FeatureVector, kind: EncodingKind) -> Result<FeatureVector> {
    if features.values.is_empty() {
        return Err(Error::DegenerateInput("empty feature vector".into()));
    }
    let values = match kind {
        EncodingKind::Vanilla => features.values.clone(),
        EncodingKind::Mean => {
            let mean = features.values.iter().sum::<f64>() / features.values.len() as f64;
            features.values.iter().map(|v| v - mean).collect()
        }
        EncodingKind::Half => features.values.iter().map(|v| v - 0.5).collect(),
    };
    Ok(FeatureVector::new(values, features.label))
}

/// Fixed (untrainable) RY encoder. Values beyond `num_qubits` wrap round-robin
/// into further sub-layers; missing values are implicit zeros.
pub fn angle_encode(features: &FeatureVector, num_qubits: usize) -> Result<Circuit> {
    if num_qubits == 0 {
        return Err(Error::Capacity {
            requested: 0,
            max: crate::qstate::DEFAULT_MAX_QUBITS,
        });
    }
    let mut circuit = Circuit::new(num_qubits);
    for (j, &value) in features.values.iter().enumerate() {
        circuit.push(Gate::Ry(j % num_qubits, value))?;
    }
    Ok(circuit)
}

pub fn amplitude_encode(features: &FeatureVector, num_qubits: usize) -> Result<StateVector> {
    let dim = 1usize
        .checked_shl(num_qubits as u32)
        .filter(|_| num_qubits > 0)
        .ok_or(Error::Capacity {
            requested: num_qubits,
            max: crate::qstate::DEFAULT_MAX_QUBITS,
        })?;
    if features.values.len() > dim {
        return Err(Error::Shape {
            expected: dim,
            got: features.values.len(),
        });
    }
    let norm = features.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() || norm <= 0.0 {
        return Err(Error::DegenerateInput(
            "amplitude encoding of an all-zero feature vector".into(),
        ));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
    for (a, v) in amplitudes.iter_mut().zip(&features.values) {
        *a = Complex64::new(v / norm, 0.0);
    }
    StateVector::from_amplitudes(amplitudes)
}

/// Preprocesses `sample` and loads it into a fresh `num_qubits` register,
/// scaling values to radians by π for angle preparation.
pub fn prepare_state(
    sample: &FeatureVector,
    kind: EncodingKind,
    prep: StatePrep,
    num_qubits: usize,
) -> Result<StateVector> {
    let processed = preprocess(sample, kind)?;
    match prep {
        StatePrep::Angle => {
            let radians = FeatureVector::new(
                processed.values.iter().map(|v| v * PI).collect(),
                processed.label,
            );
            let encoder = angle_encode(&radians, num_qubits)?;
            let mut state = StateVector::zero(num_qubits)?;
            state.apply_circuit(&encoder, &[])?;
            Ok(state)
        }
        StatePrep::Amplitude => amplitude_encode(&processed, num_qubits),
    }
}

/// Block-average pooling of a row-major `height × width` image onto
/// `target_side × target_side`. Block edges are `floor(i·side/target)`, so
/// uneven sizes still partition the source.
pub fn resize_image(
    pixels: &[f64],
    height: usize,
    width: usize,
    target_side: usize,
) -> Result<Vec<f64>> {
    if pixels.len() != height * width {
        return Err(Error::Shape {
            expected: height * width,
            got: pixels.len(),
        });
    }
    if target_side == 0 || target_side > height || target_side > width {
        return Err(Error::DegenerateInput(format!(
            "cannot resize {height}x{width} image to {target_side}x{target_side}"
        )));
    }
    let mut out = Vec::with_capacity(target_side * target_side);
    for br in 0..target_side {
        let (r0, r1) = (br * height / target_side, (br + 1) * height / target_side);
        for bc in 0..target_side {
            let (c0, c1) = (bc * width / target_side, (bc + 1) * width / target_side);
            let sum: f64 = (r0..r1)
                .map(|r| pixels[r * width + c0..r * width + c1].iter().sum::<f64>())
                .sum();
            out.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    Ok(out)
}
