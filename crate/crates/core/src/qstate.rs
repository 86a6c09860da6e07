//! Dense statevector simulator.
//!
//! Amplitudes are stored in big-endian qubit order: in basis index `i`, qubit 0
//! is the most significant bit, so for `q = 2` the order is `|00⟩, |01⟩, |10⟩, |11⟩`
//! with the left label belonging to qubit 0. Rotations follow the usual
//! `R_σ(θ) = exp(−iθσ/2)` convention.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register a [`StateVector`] will allocate unless asked otherwise.
pub const DEFAULT_MAX_QUBITS: usize = 12;

const NORM_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `num_qubits` qubits, capped at [`DEFAULT_MAX_QUBITS`].
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::zero_with_max(num_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn zero_with_max(num_qubits: usize, max_qubits: usize) -> Result<Self> {
        check_capacity(num_qubits, max_qubits)?;
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[0] = ONE;
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. The length must be a power of two and the vector
    /// must be normalized.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_capacity(num_qubits, DEFAULT_MAX_QUBITS)?;
        let state = Self {
            num_qubits,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!("squared norm {norm} != 1")));
        }
        Ok(state)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(Complex64::norm_sqr).collect()
    }

    /// ⟨ψ|Z_qubit|ψ⟩.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = self.mask(qubit);
        let value = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & mask == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum::<f64>();
        Ok(value.clamp(-1.0, 1.0))
    }

    /// Z expectations for qubits `0..count`, computed in one pass.
    pub fn expectations_z(&self, count: usize) -> Result<Vec<f64>> {
        if count > self.num_qubits {
            return Err(Error::QubitIndex {
                index: count.saturating_sub(1),
                num_qubits: self.num_qubits,
            });
        }
        let mut out = vec![0.0; count];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (qubit, acc) in out.iter_mut().enumerate() {
                if i & self.mask(qubit) == 0 {
                    *acc += p;
                } else {
                    *acc -= p;
                }
            }
        }
        out.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
        Ok(out)
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    /// Consuming variant of [`apply_gate`](Self::apply_gate).
    pub fn with_gate(mut self, gate: &Gate) -> Result<Self> {
        self.apply_gate(gate)?;
        Ok(self)
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit, params: &[f64]) -> Result<()> {
        circuit.check_compatible(self, params)?;
        circuit.apply_range_unchecked(self, params, 0, None);
        Ok(())
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::PauliX(t) => self.for_pairs(t, std::mem::swap),
            Gate::PauliY(t) => self.for_pairs(t, |a, b| {
                let (x, y) = (*a, *b);
                *a = -I * y;
                *b = I * x;
            }),
            Gate::PauliZ(t) => self.for_pairs(t, |_, b| *b = -*b),
            Gate::Hadamard(t) => self.for_pairs(t, |a, b| {
                let (x, y) = (*a, *b);
                *a = (x + y) * FRAC_1_SQRT_2;
                *b = (x - y) * FRAC_1_SQRT_2;
            }),
            Gate::Cnot { control, target } => {
                let cmask = self.mask(control);
                let tmask = self.mask(target);
                for i in 0..self.amplitudes.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
            Gate::Rx(t, theta) => {
                let (c, s) = half_angle(theta);
                let ms = Complex64::new(0.0, -s);
                self.for_pairs(t, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c + ms * y;
                    *b = ms * x + y * c;
                });
            }
            Gate::Ry(t, theta) => {
                let (c, s) = half_angle(theta);
                self.for_pairs(t, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c - y * s;
                    *b = x * s + y * c;
                });
            }
            Gate::Rz(t, theta) => {
                let (c, s) = half_angle(theta);
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                self.for_pairs(t, |a, b| {
                    *a *= lo;
                    *b *= hi;
                });
            }
        }
    }

    /// Visits every amplitude pair differing only in `target`'s bit, as
    /// (bit clear, bit set).
    #[inline]
    fn for_pairs(&mut self, target: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let stride = self.mask(target);
        for block in self.amplitudes.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    }
}

pub(crate) fn check_capacity(num_qubits: usize, max_qubits: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > max_qubits {
        return Err(Error::Capacity {
            requested: num_qubits,
            max: max_qubits,
        });
    }
    Ok(())
}

#[inline]
fn half_angle(theta: f64) -> (f64, f64) {
    let (s, c) = (theta / 2.0).sin_cos();
    (c, s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    PauliX,
    PauliY,
    PauliZ,
    Hadamard,
    Cnot,
    Rx,
    Ry,
    Rz,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::PauliX,
        GateKind::PauliY,
        GateKind::PauliZ,
        GateKind::Hadamard,
        GateKind::Cnot,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
    ];

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }
}

/// Rotation axis of a trainable gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    PauliX(usize),
    PauliY(usize),
    PauliZ(usize),
    Hadamard(usize),
    Cnot { control: usize, target: usize },
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
}

impl Gate {
    pub fn rotation(axis: Axis, qubit: usize, theta: f64) -> Self {
        match axis {
            Axis::X => Gate::Rx(qubit, theta),
            Axis::Y => Gate::Ry(qubit, theta),
            Axis::Z => Gate::Rz(qubit, theta),
        }
    }

    pub fn kind(&self) -> GateKind {
        match self {
            Gate::PauliX(_) => GateKind::PauliX,
            Gate::PauliY(_) => GateKind::PauliY,
            Gate::PauliZ(_) => GateKind::PauliZ,
            Gate::Hadamard(_) => GateKind::Hadamard,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Rx(..) => GateKind::Rx,
            Gate::Ry(..) => GateKind::Ry,
            Gate::Rz(..) => GateKind::Rz,
        }
    }

    /// Qubits the gate acts on; for CNOT the order is (control, target).
    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Gate::PauliX(t)
            | Gate::PauliY(t)
            | Gate::PauliZ(t)
            | Gate::Hadamard(t)
            | Gate::Rx(t, _)
            | Gate::Ry(t, _)
            | Gate::Rz(t, _) => vec![t],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(_, a) | Gate::Ry(_, a) | Gate::Rz(_, a) => Some(a),
            _ => None,
        }
    }

    /// Same gate with its rotation angle replaced. Non-rotations are returned
    /// unchanged.
    pub fn with_angle(&self, theta: f64) -> Self {
        match *self {
            Gate::Rx(t, _) => Gate::Rx(t, theta),
            Gate::Ry(t, _) => Gate::Ry(t, theta),
            Gate::Rz(t, _) => Gate::Rz(t, theta),
            other => other,
        }
    }

    /// The gate inverse.
    pub fn inverse(&self) -> Self {
        match *self {
            Gate::Rx(t, a) => Gate::Rx(t, -a),
            Gate::Ry(t, a) => Gate::Ry(t, -a),
            Gate::Rz(t, a) => Gate::Rz(t, -a),
            other => other,
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        for &t in &self.targets() {
            if t >= num_qubits {
                return Err(Error::QubitIndex {
                    index: t,
                    num_qubits,
                });
            }
        }
        if let Gate::Cnot { control, target } = *self {
            if control == target {
                return Err(Error::DuplicateTarget { control, target });
            }
        }
        Ok(())
    }

    /// Local unitary, row-major: 2×2 for single-qubit gates, 4×4 for CNOT with
    /// the control as the high bit.
    pub fn matrix(&self) -> Vec<Complex64> {
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match *self {
            Gate::PauliX(_) => vec![ZERO, ONE, ONE, ZERO],
            Gate::PauliY(_) => vec![ZERO, -I, I, ZERO],
            Gate::PauliZ(_) => vec![ONE, ZERO, ZERO, -ONE],
            Gate::Hadamard(_) => vec![r, r, r, -r],
            Gate::Cnot { .. } => {
                let mut m = vec![ZERO; 16];
                m[0] = ONE;
                m[5] = ONE;
                m[11] = ONE;
                m[14] = ONE;
                m
            }
            Gate::Rx(_, a) => {
                let (c, s) = half_angle(a);
                let ms = Complex64::new(0.0, -s);
                vec![c.into(), ms, ms, c.into()]
            }
            Gate::Ry(_, a) => {
                let (c, s) = half_angle(a);
                vec![c.into(), (-s).into(), s.into(), c.into()]
            }
            Gate::Rz(_, a) => {
                let (c, s) = half_angle(a);
                vec![Complex64::new(c, -s), ZERO, ZERO, Complex64::new(c, s)]
            }
        }
    }
}

/// Links a trainable angle to a position in the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamSlot {
    pub gate: usize,
    pub param: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    param_slots: Vec<ParamSlot>,
    // per gate: index into the flat parameter vector, if trainable
    gate_param: Vec<Option<usize>>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            gates: Vec::new(),
            param_slots: Vec::new(),
            gate_param: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn param_slots(&self) -> &[ParamSlot] {
        &self.param_slots
    }

    pub fn num_params(&self) -> usize {
        self.param_slots.len()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Appends a fixed gate.
    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.num_qubits)?;
        self.gates.push(gate);
        self.gate_param.push(None);
        Ok(self)
    }

    /// Appends a rotation whose angle is read from the next parameter slot.
    pub fn push_trainable(&mut self, axis: Axis, qubit: usize) -> Result<usize> {
        let gate = Gate::rotation(axis, qubit, 0.0);
        gate.validate(self.num_qubits)?;
        let param = self.param_slots.len();
        self.param_slots.push(ParamSlot {
            gate: self.gates.len(),
            param,
        });
        self.gate_param.push(Some(param));
        self.gates.push(gate);
        Ok(param)
    }

    /// Parameter index feeding gate `gate`, if it is trainable.
    pub fn trainable_gate(&self, gate: usize) -> Option<usize> {
        self.gate_param.get(gate).copied().flatten()
    }

    pub(crate) fn check_compatible(&self, state: &StateVector, params: &[f64]) -> Result<()> {
        if state.num_qubits() != self.num_qubits {
            return Err(Error::Shape {
                expected: self.num_qubits,
                got: state.num_qubits(),
            });
        }
        if params.len() != self.param_slots.len() {
            return Err(Error::Arity {
                expected: self.param_slots.len(),
                got: params.len(),
            });
        }
        Ok(())
    }

    /// Applies gates `start..` to `state`, substituting slot angles from
    /// `params`. When `shift = Some((g, delta))`, gate `g`'s angle is offset by
    /// `delta`.
    pub(crate) fn apply_range_unchecked(
        &self,
        state: &mut StateVector,
        params: &[f64],
        start: usize,
        shift: Option<(usize, f64)>,
    ) {
        for (index, gate) in self.gates.iter().enumerate().skip(start) {
            self.apply_one_unchecked(state, params, index, gate, shift);
        }
    }

    #[inline]
    pub(crate) fn apply_gate_at_unchecked(
        &self,
        state: &mut StateVector,
        params: &[f64],
        index: usize,
        shift: Option<(usize, f64)>,
    ) {
        self.apply_one_unchecked(state, params, index, &self.gates[index], shift);
    }

    #[inline]
    fn apply_one_unchecked(
        &self,
        state: &mut StateVector,
        params: &[f64],
        index: usize,
        gate: &Gate,
        shift: Option<(usize, f64)>,
    ) {
        let extra = match shift {
            Some((g, delta)) if g == index => delta,
            _ => 0.0,
        };
        match self.gate_param[index] {
            Some(p) => state.apply_unchecked(&gate.with_angle(params[p] + extra)),
            None if extra != 0.0 => {
                state.apply_unchecked(&gate.with_angle(gate.angle().unwrap_or(0.0) + extra))
            }
            None => state.apply_unchecked(gate),
        }
    }
}
