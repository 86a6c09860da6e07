//! Test-only reference implementations. Nothing here calls into the
//! simulator's kernels or gate matrices.
#![allow(dead_code)]

use num_complex::Complex64;
use qflsim::qstate::{Circuit, Gate};
use rand::Rng;

pub type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) })
                .collect()
        })
        .collect()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn dagger(a: &Matrix) -> Matrix {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| a[j][i].conj()).collect())
        .collect()
}

fn single(gate: &Gate) -> Matrix {
    let half = |t: f64| (t / 2.0).cos();
    let sin = |t: f64| (t / 2.0).sin();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match *gate {
        Gate::PauliX(_) => vec![vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]],
        Gate::PauliY(_) => vec![vec![c(0., 0.), c(0., -1.)], vec![c(0., 1.), c(0., 0.)]],
        Gate::PauliZ(_) => vec![vec![c(1., 0.), c(0., 0.)], vec![c(0., 0.), c(-1., 0.)]],
        Gate::Hadamard(_) => vec![vec![c(s, 0.), c(s, 0.)], vec![c(s, 0.), c(-s, 0.)]],
        Gate::Rx(_, t) => vec![
            vec![c(half(t), 0.), c(0., -sin(t))],
            vec![c(0., -sin(t)), c(half(t), 0.)],
        ],
        Gate::Ry(_, t) => vec![
            vec![c(half(t), 0.), c(-sin(t), 0.)],
            vec![c(sin(t), 0.), c(half(t), 0.)],
        ],
        Gate::Rz(_, t) => vec![
            vec![c(half(t), -sin(t)), c(0., 0.)],
            vec![c(0., 0.), c(half(t), sin(t))],
        ],
        Gate::Cnot { .. } => unreachable!(),
    }
}

/// `op` on qubit `target`, identity elsewhere; qubit 0 is the leftmost factor.
fn embed(op: &Matrix, target: usize, q: usize) -> Matrix {
    let mut out = identity(1);
    for j in 0..q {
        out = if j == target {
            kron(&out, op)
        } else {
            kron(&out, &identity(2))
        };
    }
    out
}

fn projector(bit: usize) -> Matrix {
    let mut p = vec![vec![c(0., 0.); 2]; 2];
    p[bit][bit] = c(1., 0.);
    p
}

/// Full `2^q × 2^q` unitary of a single gate by explicit Kronecker products.
pub fn gate_unitary(gate: &Gate, q: usize) -> Matrix {
    match *gate {
        Gate::Cnot { control, target } => {
            let x = single(&Gate::PauliX(0));
            let mut off = identity(1);
            let mut on = identity(1);
            for j in 0..q {
                let (a, b) = if j == control {
                    (projector(0), projector(1))
                } else if j == target {
                    (identity(2), x.clone())
                } else {
                    (identity(2), identity(2))
                };
                off = kron(&off, &a);
                on = kron(&on, &b);
            }
            off.iter()
                .zip(&on)
                .map(|(r0, r1)| r0.iter().zip(r1).map(|(a, b)| a + b).collect())
                .collect()
        }
        Gate::PauliX(t)
        | Gate::PauliY(t)
        | Gate::PauliZ(t)
        | Gate::Hadamard(t)
        | Gate::Rx(t, _)
        | Gate::Ry(t, _)
        | Gate::Rz(t, _) => embed(&single(gate), t, q),
    }
}

pub fn circuit_unitary(gates: &[Gate], q: usize) -> Matrix {
    gates
        .iter()
        .fold(identity(1 << q), |acc, g| matmul(&gate_unitary(g, q), &acc))
}

pub fn apply(u: &Matrix, psi: &[Complex64]) -> Vec<Complex64> {
    u.iter()
        .map(|row| row.iter().zip(psi).map(|(a, b)| a * b).sum())
        .collect()
}

/// `⟨ψ|Z_i|ψ⟩` with `Z_i` built as a Kronecker product.
pub fn expectation_z(psi: &[Complex64], qubit: usize, q: usize) -> f64 {
    let z = embed(&single(&Gate::PauliZ(0)), qubit, q);
    let zpsi = apply(&z, psi);
    psi.iter().zip(&zpsi).map(|(a, b)| (a.conj() * b).re).sum()
}

pub fn basis_zero(q: usize) -> Vec<Complex64> {
    let mut v = vec![c(0., 0.); 1 << q];
    v[0] = c(1., 0.);
    v
}

pub fn random_gate<R: Rng>(rng: &mut R, q: usize) -> Gate {
    let t = rng.random_range(0..q);
    let theta = rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI);
    let choices = if q > 1 { 8 } else { 7 };
    match rng.random_range(0..choices) {
        0 => Gate::PauliX(t),
        1 => Gate::PauliY(t),
        2 => Gate::PauliZ(t),
        3 => Gate::Hadamard(t),
        4 => Gate::Rx(t, theta),
        5 => Gate::Ry(t, theta),
        6 => Gate::Rz(t, theta),
        _ => {
            let target = (t + rng.random_range(1..q)) % q;
            Gate::Cnot { control: t, target }
        }
    }
}

/// `(q, gates)` with `q ≤ max_q` and at most `max_gates` gates.
pub fn random_circuit<R: Rng>(rng: &mut R, max_q: usize, max_gates: usize) -> (usize, Vec<Gate>) {
    let q = rng.random_range(1..=max_q);
    let len = rng.random_range(0..=max_gates);
    (q, (0..len).map(|_| random_gate(rng, q)).collect())
}

pub fn build(q: usize, gates: &[Gate]) -> Circuit {
    let mut circuit = Circuit::new(q);
    for g in gates {
        circuit.push(*g).unwrap();
    }
    circuit
}

/// Largest `|ψ_i − φ_i|`.
pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Repository fixture directory.
pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}
