//! Helpers shared by the integration tests: random circuits, a Kronecker
//! product reference simulator and small synthetic datasets.
#![allow(dead_code)]

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64 as C64;
use quanvnet::qsim::{Circuit, GateKind, GateOp};
use quanvnet::rng::SeededRng;

pub type Mat = Vec<Vec<C64>>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn random_op(rng: &mut SeededRng, n_qubits: usize) -> GateOp {
    let kinds: Vec<GateKind> = GateKind::ALL.iter().copied().filter(|k| k.n_qubits() <= n_qubits).collect();
    let kind = kinds[rng.below(kinds.len())];
    let params = (0..kind.arity()).map(|_| rng.angle() * 2.0 - TAU).collect();
    let targets = if kind.n_qubits() == 1 {
        vec![rng.below(n_qubits)]
    } else {
        let a = rng.below(n_qubits);
        let b = (a + 1 + rng.below(n_qubits - 1)) % n_qubits;
        vec![a, b]
    };
    GateOp::new(kind, params, targets).unwrap()
}

pub fn random_circuit(rng: &mut SeededRng, n_qubits: usize, len: usize) -> Circuit {
    let ops = (0..len).map(|_| random_op(rng, n_qubits)).collect();
    Circuit::from_ops(n_qubits, ops).unwrap()
}

/// Textbook 2×2 matrix of a single-qubit gate, or the controlled block of a
/// controlled gate.
pub fn single_matrix(kind: GateKind, p: &[f64]) -> Mat {
    let (zero, one, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    match kind {
        GateKind::X | GateKind::CNOT => vec![vec![zero, one], vec![one, zero]],
        GateKind::Y => vec![vec![zero, -i], vec![i, zero]],
        GateKind::Z | GateKind::CZ => vec![vec![one, zero], vec![zero, -one]],
        GateKind::H => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            vec![vec![h, h], vec![h, -h]]
        }
        GateKind::RX => {
            let (s, co) = ((p[0] / 2.0).sin(), (p[0] / 2.0).cos());
            vec![vec![c(co, 0.0), -i * s], vec![-i * s, c(co, 0.0)]]
        }
        GateKind::RY | GateKind::CRY => {
            let (s, co) = ((p[0] / 2.0).sin(), (p[0] / 2.0).cos());
            vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]]
        }
        GateKind::RZ => vec![vec![(-i * p[0] / 2.0).exp(), zero], vec![zero, (i * p[0] / 2.0).exp()]],
        GateKind::U1 => vec![vec![one, zero], vec![zero, (i * p[0]).exp()]],
        GateKind::U2 => {
            let r = FRAC_1_SQRT_2;
            vec![
                vec![c(r, 0.0), -(i * p[1]).exp() * r],
                vec![(i * p[0]).exp() * r, (i * (p[0] + p[1])).exp() * r],
            ]
        }
        GateKind::U3 => {
            let (s, co) = ((p[0] / 2.0).sin(), (p[0] / 2.0).cos());
            vec![
                vec![c(co, 0.0), -(i * p[2]).exp() * s],
                vec![(i * p[1]).exp() * s, (i * (p[1] + p[2])).exp() * co],
            ]
        }
    }
}

pub fn identity(d: usize) -> Mat {
    (0..d).map(|r| (0..d).map(|col| c((r == col) as u8 as f64, 0.0)).collect()).collect()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (na, nb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); na * nb]; na * nb];
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[i * nb + k][j * nb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
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

/// `ops[n-1] ⊗ … ⊗ ops[0]`: qubit 0 is the least significant index bit.
fn on_qubits(n: usize, mut f: impl FnMut(usize) -> Mat) -> Mat {
    let mut acc = f(n - 1);
    for q in (0..n - 1).rev() {
        acc = kron(&acc, &f(q));
    }
    acc
}

/// Full `2^n × 2^n` matrix of one op, built from Kronecker products and
/// projectors `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ V` for controlled gates.
pub fn reference_op_matrix(op: &GateOp, n: usize) -> Mat {
    let m = single_matrix(op.kind, &op.params);
    if op.kind.n_qubits() == 1 {
        let t = op.targets[0];
        return on_qubits(n, |q| if q == t { m.clone() } else { identity(2) });
    }
    let (ctrl, tgt) = (op.targets[0], op.targets[1]);
    let zero = c(0.0, 0.0);
    let p0 = vec![vec![c(1.0, 0.0), zero], vec![zero, zero]];
    let p1 = vec![vec![zero, zero], vec![zero, c(1.0, 0.0)]];
    let off = on_qubits(n, |q| if q == ctrl { p0.clone() } else { identity(2) });
    let on = on_qubits(n, |q| {
        if q == ctrl {
            p1.clone()
        } else if q == tgt {
            m.clone()
        } else {
            identity(2)
        }
    });
    add(&off, &on)
}

pub fn reference_circuit_matrix(circuit: &Circuit) -> Mat {
    let n = circuit.n_qubits();
    circuit
        .ops()
        .iter()
        .fold(identity(1 << n), |acc, op| matmul(&reference_op_matrix(op, n), &acc))
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Writes `n` random RGB PPM files of `h×w` pixels and returns their paths.
pub fn write_random_ppms(dir: &std::path::Path, n: usize, h: usize, w: usize, seed: u64) -> Vec<std::path::PathBuf> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|i| {
            let bytes: Vec<u8> = (0..h * w * 3).map(|_| rng.below(256) as u8).collect();
            let path = dir.join(format!("img{i:03}.ppm"));
            std::fs::write(&path, quanvnet::data::encode_ppm(w, h, 3, &bytes).unwrap()).unwrap();
            path
        })
        .collect()
}

pub fn random_gray(rng: &mut SeededRng, h: usize, w: usize) -> quanvnet::data::ImageTensor {
    let v = (0..h * w).map(|_| rng.unit_f64() as f32).collect();
    quanvnet::data::ImageTensor::gray(h, w, v).unwrap()
}

/// Floor under the relative-error denominator so exact-zero gradients
/// (dead ReLUs, unselected pool inputs) compare on absolute error.
pub const GRAD_REL_FLOOR: f64 = 1e-4;

/// Central-difference check of every parameter of the tiny check model.
/// Returns (worst relative error, parameters checked).
pub fn tiny_gradient_check(seed: u64, h: f64) -> (f64, usize) {
    use quanvnet::nn::{Activation, LayerSpec, Mode, Model, ModelSpec, Tensor};
    let spec = ModelSpec {
        input: [8, 8, 4],
        layers: vec![
            LayerSpec::Conv2D { out_channels: 2, kernel: 3 },
            LayerSpec::MaxPool2,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 8, activation: Activation::Relu },
            LayerSpec::Dense { units: 3, activation: Activation::None },
        ],
        n_classes: 3,
    };
    let mut model = Model::<f64>::init(spec, seed).unwrap();
    let mut rng = SeededRng::new(seed ^ 0x9e37);
    // nonzero biases so ReLU kinks are not hit by symmetric ties
    for p in model.params.iter_mut() {
        for v in p.data_mut() {
            *v += 0.05 * (rng.unit_f64() - 0.5);
        }
    }
    let n = 3;
    let x = Tensor::new(vec![n, 8, 8, 4], (0..n * 256).map(|_| rng.unit_f64()).collect()).unwrap();
    let mut onehot = Tensor::zeros(vec![n, 3]);
    for i in 0..n {
        onehot.data_mut()[i * 3 + i % 3] = 1.0;
    }
    let (_, grads, _) = model.loss_and_grads(&x, &onehot, Mode::Eval).unwrap();
    let loss = |m: &Model<f64>| m.loss_and_grads(&x, &onehot, Mode::Eval).unwrap().0;
    let mut worst = 0.0f64;
    let mut count = 0;
    for (pi, grad) in grads.iter().enumerate() {
        for j in 0..grad.len() {
            let orig = model.params[pi].data()[j];
            model.params[pi].data_mut()[j] = orig + h;
            let up = loss(&model);
            model.params[pi].data_mut()[j] = orig - h;
            let down = loss(&model);
            model.params[pi].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grad.data()[j];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_REL_FLOOR);
            worst = worst.max(rel);
            count += 1;
        }
    }
    (worst, count)
}
