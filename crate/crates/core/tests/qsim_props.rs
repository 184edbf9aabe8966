mod common;

use common::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use quanvnet::qsim::{
    apply_gate, dense_circuit_matrix, gate_matrix, pauli_z_expectation, run_circuit, state_zero, Circuit, GateKind,
    GateOp, StateVector,
};
use quanvnet::rng::SeededRng;

fn random_state(rng: &mut SeededRng, n: usize) -> StateVector {
    let raw: Vec<C64> = (0..1 << n).map(|_| C64::new(rng.unit_f64() - 0.5, rng.unit_f64() - 0.5)).collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(raw.into_iter().map(|a| a / norm).collect()).unwrap()
}

#[test]
fn gate_matrices_match_textbook_definitions() {
    let mut rng = SeededRng::new(11);
    for kind in GateKind::ALL {
        for _ in 0..20 {
            let p: Vec<f64> = (0..kind.arity()).map(|_| rng.angle()).collect();
            let op = GateOp::new(kind, p.clone(), (0..kind.n_qubits()).rev().collect()).unwrap();
            // the library's 2-qubit matrices index the first-listed qubit as
            // the high bit; with targets [1, 0] that is plain little-endian
            let lib = gate_matrix(kind, &p).unwrap();
            let reference = reference_op_matrix(&op, kind.n_qubits());
            for (r, row) in reference.iter().enumerate() {
                for (col, v) in row.iter().enumerate() {
                    assert!((lib.get(r, col) - v).norm() < 1e-14, "{kind} entry ({r}, {col})");
                }
            }
        }
    }
}

#[test]
fn simulator_matches_kronecker_reference() {
    let mut rng = SeededRng::new(12);
    for _ in 0..100 {
        let n = 1 + rng.below(4);
        let len = rng.below(30);
        let circuit = random_circuit(&mut rng, n, len);
        let psi = random_state(&mut rng, n);
        let got = run_circuit(&circuit, psi.clone()).unwrap();
        let u = reference_circuit_matrix(&circuit);
        let want: Vec<C64> = u
            .iter()
            .map(|row| row.iter().zip(psi.amplitudes()).map(|(a, b)| a * b).sum())
            .collect();
        assert!(max_diff(got.amplitudes(), &want) < 1e-10);
        let dense = dense_circuit_matrix(&circuit).unwrap();
        for (r, row) in u.iter().enumerate() {
            for (col, v) in row.iter().enumerate() {
                assert!((dense.get(r, col) - v).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn involutions() {
    let mut rng = SeededRng::new(13);
    for kind in [GateKind::X, GateKind::Y, GateKind::Z, GateKind::H, GateKind::CNOT, GateKind::CZ] {
        let targets = if kind.n_qubits() == 1 { vec![1] } else { vec![2, 0] };
        let op = GateOp::new(kind, vec![], targets).unwrap();
        let psi = random_state(&mut rng, 3);
        let twice = apply_gate(apply_gate(psi.clone(), &op).unwrap(), &op).unwrap();
        assert!(max_diff(twice.amplitudes(), psi.amplitudes()) < 1e-12, "{kind}");
    }
}

#[test]
fn ry_readout_identity() {
    for k in 0..64 {
        let theta = k as f64 * 0.1 - 3.2;
        let s = apply_gate(state_zero(1).unwrap(), &GateOp::ry(0, theta)).unwrap();
        assert!((pauli_z_expectation(&s, 0).unwrap() - theta.cos()).abs() < 1e-12);
    }
}

#[test]
fn errors() {
    assert!(state_zero(0).is_err());
    assert!(state_zero(25).is_err());
    assert!(apply_gate(state_zero(2).unwrap(), &GateOp::single(GateKind::X, 2)).is_err());
    assert!(GateOp::new(GateKind::CNOT, vec![], vec![1, 1]).is_err());
    assert!(GateOp::new(GateKind::RY, vec![], vec![0]).is_err());
    assert!(dense_circuit_matrix(&Circuit::new(7)).is_err());
    assert!(run_circuit(&Circuit::new(2), state_zero(3).unwrap()).is_err());
    assert!(pauli_z_expectation(&state_zero(2).unwrap(), 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_preserved(seed in any::<u64>(), n in 1usize..6, len in 0usize..60) {
        let mut rng = SeededRng::new(seed);
        let circuit = random_circuit(&mut rng, n, len);
        let out = run_circuit(&circuit, random_state(&mut rng, n)).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        for q in 0..n {
            let z = pauli_z_expectation(&out, q).unwrap();
            prop_assert!((-1.0..=1.0).contains(&z));
        }
    }

    #[test]
    fn gates_are_unitary(kind_idx in 0usize..13, a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
        let kind = GateKind::ALL[kind_idx];
        let m = gate_matrix(kind, &[a, b, c][..kind.arity()]).unwrap();
        prop_assert!(m.unitarity_error() < 1e-12);
    }

    #[test]
    fn rotations_add(kind_idx in 0usize..3, a in -7.0f64..7.0, b in -7.0f64..7.0, q in 0usize..3, seed in any::<u64>()) {
        let kind = [GateKind::RX, GateKind::RY, GateKind::RZ][kind_idx];
        let psi = random_state(&mut SeededRng::new(seed), 3);
        let split = apply_gate(apply_gate(psi.clone(), &GateOp::rotation(kind, q, a)).unwrap(), &GateOp::rotation(kind, q, b)).unwrap();
        let joined = apply_gate(psi, &GateOp::rotation(kind, q, a + b)).unwrap();
        prop_assert!(max_diff(split.amplitudes(), joined.amplitudes()) < 1e-12);
    }

    #[test]
    fn circuit_text_round_trip(seed in any::<u64>(), n in 1usize..5, len in 0usize..20) {
        let circuit = random_circuit(&mut SeededRng::new(seed), n, len);
        let parsed = Circuit::parse(n, &circuit.to_string()).unwrap();
        let a = run_circuit(&circuit, state_zero(n).unwrap()).unwrap();
        let b = run_circuit(&parsed, state_zero(n).unwrap()).unwrap();
        prop_assert!(max_diff(a.amplitudes(), b.amplitudes()) < 1e-12);
    }
}
