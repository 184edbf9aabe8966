//! Dense state-vector simulator.
//!
//! Basis index `b` encodes qubit `q` as bit `q` of `b` (qubit 0 is the least
//! significant bit). All arithmetic is `f64`.

mod circuit;
mod gate;
mod state;

pub use circuit::{dense_circuit_matrix, run_circuit, Circuit, MAX_DENSE_QUBITS};
pub use gate::{gate_matrix, GateKind, GateOp, UnitaryMatrix};
pub use state::{apply_gate, pauli_z_expectation, state_zero, StateVector, MAX_QUBITS};

pub type ComplexAmplitude = num_complex::Complex64;
