use std::fmt;

use num_complex::Complex64 as C64;

use super::gate::{GateOp, UnitaryMatrix};
use super::state::{StateVector, MAX_QUBITS};
use crate::error::{Error, Result};

/// Largest register `dense_circuit_matrix` will expand.
pub const MAX_DENSE_QUBITS: usize = 6;

/// Ordered gate list over a fixed register size.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            ops: Vec::new(),
        }
    }

    pub fn from_ops(n_qubits: usize, ops: Vec<GateOp>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits);
        for op in ops {
            c.push(op)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        op.validate(self.n_qubits)?;
        self.ops.push(op);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Parse the one-op-per-line text form. Blank lines and `#` comments are
    /// skipped.
    pub fn parse(n_qubits: usize, text: &str) -> Result<Self> {
        let ops = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect::<Result<Vec<GateOp>>>()?;
        Circuit::from_ops(n_qubits, ops)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.ops {
            writeln!(f, "{op}")?;
        }
        Ok(())
    }
}

/// Apply every op of `circuit` in order.
pub fn run_circuit(circuit: &Circuit, mut state: StateVector) -> Result<StateVector> {
    if circuit.n_qubits != state.n_qubits() {
        return Err(Error::Dimension(format!(
            "circuit on {} qubits, state has {}",
            circuit.n_qubits,
            state.n_qubits()
        )));
    }
    for op in &circuit.ops {
        state.apply(op)?;
    }
    Ok(state)
}

/// Full `2^n × 2^n` unitary of a circuit, built by lifting each gate to the
/// whole register and multiplying. Test oracle only.
pub fn dense_circuit_matrix(circuit: &Circuit) -> Result<UnitaryMatrix> {
    let n = circuit.n_qubits;
    if n == 0 || n > MAX_DENSE_QUBITS.min(MAX_QUBITS) {
        return Err(Error::Capacity(format!(
            "dense expansion limited to 1..={MAX_DENSE_QUBITS} qubits, got {n}"
        )));
    }
    let dim = 1usize << n;
    circuit
        .ops
        .iter()
        .try_fold(UnitaryMatrix::identity(dim), |acc, op| {
            Ok(lift(op, n).matmul(&acc))
        })
}

/// Embed a gate's local matrix into the register: entry (i, j) is the local
/// entry for the targets' bits when all other bits agree, zero otherwise.
fn lift(op: &GateOp, n: usize) -> UnitaryMatrix {
    let local = op.matrix();
    let dim = 1usize << n;
    // local index = Σ bit(targets[k]) << (len-1-k): first listed qubit is the
    // most significant local bit
    let local_index = |b: usize| {
        op.targets
            .iter()
            .fold(0usize, |acc, &q| (acc << 1) | ((b >> q) & 1))
    };
    let target_mask: usize = op.targets.iter().map(|&q| 1usize << q).sum();
    let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            if i & !target_mask == j & !target_mask {
                entries[i * dim + j] = local.get(local_index(i), local_index(j));
            }
        }
    }
    UnitaryMatrix { dim, entries }
}
