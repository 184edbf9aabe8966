use num_complex::Complex64 as C64;

use super::gate::{GateKind, GateOp, UnitaryMatrix};
use crate::error::{Error, Result};

/// Soft cap on register size; the pipeline itself needs four qubits.
pub const MAX_QUBITS: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

/// The all-zero basis state `|0…0⟩`.
pub fn state_zero(n_qubits: usize) -> Result<StateVector> {
    StateVector::zero(n_qubits)
}

/// Apply one gate, returning the evolved state.
pub fn apply_gate(mut state: StateVector, op: &GateOp) -> Result<StateVector> {
    state.apply(op)?;
    Ok(state)
}

/// `⟨Z⟩` on one qubit.
pub fn pauli_z_expectation(state: &StateVector, qubit: usize) -> Result<f64> {
    state.expectation_z(qubit)
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "register of {n_qubits} qubits outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(n_qubits)?;
        if index >= s.amps.len() {
            return Err(Error::Index(format!("basis state {index} of {n_qubits} qubits")));
        }
        s.amps[0] = C64::new(0.0, 0.0);
        s.amps[index] = C64::new(1.0, 0.0);
        Ok(s)
    }

    /// Wrap explicit amplitudes; the length must be a power of two and the
    /// vector must be normalized within 1e-10.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::Dimension(format!("{len} amplitudes is not 2^n, n >= 1")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_register(n_qubits)?;
        let s = StateVector { n_qubits, amps };
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("state norm {} is not 1", s.norm())));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        op.validate(self.n_qubits)?;
        match op.kind {
            GateKind::CNOT => self.apply_cnot(op.targets[0], op.targets[1]),
            GateKind::CZ => self.apply_cz(op.targets[0], op.targets[1]),
            GateKind::CRY => {
                let m = op.matrix();
                let local = [m.get(2, 2), m.get(2, 3), m.get(3, 2), m.get(3, 3)];
                self.apply_controlled_1q(op.targets[0], op.targets[1], local);
            }
            _ => {
                let m = op.matrix();
                self.apply_1q(op.targets[0], [m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)]);
            }
        }
        Ok(())
    }

    /// Apply an arbitrary 4×4 unitary to `(control, target)` using the
    /// two-qubit matrix index convention.
    pub fn apply_2q_matrix(&mut self, control: usize, target: usize, m: &UnitaryMatrix) -> Result<()> {
        if m.dim != 4 {
            return Err(Error::Dimension(format!("expected 4x4 matrix, got {0}x{0}", m.dim)));
        }
        for q in [control, target] {
            if q >= self.n_qubits {
                return Err(Error::Index(format!("qubit {q}, register has {}", self.n_qubits)));
            }
        }
        if control == target {
            return Err(Error::Parameter("control and target must differ".into()));
        }
        let (cb, tb) = (1usize << control, 1usize << target);
        for base in 0..self.amps.len() {
            if base & (cb | tb) != 0 {
                continue;
            }
            let idx = [base, base | tb, base | cb, base | cb | tb];
            let v = idx.map(|i| self.amps[i]);
            for (r, &i) in idx.iter().enumerate() {
                self.amps[i] = (0..4).map(|k| m.get(r, k) * v[k]).sum();
            }
        }
        Ok(())
    }

    fn apply_1q(&mut self, qubit: usize, [m00, m01, m10, m11]: [C64; 4]) {
        let stride = 1usize << qubit;
        for chunk in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = m00 * x0 + m01 * x1;
                *a1 = m10 * x0 + m11 * x1;
            }
        }
    }

    fn apply_controlled_1q(&mut self, control: usize, target: usize, [m00, m01, m10, m11]: [C64; 4]) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                let j = i | tb;
                let (x0, x1) = (self.amps[i], self.amps[j]);
                self.amps[i] = m00 * x0 + m01 * x1;
                self.amps[j] = m10 * x0 + m11 * x1;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    fn apply_cz(&mut self, control: usize, target: usize) {
        let mask = (1usize << control) | (1usize << target);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a = -*a;
            }
        }
    }

    /// `Σ_b |a_b|² · (±1)`, +1 where bit `qubit` of `b` is 0.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::Index(format!("qubit {qubit}, register has {}", self.n_qubits)));
        }
        let bit = 1usize << qubit;
        let e: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(b, a)| if b & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum();
        Ok(e.clamp(-1.0, 1.0))
    }
}
