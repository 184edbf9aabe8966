use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    X,
    Y,
    Z,
    RX,
    RY,
    RZ,
    H,
    U1,
    U2,
    U3,
    CNOT,
    CZ,
    CRY,
}

impl GateKind {
    pub const ALL: [GateKind; 13] = [
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::H,
        GateKind::U1,
        GateKind::U2,
        GateKind::U3,
        GateKind::CNOT,
        GateKind::CZ,
        GateKind::CRY,
    ];

    /// Number of angle parameters.
    pub fn arity(self) -> usize {
        match self {
            GateKind::X | GateKind::Y | GateKind::Z | GateKind::H | GateKind::CNOT | GateKind::CZ => 0,
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::U1 | GateKind::CRY => 1,
            GateKind::U2 => 2,
            GateKind::U3 => 3,
        }
    }

    pub fn n_qubits(self) -> usize {
        match self {
            GateKind::CNOT | GateKind::CZ | GateKind::CRY => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::H => "H",
            GateKind::U1 => "U1",
            GateKind::U2 => "U2",
            GateKind::U3 => "U3",
            GateKind::CNOT => "CNOT",
            GateKind::CZ => "CZ",
            GateKind::CRY => "CRY",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown gate kind {s:?}")))
    }
}

/// One gate application: kind, angles in radians, and qubit indices
/// (`[control, target]` for two-qubit kinds).
#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub params: Vec<f64>,
    pub targets: Vec<usize>,
}

impl GateOp {
    pub fn new(kind: GateKind, params: Vec<f64>, targets: Vec<usize>) -> Result<Self> {
        if params.len() != kind.arity() {
            return Err(Error::Parameter(format!(
                "{kind} takes {} angle(s), got {}",
                kind.arity(),
                params.len()
            )));
        }
        if targets.len() != kind.n_qubits() {
            return Err(Error::Parameter(format!(
                "{kind} acts on {} qubit(s), got {}",
                kind.n_qubits(),
                targets.len()
            )));
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::Parameter(format!(
                "{kind} control and target must differ (both {})",
                targets[0]
            )));
        }
        Ok(GateOp { kind, params, targets })
    }

    pub fn single(kind: GateKind, qubit: usize) -> Self {
        Self::new(kind, vec![], vec![qubit]).expect("fixed single-qubit gate")
    }

    pub fn rotation(kind: GateKind, qubit: usize, theta: f64) -> Self {
        Self::new(kind, vec![theta], vec![qubit]).expect("one-angle single-qubit gate")
    }

    pub fn ry(qubit: usize, theta: f64) -> Self {
        Self::rotation(GateKind::RY, qubit, theta)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self::new(GateKind::CNOT, vec![], vec![control, target]).expect("valid CNOT")
    }

    /// Check qubit indices against a register size.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if let Some(&q) = self.targets.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::Index(format!(
                "{} on qubit {q}, register has {n_qubits}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> UnitaryMatrix {
        gate_matrix(self.kind, &self.params).expect("arity checked at construction")
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.kind)?;
        for (i, q) in self.targets.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{q}")?;
        }
        for p in &self.params {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

impl FromStr for GateOp {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let kind: GateKind = parts
            .next()
            .ok_or_else(|| Error::Parameter("empty gate line".into()))?
            .parse()?;
        let targets = parts
            .next()
            .ok_or_else(|| Error::Parameter(format!("{kind}: missing qubits")))?
            .split(',')
            .map(|q| {
                q.parse::<usize>()
                    .map_err(|_| Error::Parameter(format!("{kind}: bad qubit {q:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let params = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("{kind}: bad angle {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        GateOp::new(kind, params, targets)
    }
}

/// Square unitary, row-major. Two-qubit matrices index their basis as
/// `2 * control_bit + target_bit`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    pub dim: usize,
    pub entries: Vec<C64>,
}

impl UnitaryMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = C64::new(1.0, 0.0);
        }
        UnitaryMatrix { dim, entries }
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        let entries = rows.iter().flat_map(|r| r.iter().copied()).collect::<Vec<_>>();
        assert_eq!(entries.len(), dim * dim, "matrix must be square");
        UnitaryMatrix { dim, entries }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    /// `self * rhs`
    pub fn matmul(&self, rhs: &UnitaryMatrix) -> UnitaryMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * rhs.entries[k * n + j];
                }
            }
        }
        UnitaryMatrix { dim: n, entries: out }
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        let n = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        UnitaryMatrix { dim: n, entries: out }
    }

    pub fn apply_to(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Largest entrywise deviation of `U†U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.adjoint().matmul(self);
        let id = UnitaryMatrix::identity(self.dim);
        prod.max_abs_diff(&id)
    }

    pub fn max_abs_diff(&self, other: &UnitaryMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Matrix of a gate kind for the given angles.
///
/// Rotations follow the usual conventions: `RX(θ) = exp(-iθX/2)`,
/// `RY(θ) = exp(-iθY/2)` (real), `RZ(θ) = diag(e^{-iθ/2}, e^{iθ/2})`,
/// `U1(λ) = diag(1, e^{iλ})`, `U2(φ, λ)` and `U3(θ, φ, λ)` as the standard
/// phase gates.
pub fn gate_matrix(kind: GateKind, params: &[f64]) -> Result<UnitaryMatrix> {
    if params.len() != kind.arity() {
        return Err(Error::Parameter(format!(
            "{kind} takes {} angle(s), got {}",
            kind.arity(),
            params.len()
        )));
    }
    let zero = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let m = match kind {
        GateKind::X => UnitaryMatrix::from_rows(&[&[zero, one], &[one, zero]]),
        GateKind::Y => UnitaryMatrix::from_rows(&[&[zero, c(0.0, -1.0)], &[c(0.0, 1.0), zero]]),
        GateKind::Z => UnitaryMatrix::from_rows(&[&[one, zero], &[zero, -one]]),
        GateKind::H => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            UnitaryMatrix::from_rows(&[&[h, h], &[h, -h]])
        }
        GateKind::RX => {
            let (s, co) = (params[0] / 2.0).sin_cos();
            UnitaryMatrix::from_rows(&[&[c(co, 0.0), c(0.0, -s)], &[c(0.0, -s), c(co, 0.0)]])
        }
        GateKind::RY => {
            let (s, co) = (params[0] / 2.0).sin_cos();
            UnitaryMatrix::from_rows(&[&[c(co, 0.0), c(-s, 0.0)], &[c(s, 0.0), c(co, 0.0)]])
        }
        GateKind::RZ => {
            let half = params[0] / 2.0;
            UnitaryMatrix::from_rows(&[&[C64::cis(-half), zero], &[zero, C64::cis(half)]])
        }
        GateKind::U1 => UnitaryMatrix::from_rows(&[&[one, zero], &[zero, C64::cis(params[0])]]),
        GateKind::U2 => {
            let (phi, lambda) = (params[0], params[1]);
            let r = FRAC_1_SQRT_2;
            UnitaryMatrix::from_rows(&[
                &[c(r, 0.0), -C64::cis(lambda) * r],
                &[C64::cis(phi) * r, C64::cis(phi + lambda) * r],
            ])
        }
        GateKind::U3 => {
            let (theta, phi, lambda) = (params[0], params[1], params[2]);
            let (s, co) = (theta / 2.0).sin_cos();
            UnitaryMatrix::from_rows(&[
                &[c(co, 0.0), -C64::cis(lambda) * s],
                &[C64::cis(phi) * s, C64::cis(phi + lambda) * co],
            ])
        }
        GateKind::CNOT => UnitaryMatrix::from_rows(&[
            &[one, zero, zero, zero],
            &[zero, one, zero, zero],
            &[zero, zero, zero, one],
            &[zero, zero, one, zero],
        ]),
        GateKind::CZ => UnitaryMatrix::from_rows(&[
            &[one, zero, zero, zero],
            &[zero, one, zero, zero],
            &[zero, zero, one, zero],
            &[zero, zero, zero, -one],
        ]),
        GateKind::CRY => {
            let (s, co) = (params[0] / 2.0).sin_cos();
            UnitaryMatrix::from_rows(&[
                &[one, zero, zero, zero],
                &[zero, one, zero, zero],
                &[zero, zero, c(co, 0.0), c(-s, 0.0)],
                &[zero, zero, c(s, 0.0), c(co, 0.0)],
            ])
        }
    };
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn real(rows: &[&[f64]]) -> UnitaryMatrix {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
            .collect();
        let refs: Vec<&[C64]> = rows.iter().map(|r| r.as_slice()).collect();
        UnitaryMatrix::from_rows(&refs)
    }

    #[test]
    fn pauli_x_matrix() {
        let m = gate_matrix(GateKind::X, &[]).unwrap();
        assert_eq!(m, real(&[&[0.0, 1.0], &[1.0, 0.0]]));
    }

    #[test]
    fn ry_zero_is_identity() {
        let m = gate_matrix(GateKind::RY, &[0.0]).unwrap();
        assert!(m.max_abs_diff(&UnitaryMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn ry_pi() {
        let m = gate_matrix(GateKind::RY, &[PI]).unwrap();
        assert!(m.max_abs_diff(&real(&[&[0.0, -1.0], &[1.0, 0.0]])) < 1e-15);
    }

    #[test]
    fn cnot_and_cz_matrices() {
        let cnot = gate_matrix(GateKind::CNOT, &[]).unwrap();
        assert_eq!(
            cnot,
            real(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
                &[0.0, 0.0, 1.0, 0.0]
            ])
        );
        let cz = gate_matrix(GateKind::CZ, &[]).unwrap();
        assert_eq!(
            cz,
            real(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0],
                &[0.0, 0.0, 0.0, -1.0]
            ])
        );
    }

    #[test]
    fn wrong_arity_rejected() {
        assert!(matches!(gate_matrix(GateKind::RY, &[]), Err(Error::Parameter(_))));
        assert!(matches!(gate_matrix(GateKind::X, &[1.0]), Err(Error::Parameter(_))));
        assert!(matches!(gate_matrix(GateKind::U3, &[1.0, 2.0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn op_constructor_checks() {
        assert!(GateOp::new(GateKind::CNOT, vec![], vec![1, 1]).is_err());
        assert!(GateOp::new(GateKind::H, vec![], vec![0, 1]).is_err());
        assert!(GateOp::new(GateKind::CRY, vec![0.3], vec![0, 2]).is_ok());
    }

    #[test]
    fn text_form_parses_back() {
        let ops = [
            GateOp::ry(3, 0.123_456_789_012_345_67),
            GateOp::cnot(2, 0),
            GateOp::new(GateKind::U3, vec![0.1, -2.5, 3.0], vec![1]).unwrap(),
        ];
        for op in ops {
            let text = op.to_string();
            assert_eq!(text.parse::<GateOp>().unwrap(), op, "{text}");
        }
        assert_eq!(GateOp::cnot(2, 0).to_string(), "CNOT 2,0");
    }
}
