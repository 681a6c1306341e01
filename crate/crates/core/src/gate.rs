//! Gate alphabet, Clifford conjugation of Pauli strings and dense circuit unitaries.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Mat2, C64, I, ONE, ZERO};
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateOp {
    /// `exp(-i θ Z / 2)`
    Rz { qubit: usize, theta: f64 },
    /// `exp(-i θ X / 2)`
    Rx { qubit: usize, theta: f64 },
    /// `exp(-i θ Y / 2)`
    Ry { qubit: usize, theta: f64 },
    H { qubit: usize },
    S { qubit: usize },
    Sdg { qubit: usize },
    Pauli { qubit: usize, letter: Pauli },
    /// Arbitrary single-qubit unitary, produced by gate fusion.
    U1 { qubit: usize, matrix: Mat2 },
    Cnot { control: usize, target: usize },
    /// Reset to `|0⟩` applied with probability `w`.
    Reset { qubit: usize, w: f64 },
    /// Generalized reset with named pre/post unitaries, applied with probability `p`.
    GeneralizedReset {
        qubit: usize,
        p: f64,
        pre: String,
        post: String,
    },
}

pub fn hadamard() -> Mat2 {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

pub fn s_gate() -> Mat2 {
    [[ONE, ZERO], [ZERO, I]]
}

pub fn sdg_gate() -> Mat2 {
    [[ONE, ZERO], [ZERO, -I]]
}

pub fn rz(theta: f64) -> Mat2 {
    let a = C64::from_polar(1.0, -theta / 2.0);
    [[a, ZERO], [ZERO, a.conj()]]
}

pub fn rx(theta: f64) -> Mat2 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
}

pub fn ry(theta: f64) -> Mat2 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
}

/// Look up a named single-qubit unitary used by generalized reset tags.
pub fn named_unitary(tag: &str) -> Result<Mat2> {
    match tag {
        "I" | "id" => Ok(Pauli::I.matrix()),
        "X" => Ok(Pauli::X.matrix()),
        "Y" => Ok(Pauli::Y.matrix()),
        "Z" => Ok(Pauli::Z.matrix()),
        "H" => Ok(hadamard()),
        "S" => Ok(s_gate()),
        "Sdg" => Ok(sdg_gate()),
        _ => Err(Error::InvalidLabel(tag.to_string())),
    }
}

impl GateOp {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::Cnot { control, target } => vec![control, target],
            GateOp::Rz { qubit, .. }
            | GateOp::Rx { qubit, .. }
            | GateOp::Ry { qubit, .. }
            | GateOp::H { qubit }
            | GateOp::S { qubit }
            | GateOp::Sdg { qubit }
            | GateOp::Pauli { qubit, .. }
            | GateOp::U1 { qubit, .. }
            | GateOp::Reset { qubit, .. }
            | GateOp::GeneralizedReset { qubit, .. } => vec![qubit],
        }
    }

    pub fn is_reset(&self) -> bool {
        matches!(self, GateOp::Reset { .. } | GateOp::GeneralizedReset { .. })
    }

    pub fn is_cnot(&self) -> bool {
        matches!(self, GateOp::Cnot { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateOp::Rz { .. } => "rz",
            GateOp::Rx { .. } => "rx",
            GateOp::Ry { .. } => "ry",
            GateOp::H { .. } => "h",
            GateOp::S { .. } => "s",
            GateOp::Sdg { .. } => "sdg",
            GateOp::Pauli { .. } => "pauli",
            GateOp::U1 { .. } => "u1",
            GateOp::Cnot { .. } => "cnot",
            GateOp::Reset { .. } => "reset",
            GateOp::GeneralizedReset { .. } => "generalized_reset",
        }
    }

    /// Operands in range and distinct.
    pub fn validate(&self, n: usize) -> Result<()> {
        let qs = self.qubits();
        for &q in &qs {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, n });
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::RepeatedOperand(qs[0]));
        }
        match self {
            GateOp::U1 { matrix, .. } => {
                let dev = crate::linalg::mat2_unitarity_deviation(matrix);
                if dev > 1e-10 {
                    return Err(Error::NotUnitary { deviation: dev });
                }
            }
            GateOp::Reset { w, .. } => crate::error::check_probability("w", *w)?,
            GateOp::GeneralizedReset { p, pre, post, .. } => {
                crate::error::check_probability("p", *p)?;
                named_unitary(pre)?;
                named_unitary(post)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// The 2×2 matrix of a single-qubit unitary gate.
    pub fn single_qubit_matrix(&self) -> Option<Mat2> {
        match self {
            GateOp::Rz { theta, .. } => Some(rz(*theta)),
            GateOp::Rx { theta, .. } => Some(rx(*theta)),
            GateOp::Ry { theta, .. } => Some(ry(*theta)),
            GateOp::H { .. } => Some(hadamard()),
            GateOp::S { .. } => Some(s_gate()),
            GateOp::Sdg { .. } => Some(sdg_gate()),
            GateOp::Pauli { letter, .. } => Some(letter.matrix()),
            GateOp::U1 { matrix, .. } => Some(*matrix),
            _ => None,
        }
    }

    /// Left-multiply `m` by this gate; resets are rejected.
    pub fn apply_left(&self, n: usize, m: &mut CMatrix) -> Result<()> {
        match *self {
            GateOp::Cnot { control, target } => {
                m.apply_cnot_left(n, control, target);
                Ok(())
            }
            GateOp::Reset { .. } | GateOp::GeneralizedReset { .. } => {
                Err(Error::NonUnitaryGate(self.name().to_string()))
            }
            _ => {
                let g = self.single_qubit_matrix().expect("single-qubit gate");
                m.apply_1q_left(n, self.qubits()[0], &g);
                Ok(())
            }
        }
    }
}

/// Dense unitary of a gate list (first gate acts first).
pub fn circuit_unitary(n: usize, gates: &[GateOp]) -> Result<CMatrix> {
    circuit_unitary_with_kick(n, gates, 0.0)
}

/// As [`circuit_unitary`], with `exp(-i ϑ/2 Z_c Z_t)` after every CNOT.
pub fn circuit_unitary_with_kick(n: usize, gates: &[GateOp], kick: f64) -> Result<CMatrix> {
    let mut u = CMatrix::identity(1 << n);
    for g in gates {
        g.validate(n)?;
        g.apply_left(n, &mut u)?;
        if let (GateOp::Cnot { control, target }, true) = (g, kick != 0.0) {
            apply_zz_kick(n, *control, *target, kick, &mut u);
        }
    }
    Ok(u)
}

fn apply_zz_kick(n: usize, a: usize, b: usize, kick: f64, u: &mut CMatrix) {
    let d = u.dim();
    let (ba, bb) = (1 << (n - 1 - a), 1 << (n - 1 - b));
    for i in 0..d {
        let parity = ((i & ba != 0) as u8) ^ ((i & bb != 0) as u8);
        let phase = C64::from_polar(1.0, if parity == 0 { -kick / 2.0 } else { kick / 2.0 });
        for j in 0..d {
            u[(i, j)] *= phase;
        }
    }
}

/// Quarter turns of a Z rotation, if `theta` is a multiple of π/2.
fn quarter_turns(theta: f64) -> Option<u8> {
    let k = theta / FRAC_PI_2;
    let r = k.round();
    if (k - r).abs() * FRAC_PI_2 > 1e-12 {
        return None;
    }
    Some((r as i64).rem_euclid(4) as u8)
}

/// Images of `X_q` and `Z_q` under a single-qubit Clifford.
fn single_qubit_images(g: &GateOp, n: usize, q: usize) -> Result<(PauliString, PauliString)> {
    let x = PauliString::single(n, q, Pauli::X);
    let z = PauliString::single(n, q, Pauli::Z);
    let y = PauliString::single(n, q, Pauli::Y);
    Ok(match g {
        GateOp::H { .. } => (z, x),
        GateOp::S { .. } => (y, z),
        GateOp::Sdg { .. } => (y.negated(), z),
        GateOp::Pauli { letter, .. } => match letter {
            Pauli::I => (x, z),
            Pauli::X => (x, z.negated()),
            Pauli::Y => (x.negated(), z.negated()),
            Pauli::Z => (x.negated(), z),
        },
        GateOp::Rz { theta, .. } => match quarter_turns(*theta) {
            Some(0) => (x, z),
            Some(1) => (y, z),
            Some(2) => (x.negated(), z),
            Some(3) => (y.negated(), z),
            _ => return Err(Error::NonClifford(format!("rz({theta})"))),
        },
        other => return Err(Error::NonClifford(other.name().to_string())),
    })
}

/// `G p G†` as a signed Pauli string.
pub fn clifford_conjugate(g: &GateOp, p: &PauliString) -> Result<PauliString> {
    let n = p.num_qubits();
    g.validate(n)?;
    if let GateOp::Rz { theta, .. } = g {
        if theta.is_nan() || quarter_turns(*theta).is_none() {
            return Err(Error::NonClifford(format!("rz({theta})")));
        }
    }
    // p = i^(e + #Y) Π_m X_m^x Z_m^z, each factor mapped independently.
    let ys = (p.x_mask() & p.z_mask()).count_ones() as u8;
    let mut out = PauliString::identity(n).with_phase(p.phase_exponent() + ys);
    let image = |q: usize, is_x: bool| -> Result<PauliString> {
        match *g {
            GateOp::Cnot { control, target } => {
                let single = if is_x { Pauli::X } else { Pauli::Z };
                Ok(if is_x && q == control {
                    PauliString::pair(n, control, Pauli::X, target, Pauli::X)
                } else if !is_x && q == target {
                    PauliString::pair(n, control, Pauli::Z, target, Pauli::Z)
                } else {
                    PauliString::single(n, q, single)
                })
            }
            _ => {
                let gq = g.qubits()[0];
                if q != gq {
                    let single = if is_x { Pauli::X } else { Pauli::Z };
                    return Ok(PauliString::single(n, q, single));
                }
                let (xi, zi) = single_qubit_images(g, n, q)?;
                Ok(if is_x { xi } else { zi })
            }
        }
    };
    for m in 0..n {
        if p.x_mask() >> m & 1 == 1 {
            out = out.mul(&image(m, true)?)?;
        }
        if p.z_mask() >> m & 1 == 1 {
            out = out.mul(&image(m, false)?)?;
        }
    }
    Ok(out)
}

/// Conjugate through a sequence of Clifford gates applied in order.
pub fn clifford_conjugate_all(gates: &[GateOp], p: &PauliString) -> Result<PauliString> {
    gates.iter().try_fold(*p, |acc, g| clifford_conjugate(g, &acc))
}
