//! Product-formula layers compiled to the gate alphabet.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gate::{circuit_unitary, circuit_unitary_with_kick, GateOp};
use crate::hamiltonian::{tolerant_ceil, Hamiltonian};
use crate::linalg::CMatrix;
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    pub order: usize,
    pub dt: f64,
    pub layers: usize,
    pub eps_trot: Option<f64>,
    pub alpha_comm: Option<f64>,
    pub lattice_dim: u32,
}

impl TrotterPlan {
    /// Split total time `t` into `layers` equal steps.
    pub fn new(order: usize, t: f64, layers: usize) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        if layers == 0 {
            return Err(invalid("layers", "must be at least 1"));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid("t", format!("must be finite and non-negative, got {t}")));
        }
        Ok(Self {
            order,
            dt: t / layers as f64,
            layers,
            eps_trot: None,
            alpha_comm: None,
            lattice_dim: 1,
        })
    }

    /// Layer count for a step no larger than `dt_max`.
    pub fn with_max_step(order: usize, t: f64, dt_max: f64) -> Result<Self> {
        if !(dt_max > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt_max}")));
        }
        let layers = tolerant_ceil(t / dt_max).max(1.0) as usize;
        Self::new(order, t, layers)
    }

    pub fn total_time(&self) -> f64 {
        self.dt * self.layers as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterCircuit {
    pub n: usize,
    pub gates: Vec<GateOp>,
    /// Gate indices of each group of simultaneous CNOTs.
    pub cnot_layers: Vec<Vec<usize>>,
    pub dt: f64,
    pub order: usize,
}

impl TrotterCircuit {
    /// Wrap a gate list, validating operands and grouping CNOTs.
    pub fn from_gates(n: usize, gates: Vec<GateOp>, dt: f64, order: usize) -> Result<Self> {
        for g in &gates {
            g.validate(n)?;
        }
        let cnot_layers = group_cnots(&gates);
        Ok(Self {
            n,
            gates,
            cnot_layers,
            dt,
            order,
        })
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cnot()).count()
    }

    /// Gates other than reset slots, in order.
    pub fn unitary_gates(&self) -> Vec<GateOp> {
        self.gates.iter().filter(|g| !g.is_reset()).cloned().collect()
    }

    /// Reset slots, in order.
    pub fn reset_gates(&self) -> Vec<GateOp> {
        self.gates.iter().filter(|g| g.is_reset()).cloned().collect()
    }

    /// Dense unitary of the non-reset gates.
    pub fn unitary(&self) -> CMatrix {
        circuit_unitary(self.n, &self.unitary_gates()).expect("validated circuit")
    }

    pub fn unitary_with_kick(&self, kick: f64) -> CMatrix {
        circuit_unitary_with_kick(self.n, &self.unitary_gates(), kick).expect("validated circuit")
    }

    /// Append reset slots at the end of the layer.
    pub fn with_resets(mut self, resets: Vec<GateOp>) -> Result<Self> {
        for r in &resets {
            if !r.is_reset() {
                return Err(invalid("resets", format!("{} is not a reset", r.name())));
            }
            r.validate(self.n)?;
        }
        self.gates.extend(resets);
        Ok(self)
    }
}

/// Maximal runs of consecutive CNOTs acting on disjoint qubits.
pub(crate) fn group_cnots(gates: &[GateOp]) -> Vec<Vec<usize>> {
    let mut layers: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut used = 0u64;
    for (i, g) in gates.iter().enumerate() {
        if let GateOp::Cnot { control, target } = *g {
            let mask = (1u64 << control) | (1u64 << target);
            if used & mask != 0 {
                layers.push(std::mem::take(&mut current));
                used = 0;
            }
            current.push(i);
            used |= mask;
        } else if !current.is_empty() {
            layers.push(std::mem::take(&mut current));
            used = 0;
        }
    }
    if !current.is_empty() {
        layers.push(current);
    }
    layers
}

/// Gates rotating `letter` onto Z (applied before) and back (applied after).
fn basis_change(q: usize, letter: Pauli) -> (Vec<GateOp>, Vec<GateOp>) {
    match letter {
        Pauli::X => (vec![GateOp::H { qubit: q }], vec![GateOp::H { qubit: q }]),
        Pauli::Y => (
            vec![GateOp::Sdg { qubit: q }, GateOp::H { qubit: q }],
            vec![GateOp::H { qubit: q }, GateOp::S { qubit: q }],
        ),
        _ => (vec![], vec![]),
    }
}

/// Gates for `exp(-i α P τ)`.
fn term_exponential(alpha: f64, p: &PauliString, tau: f64) -> Result<Vec<GateOp>> {
    let theta = 2.0 * alpha * tau;
    let support = p.support();
    match support.as_slice() {
        [] => Ok(vec![]),
        [q] => {
            let (pre, post) = basis_change(*q, p.letter(*q));
            let mut g = pre;
            g.push(GateOp::Rz { qubit: *q, theta });
            g.extend(post);
            Ok(g)
        }
        [a, b] if b - a == 1 => {
            let (pa, qa) = basis_change(*a, p.letter(*a));
            let (pb, qb) = basis_change(*b, p.letter(*b));
            let mut g = pa;
            g.extend(pb);
            g.push(GateOp::Cnot { control: *a, target: *b });
            g.push(GateOp::Rz { qubit: *b, theta });
            g.push(GateOp::Cnot { control: *a, target: *b });
            g.extend(qa);
            g.extend(qb);
            Ok(g)
        }
        _ => Err(Error::NonLocalTerm { term: p.to_string() }),
    }
}

/// One first- or second-order Trotter layer of `h` with step `plan.dt`.
pub fn build_trotter_layer(h: &Hamiltonian, plan: &TrotterPlan) -> Result<TrotterCircuit> {
    let n = h.num_qubits();
    let mut gates = Vec::new();
    match plan.order {
        1 => {
            for (a, p) in h.terms() {
                gates.extend(term_exponential(*a, p, plan.dt)?);
            }
        }
        2 => {
            let half = plan.dt / 2.0;
            for (a, p) in h.terms() {
                gates.extend(term_exponential(*a, p, half)?);
            }
            for (a, p) in h.terms().iter().rev() {
                gates.extend(term_exponential(*a, p, half)?);
            }
        }
        k => return Err(Error::UnsupportedOrder(k)),
    }
    TrotterCircuit::from_gates(n, gates, plan.dt, plan.order)
}

/// Product formula evaluated with exact term exponentials (no gate compilation).
pub fn product_formula_unitary(h: &Hamiltonian, order: usize, dt: f64) -> Result<CMatrix> {
    let dim = 1 << h.num_qubits();
    let exps: Vec<CMatrix> = h
        .terms()
        .iter()
        .map(|(a, p)| CMatrix::exp_hermitian(&p.matrix(), a * dt / order as f64))
        .collect();
    let mut u = CMatrix::identity(dim);
    match order {
        1 => {
            for e in &exps {
                u = e.mul(&u);
            }
        }
        2 => {
            for e in exps.iter().chain(exps.iter().rev()) {
                u = e.mul(&u);
            }
        }
        k => return Err(Error::UnsupportedOrder(k)),
    }
    Ok(u)
}
