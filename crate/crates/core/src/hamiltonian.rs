//! Pauli-sum Hamiltonians, model builders and Trotter depth heuristics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::pauli::{Pauli, PauliString};

/// Largest register evaluated densely by [`commutator_norm`].
pub const DENSE_LIMIT: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    n: usize,
    terms: Vec<(f64, PauliString)>,
}

impl Hamiltonian {
    /// Terms must be finite, Hermitian and `n` qubits wide. A `-1` phase is
    /// folded into the coefficient.
    pub fn new(n: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let mut out = Vec::with_capacity(terms.len());
        for (c, p) in terms {
            if p.num_qubits() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: p.num_qubits(),
                });
            }
            if !c.is_finite() {
                return Err(invalid("coefficient", format!("{c} on {p} is not finite")));
            }
            if !p.is_hermitian() {
                return Err(invalid("term", format!("{p} is not Hermitian")));
            }
            let sign = if p.phase_exponent() == 2 { -1.0 } else { 1.0 };
            out.push((sign * c, p.unsigned()));
        }
        Ok(Self { n, terms: out })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn matrix(&self) -> CMatrix {
        let mut h = CMatrix::zeros(1 << self.n);
        for (c, p) in &self.terms {
            h.add_assign_scaled(&p.matrix(), C64::new(*c, 0.0));
        }
        h
    }

    /// `exp(-i H t)` by eigendecomposition.
    pub fn propagator(&self, t: f64) -> CMatrix {
        CMatrix::exp_hermitian(&self.matrix(), t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub site_energies: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl ChainParams {
    /// Site energies `E_m = e0 - slope·m` (with `m` counted from 1) and uniform coupling.
    pub fn linear(n: usize, e0: f64, slope: f64, coupling: f64) -> Self {
        Self {
            site_energies: (1..=n).map(|m| e0 - slope * m as f64).collect(),
            couplings: vec![coupling; n.saturating_sub(1)],
        }
    }
}

/// Excitonic chain: `-E_m/2 Z_m` per site, then `J/2 (XX + YY)` per bond.
pub fn build_chain_hamiltonian(p: &ChainParams) -> Result<Hamiltonian> {
    let n = p.site_energies.len();
    if n < 2 {
        return Err(invalid("n", "chain needs at least two sites"));
    }
    if p.couplings.len() != n - 1 {
        return Err(Error::LengthMismatch {
            expected: n - 1,
            actual: p.couplings.len(),
        });
    }
    let mut terms = Vec::with_capacity(3 * n - 2);
    for (m, e) in p.site_energies.iter().enumerate() {
        terms.push((-e / 2.0, PauliString::single(n, m, Pauli::Z)));
    }
    for (m, j) in p.couplings.iter().enumerate() {
        terms.push((j / 2.0, PauliString::pair(n, m, Pauli::X, m + 1, Pauli::X)));
        terms.push((j / 2.0, PauliString::pair(n, m, Pauli::Y, m + 1, Pauli::Y)));
    }
    Hamiltonian::new(n, terms)
}

/// Transverse-field Ising chain: `-J Z_m Z_{m+1}` per bond, then `h X_m` per site.
pub fn build_tfim_hamiltonian(n: usize, j: f64, h: f64) -> Result<Hamiltonian> {
    if n < 2 {
        return Err(invalid("n", "chain needs at least two sites"));
    }
    let mut terms = Vec::with_capacity(2 * n - 1);
    for m in 0..n - 1 {
        terms.push((-j, PauliString::pair(n, m, Pauli::Z, m + 1, Pauli::Z)));
    }
    for m in 0..n {
        terms.push((h, PauliString::single(n, m, Pauli::X)));
    }
    Hamiltonian::new(n, terms)
}

/// Sum of spectral norms of nested commutators over all ordered `(k+1)`-tuples of terms.
pub fn commutator_norm(h: &Hamiltonian, k: usize) -> Result<f64> {
    if h.n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n: h.n,
            limit: DENSE_LIMIT,
        });
    }
    if !(1..=2).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    let mats: Vec<CMatrix> = h
        .terms
        .iter()
        .map(|(c, p)| p.matrix().scale(C64::new(*c, 0.0)))
        .collect();
    let mut total = 0.0;
    for a in &mats {
        for b in &mats {
            // [H_l2, H_l1]
            let inner = b.commutator(a);
            if k == 1 {
                total += inner.spectral_norm();
            } else {
                for c in &mats {
                    total += c.commutator(&inner).spectral_norm();
                }
            }
        }
    }
    Ok(total)
}

/// Ceiling that forgives floating-point overshoot of an exact integer.
pub(crate) fn tolerant_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(name, format!("must be positive, got {v}")));
    }
    Ok(())
}

/// `ceil(α^{1/k} t^{1+1/k} / ε^{1/k})`.
pub fn depth_estimate(alpha_comm: f64, t: f64, eps_trot: f64, k: usize) -> Result<usize> {
    depth_estimate_scaled(1.0, alpha_comm, t, eps_trot, k)
}

/// [`depth_estimate`] with an explicit implied constant multiplying the bound.
pub fn depth_estimate_scaled(
    constant: f64,
    alpha_comm: f64,
    t: f64,
    eps_trot: f64,
    k: usize,
) -> Result<usize> {
    check_positive("constant", constant)?;
    check_positive("alpha_comm", alpha_comm)?;
    check_positive("t", t)?;
    check_positive("eps_trot", eps_trot)?;
    if !(1..=2).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    let inv = 1.0 / k as f64;
    let d = constant * alpha_comm.powf(inv) * t.powf(1.0 + inv) / eps_trot.powf(inv);
    Ok(tolerant_ceil(d).max(1.0) as usize)
}

/// `ceil(n^d J (J+E) t² / ε)` for a chain (`d = 1`) or square grid (`d = 2`).
pub fn chain_depth_estimate(n: usize, d: u32, j: f64, e: f64, t: f64, eps_trot: f64) -> Result<usize> {
    chain_depth_estimate_scaled(1.0, n, d, j, e, t, eps_trot)
}

pub fn chain_depth_estimate_scaled(
    constant: f64,
    n: usize,
    d: u32,
    j: f64,
    e: f64,
    t: f64,
    eps_trot: f64,
) -> Result<usize> {
    check_positive("constant", constant)?;
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    if !(1..=2).contains(&d) {
        return Err(invalid("d", format!("lattice dimension must be 1 or 2, got {d}")));
    }
    check_positive("J", j)?;
    if !(e >= 0.0) || !e.is_finite() {
        return Err(invalid("E", format!("must be non-negative, got {e}")));
    }
    check_positive("t", t)?;
    check_positive("eps_trot", eps_trot)?;
    let v = constant * (n as f64).powi(d as i32) * j * (j + e) * t * t / eps_trot;
    Ok(tolerant_ceil(v).max(1.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(h: &Hamiltonian) -> Vec<f64> {
        h.terms().iter().map(|(c, _)| *c).collect()
    }

    #[test]
    fn two_site_chain_with_reference_energies() {
        let p = ChainParams::linear(2, 122.0, 0.5, 0.5);
        assert_eq!(p.site_energies, vec![121.5, 121.0]);
        let h = build_chain_hamiltonian(&p).unwrap();
        let labels: Vec<String> = h.terms().iter().map(|(_, p)| p.to_string()).collect();
        assert_eq!(labels, ["ZI", "IZ", "XX", "YY"]);
        assert_eq!(coeffs(&h), vec![-60.75, -60.5, 0.25, 0.25]);
    }

    #[test]
    fn zero_chain() {
        let p = ChainParams {
            site_energies: vec![0.0, 0.0],
            couplings: vec![0.0],
        };
        let h = build_chain_hamiltonian(&p).unwrap();
        assert!(coeffs(&h).iter().all(|&c| c == 0.0));
    }

    #[test]
    fn three_site_chain() {
        let p = ChainParams {
            site_energies: vec![1.0; 3],
            couplings: vec![2.0; 2],
        };
        let h = build_chain_hamiltonian(&p).unwrap();
        assert_eq!(h.terms().len(), 7);
        assert_eq!(coeffs(&h), vec![-0.5, -0.5, -0.5, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn chain_length_mismatch() {
        let p = ChainParams {
            site_energies: vec![1.0; 3],
            couplings: vec![2.0],
        };
        assert!(matches!(
            build_chain_hamiltonian(&p),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn tfim_builders() {
        let h = build_tfim_hamiltonian(2, 0.5236, 1.0).unwrap();
        let labels: Vec<String> = h.terms().iter().map(|(_, p)| p.to_string()).collect();
        assert_eq!(labels, ["ZZ", "XI", "IX"]);
        assert_eq!(coeffs(&h), vec![-0.5236, 1.0, 1.0]);
        let h = build_tfim_hamiltonian(3, 0.0, 0.0).unwrap();
        assert!(coeffs(&h).iter().all(|&c| c == 0.0));
        let h = build_tfim_hamiltonian(3, 1.0, 2.0).unwrap();
        assert_eq!(coeffs(&h), vec![-1.0, -1.0, 2.0, 2.0, 2.0]);
        assert!(build_tfim_hamiltonian(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn commutator_norm_examples() {
        let zs = Hamiltonian::new(
            2,
            vec![(1.0, "ZI".parse().unwrap()), (0.5, "ZZ".parse().unwrap())],
        )
        .unwrap();
        assert_eq!(commutator_norm(&zs, 1).unwrap(), 0.0);
        let xz = Hamiltonian::new(1, vec![(1.0, "X".parse().unwrap()), (1.0, "Z".parse().unwrap())])
            .unwrap();
        assert!((commutator_norm(&xz, 1).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn commutator_norm_matches_pauli_algebra() {
        // Nested commutators of Pauli terms are single scaled Pauli strings:
        // [aP, bQ] = 2ab PQ when they anticommute, 0 otherwise.
        let h = build_chain_hamiltonian(&ChainParams::linear(2, 122.0, 0.5, 0.5)).unwrap();
        let t = h.terms();
        let mut k1 = 0.0;
        let mut k2 = 0.0;
        for (a, p) in t {
            for (b, q) in t {
                if q.commutes(p).unwrap() {
                    continue;
                }
                let inner = q.mul(p).unwrap();
                let w = 2.0 * a * b;
                k1 += w.abs();
                for (c, r) in t {
                    if !r.commutes(&inner).unwrap() {
                        k2 += (2.0 * c * w).abs();
                    }
                }
            }
        }
        let dense1 = commutator_norm(&h, 1).unwrap();
        let dense2 = commutator_norm(&h, 2).unwrap();
        assert!(dense1 > 0.0 && dense1.is_finite());
        assert!((dense1 - k1).abs() < 1e-9 * k1);
        assert!((dense2 - k2).abs() < 1e-9 * k2);
    }

    #[test]
    fn commutator_norm_rejects_large_registers() {
        let h = build_tfim_hamiltonian(7, 1.0, 1.0).unwrap();
        assert!(matches!(commutator_norm(&h, 1), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn depth_estimates() {
        assert_eq!(depth_estimate(1.0, 1.0, 1.0, 1).unwrap(), 1);
        assert_eq!(depth_estimate(4.0, 2.0, 0.1, 1).unwrap(), 160);
        assert_eq!(depth_estimate(4.0, 2.0, 0.1, 2).unwrap(), 18);
        assert!(depth_estimate(0.0, 2.0, 0.1, 2).is_err());
        assert!(depth_estimate(1.0, 2.0, 0.1, 3).is_err());
        assert_eq!(depth_estimate_scaled(2.0, 4.0, 2.0, 0.1, 1).unwrap(), 320);
    }

    #[test]
    fn chain_depth_estimates() {
        assert_eq!(chain_depth_estimate(1, 1, 1.0, 0.0, 1.0, 1.0).unwrap(), 1);
        assert_eq!(chain_depth_estimate(2, 1, 0.5, 121.5, 1.0, 0.1).unwrap(), 1220);
        let a = chain_depth_estimate(4, 2, 0.7, 3.0, 2.0, 0.05).unwrap();
        let b = chain_depth_estimate(4, 2, 0.7, 3.0, 2.0, 0.1).unwrap();
        assert!(b == a.div_ceil(2) || b == a / 2, "{a} {b}");
        assert!(chain_depth_estimate(2, 3, 0.5, 1.0, 1.0, 0.1).is_err());
    }
}
