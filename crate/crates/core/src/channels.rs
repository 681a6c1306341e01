//! Noise channels on density matrices and their Lindblad generators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, invalid, Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::linalg::{mat2_adjoint, mat2_mul, mat2_unitarity_deviation, CMatrix, DensityMatrix, Mat2, ONE, ZERO};
use crate::pauli::{Pauli, PauliString};

/// Widest subgroup a channel may act on.
pub const MAX_CHANNEL_WIDTH: usize = 3;

/// Stochastic Pauli channel `ρ ↦ Σ_k ε_k P_k ρ P_k` on a qubit subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PauliChannelRepr", into = "PauliChannelRepr")]
pub struct PauliChannel {
    subgroup: Vec<usize>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PauliChannelRepr {
    subgroup: Vec<usize>,
    probs: BTreeMap<String, f64>,
}

impl TryFrom<PauliChannelRepr> for PauliChannel {
    type Error = Error;

    fn try_from(r: PauliChannelRepr) -> Result<Self> {
        let k = r.subgroup.len();
        let mut probs = vec![0.0; 1 << (2 * k)];
        for (label, p) in r.probs {
            let word: PauliString = label.parse()?;
            if word.num_qubits() != k || word.phase_exponent() != 0 {
                return Err(Error::InvalidLabel(label));
            }
            probs[word.index()] = p;
        }
        PauliChannel::new(r.subgroup, probs)
    }
}

impl From<PauliChannel> for PauliChannelRepr {
    fn from(c: PauliChannel) -> Self {
        let probs = c
            .probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(k, &p)| (PauliString::from_index(c.width(), k).to_string(), p))
            .collect();
        PauliChannelRepr {
            subgroup: c.subgroup,
            probs,
        }
    }
}

fn check_subgroup(subgroup: &[usize]) -> Result<()> {
    if subgroup.is_empty() || subgroup.len() > MAX_CHANNEL_WIDTH {
        return Err(invalid(
            "subgroup",
            format!("width must be 1..={MAX_CHANNEL_WIDTH}, got {}", subgroup.len()),
        ));
    }
    for (i, q) in subgroup.iter().enumerate() {
        if subgroup[..i].contains(q) {
            return Err(Error::RepeatedOperand(*q));
        }
    }
    Ok(())
}

impl PauliChannel {
    /// Probabilities indexed by word index (identity first), summing to one.
    pub fn new(subgroup: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        check_subgroup(&subgroup)?;
        let expected = 1usize << (2 * subgroup.len());
        if probs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: probs.len(),
            });
        }
        for (k, &p) in probs.iter().enumerate() {
            check_probability(&PauliString::from_index(subgroup.len(), k).to_string(), p)?;
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { subgroup, probs })
    }

    /// Identity channel on `subgroup`.
    pub fn identity(subgroup: Vec<usize>) -> Result<Self> {
        let mut probs = vec![0.0; 1 << (2 * subgroup.len())];
        probs[0] = 1.0;
        Self::new(subgroup, probs)
    }

    /// Build from error probabilities of non-identity words; `ε_0` takes the remainder.
    pub fn from_errors(subgroup: Vec<usize>, errors: &[(PauliString, f64)]) -> Result<Self> {
        let k = subgroup.len();
        let mut probs = vec![0.0; 1 << (2 * k)];
        for (w, p) in errors {
            if w.num_qubits() != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    actual: w.num_qubits(),
                });
            }
            if w.is_identity() {
                return Err(invalid("errors", "identity word is implied"));
            }
            probs[w.index()] += p;
        }
        probs[0] = 1.0 - probs[1..].iter().sum::<f64>();
        Self::new(subgroup, probs)
    }

    /// As [`PauliChannel::from_errors`] with string labels.
    pub fn from_labels(subgroup: Vec<usize>, errors: &[(&str, f64)]) -> Result<Self> {
        let parsed = errors
            .iter()
            .map(|(l, p)| Ok((l.parse::<PauliString>()?, *p)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_errors(subgroup, &parsed)
    }

    pub fn width(&self) -> usize {
        self.subgroup.len()
    }

    pub fn subgroup(&self) -> &[usize] {
        &self.subgroup
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, word: &PauliString) -> f64 {
        self.probs[word.index()]
    }

    /// Total error probability `Σ_{k>0} ε_k`.
    pub fn error_rate(&self) -> f64 {
        self.probs[1..].iter().sum()
    }

    pub fn words(&self) -> impl Iterator<Item = PauliString> {
        PauliString::all(self.width())
    }

    /// `Σ_k ε_k · sign(a, P_k)`.
    pub fn fidelity(&self, a: &PauliString) -> Result<f64> {
        if a.num_qubits() != self.width() {
            return Err(Error::LengthMismatch {
                expected: self.width(),
                actual: a.num_qubits(),
            });
        }
        Ok(self
            .words()
            .zip(&self.probs)
            .map(|(k, &e)| e * a.sign_unchecked(&k) as f64)
            .sum())
    }

    /// Fidelities of every word, in index order.
    pub fn fidelities(&self) -> Vec<f64> {
        self.words()
            .map(|a| self.fidelity(&a).expect("same width"))
            .collect()
    }

    /// Terms with non-zero probability, embedded into an `n`-qubit register.
    pub fn embedded_terms(&self, n: usize) -> Result<Vec<(PauliString, f64)>> {
        let mut out = Vec::new();
        for (k, w) in self.words().enumerate() {
            if self.probs[k] == 0.0 {
                continue;
            }
            out.push((w.embed(&self.subgroup, n)?, self.probs[k]));
        }
        Ok(out)
    }

    /// The channel `other ∘ self` (both on the same subgroup).
    pub fn compose(&self, other: &PauliChannel) -> Result<PauliChannel> {
        if self.subgroup != other.subgroup {
            return Err(Error::Tiling(format!(
                "cannot compose channels on {:?} and {:?}",
                self.subgroup, other.subgroup
            )));
        }
        let mut probs = vec![0.0; self.probs.len()];
        for (a, wa) in self.words().enumerate() {
            if self.probs[a] == 0.0 {
                continue;
            }
            for (b, wb) in other.words().enumerate() {
                probs[wa.mul(&wb)?.index()] += self.probs[a] * other.probs[b];
            }
        }
        normalize_into(self.subgroup.clone(), probs)
    }

    /// The same channel written on a superset subgroup.
    pub fn extend_to(&self, subgroup: &[usize]) -> Result<PauliChannel> {
        let mut probs = vec![0.0; 1 << (2 * subgroup.len())];
        for (k, w) in self.words().enumerate() {
            let mut wide = PauliString::identity(subgroup.len());
            for (j, q) in self.subgroup.iter().enumerate() {
                let pos = subgroup
                    .iter()
                    .position(|s| s == q)
                    .ok_or_else(|| Error::Tiling(format!("qubit {q} not in {subgroup:?}")))?;
                wide.set(pos, w.letter(j));
            }
            probs[wide.index()] += self.probs[k];
        }
        PauliChannel::new(subgroup.to_vec(), probs)
    }

    /// Channel with `ε_k(1 - r_k)` on every non-identity word.
    pub fn reduced(&self, r: &[f64]) -> Result<PauliChannel> {
        check_factors(r, self.probs.len())?;
        let mut probs: Vec<f64> = self
            .probs
            .iter()
            .zip(r)
            .map(|(e, ri)| e * (1.0 - ri))
            .collect();
        probs[0] = 1.0 - probs[1..].iter().sum::<f64>();
        PauliChannel::new(self.subgroup.clone(), probs)
    }
}

pub(crate) fn check_factors(r: &[f64], len: usize) -> Result<()> {
    if r.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: r.len(),
        });
    }
    for (k, &x) in r.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            return Err(invalid(&format!("r[{k}]"), format!("{x} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Clamp rounding residue and rescale so the probabilities sum to one.
pub(crate) fn normalize_into(subgroup: Vec<usize>, mut probs: Vec<f64>) -> Result<PauliChannel> {
    for p in probs.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let s: f64 = probs.iter().sum();
    if !(s > 0.0) {
        return Err(Error::NotNormalized { sum: s });
    }
    for p in probs.iter_mut() {
        *p /= s;
    }
    let rest: f64 = probs[1..].iter().sum();
    probs[0] = (1.0 - rest).max(0.0);
    PauliChannel::new(subgroup, probs)
}

fn check_qubit(rho: &DensityMatrix, q: usize) -> Result<()> {
    if q >= rho.num_qubits() {
        return Err(Error::QubitOutOfRange {
            index: q,
            n: rho.num_qubits(),
        });
    }
    Ok(())
}

pub fn apply_pauli_channel(rho: &DensityMatrix, ch: &PauliChannel) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    for &q in ch.subgroup() {
        check_qubit(rho, q)?;
    }
    let sum: f64 = ch.probs.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized { sum });
    }
    let terms = ch.embedded_terms(n)?;
    Ok(apply_pauli_terms(rho, &terms))
}

/// `Σ_k w_k P_k ρ P_k` for pre-embedded terms.
pub(crate) fn apply_pauli_terms(rho: &DensityMatrix, terms: &[(PauliString, f64)]) -> DensityMatrix {
    let mut acc = CMatrix::zeros(rho.dim());
    for (p, w) in terms {
        rho.add_pauli_conjugate(p, *w, &mut acc);
    }
    DensityMatrix::from_matrix_unchecked(rho.num_qubits(), acc)
}

/// `Σ_j K_j ρ K_j†` for single-qubit Kraus operators on qubit `m`.
pub fn apply_kraus_1q(rho: &DensityMatrix, m: usize, kraus: &[Mat2]) -> Result<DensityMatrix> {
    check_qubit(rho, m)?;
    let n = rho.num_qubits();
    let mut acc = CMatrix::zeros(rho.dim());
    for k in kraus {
        let mut t = rho.matrix().clone();
        t.apply_1q_left(n, m, k);
        t.apply_1q_right_adjoint(n, m, k);
        acc.add_assign_scaled(&t, ONE);
    }
    Ok(DensityMatrix::from_matrix_unchecked(n, acc))
}

fn mix(rho: &DensityMatrix, other: &DensityMatrix, w: f64) -> DensityMatrix {
    let mut m = rho.matrix().scale((1.0 - w).into());
    m.add_assign_scaled(other.matrix(), w.into());
    DensityMatrix::from_matrix_unchecked(rho.num_qubits(), m)
}

pub(crate) fn damping_kraus(w: f64) -> [Mat2; 2] {
    let k0 = [[ONE, ZERO], [ZERO, (1.0 - w).sqrt().into()]];
    let k1 = [[ZERO, w.sqrt().into()], [ZERO, ZERO]];
    [k0, k1]
}

/// Lowering operator `|0⟩⟨1|`.
pub fn sigma_minus() -> Mat2 {
    [[ZERO, ONE], [ZERO, ZERO]]
}

pub fn apply_amplitude_damping(rho: &DensityMatrix, m: usize, w: f64) -> Result<DensityMatrix> {
    check_probability("w", w)?;
    apply_kraus_1q(rho, m, &damping_kraus(w))
}

/// `(1-w) ρ + w [p_er ρ + (1-p_er) R_m(ρ)]` with `R_m` resetting qubit `m` to `|0⟩`.
pub fn apply_reset_channel(rho: &DensityMatrix, m: usize, w: f64, p_er: f64) -> Result<DensityMatrix> {
    check_probability("w", w)?;
    check_probability("p_er", p_er)?;
    // Full damping sends qubit m to |0⟩ and traces out its old state.
    let reset = apply_kraus_1q(rho, m, &damping_kraus(1.0))?;
    Ok(mix(rho, &reset, w * (1.0 - p_er)))
}

fn check_unitary(name: &str, u: &Mat2) -> Result<()> {
    let dev = mat2_unitarity_deviation(u);
    if dev > 1e-12 {
        return Err(invalid(name, format!("not unitary (deviation {dev:.3e})")));
    }
    Ok(())
}

fn column(u: &Mat2, j: usize) -> [crate::linalg::C64; 2] {
    [u[0][j], u[1][j]]
}

fn outer(a: [crate::linalg::C64; 2], b: [crate::linalg::C64; 2]) -> Mat2 {
    [
        [a[0] * b[0].conj(), a[0] * b[1].conj()],
        [a[1] * b[0].conj(), a[1] * b[1].conj()],
    ]
}

/// Kraus operators `|Ψ⟩⟨Φ|` and `|Ψ⟩⟨Φ⊥|` with `Ψ = V|0⟩`, `Φ = U|0⟩`, `Φ⊥ = U|1⟩`.
pub fn generalized_reset_kraus(u: &Mat2, v: &Mat2) -> [Mat2; 2] {
    let psi = column(v, 0);
    [outer(psi, column(u, 0)), outer(psi, column(u, 1))]
}

pub fn apply_generalized_reset(
    rho: &DensityMatrix,
    m: usize,
    p: f64,
    u: &Mat2,
    v: &Mat2,
) -> Result<DensityMatrix> {
    check_probability("p", p)?;
    check_unitary("U", u)?;
    check_unitary("V", v)?;
    let applied = apply_kraus_1q(rho, m, &generalized_reset_kraus(u, v))?;
    Ok(mix(rho, &applied, p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeDampingSpec {
    pub w: Vec<f64>,
}

impl AmplitudeDampingSpec {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        for &x in &w {
            check_probability("w", x)?;
        }
        Ok(Self { w })
    }

    /// From ancilla rotation angles, `w = sin²(θ/2)`.
    pub fn from_angles(theta: &[f64]) -> Result<Self> {
        Self::new(theta.iter().map(|t| (t / 2.0).sin().powi(2)).collect())
    }

    pub fn angle(&self, m: usize) -> f64 {
        2.0 * self.w[m].sqrt().asin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetSpec {
    pub w: Vec<f64>,
    pub p_er: f64,
    pub pre: Option<Mat2>,
    pub post: Option<Mat2>,
}

impl ResetSpec {
    pub fn new(w: Vec<f64>, p_er: f64) -> Result<Self> {
        for &x in &w {
            check_probability("w", x)?;
        }
        check_probability("p_er", p_er)?;
        Ok(Self {
            w,
            p_er,
            pre: None,
            post: None,
        })
    }

    pub fn generalized(w: Vec<f64>, u: Mat2, v: Mat2) -> Result<Self> {
        check_unitary("U", &u)?;
        check_unitary("V", &v)?;
        let mut s = Self::new(w, 0.0)?;
        s.pre = Some(u);
        s.post = Some(v);
        Ok(s)
    }

    /// Per-qubit layer channels described by this spec.
    pub fn layer_channels(&self) -> Vec<LayerChannel> {
        self.w
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(m, &w)| match (self.pre, self.post) {
                (Some(u), Some(v)) => LayerChannel::GeneralizedReset {
                    qubit: m,
                    p: w,
                    u,
                    v,
                },
                _ => LayerChannel::Reset {
                    qubit: m,
                    w,
                    p_er: self.p_er,
                },
            })
            .collect()
    }
}

/// Any channel applied once per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerChannel {
    Pauli(PauliChannel),
    AmplitudeDamping { qubit: usize, w: f64 },
    Reset { qubit: usize, w: f64, p_er: f64 },
    GeneralizedReset { qubit: usize, p: f64, u: Mat2, v: Mat2 },
}

impl LayerChannel {
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match self {
            LayerChannel::Pauli(c) => apply_pauli_channel(rho, c),
            LayerChannel::AmplitudeDamping { qubit, w } => apply_amplitude_damping(rho, *qubit, *w),
            LayerChannel::Reset { qubit, w, p_er } => apply_reset_channel(rho, *qubit, *w, *p_er),
            LayerChannel::GeneralizedReset { qubit, p, u, v } => {
                apply_generalized_reset(rho, *qubit, *p, u, v)
            }
        }
    }
}

/// Single-qubit jump operator with a rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub qubit: usize,
    pub op: Mat2,
    pub rate: f64,
}

/// Generator `-i[H, ρ] + Σ Γ_k (P_k ρ P_k - ρ) + Σ γ D[L](ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladSpec {
    pub hamiltonian: Hamiltonian,
    pub pauli_rates: Vec<(PauliString, f64)>,
    pub damping: Vec<(usize, f64)>,
    pub jumps: Vec<Jump>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: Hamiltonian) -> Self {
        Self {
            hamiltonian,
            pauli_rates: Vec::new(),
            damping: Vec::new(),
            jumps: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.hamiltonian.num_qubits()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_qubits();
        let bad = |name: &str, r: f64| -> Result<()> {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(invalid(name, format!("rate {r} must be finite and non-negative")));
            }
            Ok(())
        };
        for (p, r) in &self.pauli_rates {
            if p.num_qubits() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: p.num_qubits(),
                });
            }
            bad(&p.to_string(), *r)?;
        }
        for &(q, r) in &self.damping {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, n });
            }
            bad("damping", r)?;
        }
        for j in &self.jumps {
            if j.qubit >= n {
                return Err(Error::QubitOutOfRange { index: j.qubit, n });
            }
            bad("jump", j.rate)?;
        }
        Ok(())
    }

    /// True when there is no dissipation at all.
    pub fn is_closed(&self) -> bool {
        self.pauli_rates.iter().all(|(_, r)| *r == 0.0)
            && self.damping.iter().all(|(_, r)| *r == 0.0)
            && self.jumps.iter().all(|j| j.rate == 0.0)
    }

    /// Add a Pauli rate, merging with an existing entry for the same string.
    pub fn add_pauli_rate(&mut self, p: PauliString, rate: f64) {
        if rate == 0.0 {
            return;
        }
        let p = p.unsigned();
        if let Some(e) = self.pauli_rates.iter_mut().find(|(q, _)| *q == p) {
            e.1 += rate;
        } else {
            self.pauli_rates.push((p, rate));
        }
    }

    pub fn add_damping(&mut self, qubit: usize, rate: f64) {
        if rate == 0.0 {
            return;
        }
        if let Some(e) = self.damping.iter_mut().find(|(q, _)| *q == qubit) {
            e.1 += rate;
        } else {
            self.damping.push((qubit, rate));
        }
    }

    /// Every dissipator as `(qubit, L, rate)` jumps, with damping expanded to `σ⁻`.
    pub(crate) fn single_qubit_jumps(&self) -> Vec<Jump> {
        let mut out: Vec<Jump> = self
            .damping
            .iter()
            .map(|&(q, r)| Jump {
                qubit: q,
                op: sigma_minus(),
                rate: r,
            })
            .collect();
        out.extend(self.jumps.iter().cloned());
        out.retain(|j| j.rate != 0.0);
        out
    }

    /// Superposition `-i[H,ρ] + dissipators` applied to `ρ`.
    pub fn apply_generator(&self, h: &CMatrix, rho: &CMatrix) -> CMatrix {
        let n = self.num_qubits();
        let i = crate::linalg::I;
        let mut out = h.mul(rho).sub(&rho.mul(h)).scale(-i);
        let dm = DensityMatrix::from_matrix_unchecked(n, rho.clone());
        for (p, r) in &self.pauli_rates {
            if *r == 0.0 {
                continue;
            }
            dm.add_pauli_conjugate(p, *r, &mut out);
            out.add_assign_scaled(rho, (-*r).into());
        }
        for j in self.single_qubit_jumps() {
            let l = &j.op;
            let ldl = mat2_mul(&mat2_adjoint(l), l);
            let mut t = rho.clone();
            t.apply_1q_left(n, j.qubit, l);
            t.apply_1q_right_adjoint(n, j.qubit, l);
            out.add_assign_scaled(&t, j.rate.into());
            let mut left = rho.clone();
            left.apply_1q_left(n, j.qubit, &ldl);
            out.add_assign_scaled(&left, (-0.5 * j.rate).into());
            let mut right = rho.clone();
            // ρ L†L = (L†L ρ)† for Hermitian ρ, but compute directly.
            right.apply_1q_right_adjoint(n, j.qubit, &ldl);
            out.add_assign_scaled(&right, (-0.5 * j.rate).into());
        }
        out
    }
}

/// Rates from per-layer channels applied every `dt`.
///
/// Pauli channels give `ε_k/dt`; damping gives `w/dt`; a reset gives damping
/// `Γ = w(1-p_er)/dt` plus Z dephasing at `Γ/4`; a generalized reset gives
/// the jumps `|Ψ⟩⟨Φ|`, `|Ψ⟩⟨Φ⊥|` at `p/dt`.
pub fn channel_to_dissipator(
    hamiltonian: &Hamiltonian,
    channels: &[LayerChannel],
    dt: f64,
) -> Result<LindbladSpec> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let n = hamiltonian.num_qubits();
    let mut spec = LindbladSpec::new(hamiltonian.clone());
    for ch in channels {
        match ch {
            LayerChannel::Pauli(c) => {
                for (p, e) in c.embedded_terms(n)? {
                    if !p.is_identity() {
                        spec.add_pauli_rate(p, e / dt);
                    }
                }
            }
            LayerChannel::AmplitudeDamping { qubit, w } => {
                check_probability("w", *w)?;
                spec.add_damping(*qubit, w / dt);
            }
            LayerChannel::Reset { qubit, w, p_er } => {
                check_probability("w", *w)?;
                check_probability("p_er", *p_er)?;
                let gamma = w * (1.0 - p_er) / dt;
                spec.add_damping(*qubit, gamma);
                spec.add_pauli_rate(PauliString::single(n, *qubit, Pauli::Z), gamma / 4.0);
            }
            LayerChannel::GeneralizedReset { qubit, p, u, v } => {
                check_probability("p", *p)?;
                check_unitary("U", u)?;
                check_unitary("V", v)?;
                if *p > 0.0 {
                    for op in generalized_reset_kraus(u, v) {
                        spec.jumps.push(Jump {
                            qubit: *qubit,
                            op,
                            rate: p / dt,
                        });
                    }
                }
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Exact Pauli content of the reset channel: `(1-w')id + w'R = AD(w') ∘ Z-dephasing(p)`
/// with `w' = w(1-p_er)` and `p = (1 - √(1-w'))/2`.
pub fn reset_dephasing_probability(w: f64, p_er: f64) -> f64 {
    let we = w * (1.0 - p_er);
    (1.0 - (1.0 - we).sqrt()) / 2.0
}
