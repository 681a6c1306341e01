//! Noisy-device emulator: layer unitaries, injected Pauli noise, reset slots,
//! Pauli twirling and shot sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::channels::{apply_pauli_terms, LayerChannel, PauliChannel};
use crate::error::{check_probability, invalid, Error, Result};
use crate::gate::{clifford_conjugate_all, named_unitary, GateOp};
use crate::linalg::{mat2_mul, CMatrix, DensityMatrix, Mat2, C64};
use crate::pauli::{Pauli, PauliString};
use crate::trotter::TrotterCircuit;

/// Default probability that a reset leaves the qubit untouched.
pub const DEFAULT_P_ER: f64 = 1e-3;

/// RNG for the stream `stream` of a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Nearest-neighbour pairs: even bonds `(0,1), (2,3), …` then odd bonds `(1,2), …`.
pub fn standard_tiling(n: usize) -> Vec<Vec<usize>> {
    let even = (0..n.saturating_sub(1)).step_by(2).map(|m| vec![m, m + 1]);
    let odd = (1..n.saturating_sub(1)).step_by(2).map(|m| vec![m, m + 1]);
    even.chain(odd).collect()
}

/// The subgroup that owns single-qubit errors on qubit `m`.
///
/// Qubits covered by an even bond belong to it; a trailing qubit of an odd-length
/// chain belongs to the last odd bond.
pub fn owning_pair(n: usize, m: usize) -> Option<Vec<usize>> {
    if n < 2 || m >= n {
        return None;
    }
    let e = m - m % 2;
    if e + 1 < n {
        Some(vec![e, e + 1])
    } else {
        Some(vec![m - 1, m])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub n: usize,
    /// Pauli channels applied after every layer unitary.
    pub channels: Vec<PauliChannel>,
    /// Angle ϑ of the `exp(-iϑ/2 Z_c Z_t)` over-rotation after each CNOT.
    #[serde(default)]
    pub kick: f64,
    #[serde(default = "default_p_er")]
    pub p_er: f64,
    #[serde(default)]
    pub readout_error: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_p_er() -> f64 {
    DEFAULT_P_ER
}

impl DeviceModel {
    pub fn noiseless(n: usize) -> Self {
        Self {
            n,
            channels: Vec::new(),
            kick: 0.0,
            p_er: DEFAULT_P_ER,
            readout_error: 0.0,
            seed: 0,
        }
    }

    pub fn with_channels(n: usize, channels: Vec<PauliChannel>) -> Result<Self> {
        let m = Self {
            channels,
            ..Self::noiseless(n)
        };
        m.validate()?;
        Ok(m)
    }

    /// Channels must sit on single qubits or adjacent pairs, with no repeated
    /// subgroup and every weight-one error attributed to exactly one channel.
    pub fn validate(&self) -> Result<()> {
        check_probability("p_er", self.p_er)?;
        check_probability("readout_error", self.readout_error)?;
        if !self.kick.is_finite() {
            return Err(invalid("kick", "must be finite"));
        }
        let mut owners: Vec<Option<usize>> = vec![None; self.n];
        for (c, ch) in self.channels.iter().enumerate() {
            let sg = ch.subgroup();
            for &q in sg {
                if q >= self.n {
                    return Err(Error::QubitOutOfRange { index: q, n: self.n });
                }
            }
            match sg {
                [_] => {}
                [a, b] if *b == a + 1 => {}
                _ => {
                    return Err(Error::Tiling(format!(
                        "subgroup {sg:?} is not a single qubit or an ordered adjacent pair"
                    )))
                }
            }
            if self.channels[..c].iter().any(|o| o.subgroup() == sg) {
                return Err(Error::Tiling(format!("subgroup {sg:?} listed twice")));
            }
            for (k, w) in ch.words().enumerate() {
                if ch.probs()[k] == 0.0 || w.weight() != 1 {
                    continue;
                }
                let q = sg[w.support()[0]];
                match owners[q] {
                    Some(o) if o != c => {
                        return Err(Error::Tiling(format!(
                            "single-qubit errors on qubit {q} appear in subgroups {:?} and {sg:?}",
                            self.channels[o].subgroup()
                        )))
                    }
                    _ => owners[q] = Some(c),
                }
            }
        }
        Ok(())
    }

    pub fn layer_channels(&self) -> Vec<LayerChannel> {
        self.channels.iter().cloned().map(LayerChannel::Pauli).collect()
    }

    pub fn subgroups(&self) -> Vec<Vec<usize>> {
        self.channels.iter().map(|c| c.subgroup().to_vec()).collect()
    }
}

/// Exact layer map: unitary, noise, optional insertion, reset slots.
#[derive(Debug, Clone)]
pub struct LayerPropagator {
    n: usize,
    unitary: CMatrix,
    noise: Vec<Vec<(PauliString, f64)>>,
    resets: Vec<LayerChannel>,
}

impl LayerPropagator {
    pub fn new(circuit: &TrotterCircuit, model: &DeviceModel) -> Result<Self> {
        if circuit.n != model.n {
            return Err(Error::DimensionMismatch {
                expected: 1 << model.n,
                actual: 1 << circuit.n,
            });
        }
        model.validate()?;
        let noise = model
            .channels
            .iter()
            .map(|c| {
                c.embedded_terms(model.n)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|t| !(t.len() == 1 && t[0].0.is_identity()))
            .collect();
        let resets = circuit
            .reset_gates()
            .into_iter()
            .map(|g| reset_channel(&g, model.p_er))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n: model.n,
            unitary: circuit.unitary_with_kick(model.kick),
            noise,
            resets,
        })
    }

    /// Same noise and resets, different layer unitary (e.g. a twirled copy).
    pub fn with_unitary(&self, unitary: CMatrix) -> Self {
        Self {
            unitary,
            ..self.clone()
        }
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn step(&self, rho: &DensityMatrix, insertion: Option<&PauliString>) -> Result<DensityMatrix> {
        let mut out = rho.apply_unitary(&self.unitary)?;
        for terms in &self.noise {
            out = apply_pauli_terms(&out, terms);
        }
        if let Some(p) = insertion {
            if !p.is_identity() {
                out = out.apply_pauli(p)?;
            }
        }
        for r in &self.resets {
            out = r.apply(&out)?;
        }
        out.symmetrize();
        Ok(out)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }
}

fn reset_channel(g: &GateOp, p_er: f64) -> Result<LayerChannel> {
    match g {
        GateOp::Reset { qubit, w } => Ok(LayerChannel::Reset {
            qubit: *qubit,
            w: *w,
            p_er,
        }),
        GateOp::GeneralizedReset { qubit, p, pre, post } => Ok(LayerChannel::GeneralizedReset {
            qubit: *qubit,
            p: *p,
            u: named_unitary(pre)?,
            v: named_unitary(post)?,
        }),
        other => Err(invalid("reset", format!("{} is not a reset", other.name()))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Exact,
    Sampled { shots: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    /// `states[d]` is the state after `d` layers; `states[0]` is the input.
    pub states: Vec<DensityMatrix>,
    /// Bitstring counts per time point in sampled mode.
    pub counts: Option<Vec<Vec<u64>>>,
    pub sign: f64,
    pub weight: f64,
}

impl ExecutionResult {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("at least the initial state")
    }
}

/// Run `layers` noisy layers from `initial`.
///
/// Sampled mode draws bitstring counts at every time point from the seeded
/// stream 0 of `model.seed`.
pub fn execute(
    circuit: &TrotterCircuit,
    layers: usize,
    model: &DeviceModel,
    mode: Mode,
    insertions: Option<&[PauliString]>,
    initial: &DensityMatrix,
) -> Result<ExecutionResult> {
    let mut rng = stream_rng(model.seed, 0);
    execute_with_rng(circuit, layers, model, mode, insertions, initial, &mut rng)
}

pub fn execute_with_rng<R: Rng>(
    circuit: &TrotterCircuit,
    layers: usize,
    model: &DeviceModel,
    mode: Mode,
    insertions: Option<&[PauliString]>,
    initial: &DensityMatrix,
    rng: &mut R,
) -> Result<ExecutionResult> {
    if initial.num_qubits() != model.n {
        return Err(Error::DimensionMismatch {
            expected: 1 << model.n,
            actual: initial.dim(),
        });
    }
    if let Some(ins) = insertions {
        if ins.len() != layers {
            return Err(Error::InsertionCount {
                expected: layers,
                actual: ins.len(),
            });
        }
        for p in ins {
            if p.num_qubits() != model.n {
                return Err(Error::LengthMismatch {
                    expected: model.n,
                    actual: p.num_qubits(),
                });
            }
        }
    }
    let prop = LayerPropagator::new(circuit, model)?;
    let mut states = Vec::with_capacity(layers + 1);
    states.push(initial.clone());
    for d in 0..layers {
        let ins = insertions.map(|v| &v[d]);
        let next = prop.step(&states[d], ins)?;
        states.push(next);
    }
    let counts = match mode {
        Mode::Exact => None,
        Mode::Sampled { shots } => {
            if shots == 0 {
                return Err(invalid("shots", "must be positive in sampled mode"));
            }
            Some(
                states
                    .iter()
                    .map(|s| sample_counts(&s.populations(), model.n, shots, model.readout_error, rng))
                    .collect(),
            )
        }
    };
    Ok(ExecutionResult {
        states,
        counts,
        sign: 1.0,
        weight: 1.0,
    })
}

/// Populations after independent per-qubit readout flips.
pub fn apply_readout_error(pops: &[f64], n: usize, e: f64) -> Vec<f64> {
    let mut p = pops.to_vec();
    if e == 0.0 {
        return p;
    }
    for m in 0..n {
        let bit = 1 << (n - 1 - m);
        for i in 0..p.len() {
            if i & bit == 0 {
                let (a, b) = (p[i], p[i | bit]);
                p[i] = (1.0 - e) * a + e * b;
                p[i | bit] = e * a + (1.0 - e) * b;
            }
        }
    }
    p
}

/// Multinomial bitstring counts drawn as a chain of conditional binomials.
pub fn sample_counts<R: Rng>(pops: &[f64], n: usize, shots: u64, readout: f64, rng: &mut R) -> Vec<u64> {
    let p: Vec<f64> = apply_readout_error(pops, n, readout)
        .into_iter()
        .map(|x| x.max(0.0))
        .collect();
    let mut remaining_mass: f64 = p.iter().sum();
    let mut remaining = shots;
    let mut out = vec![0u64; p.len()];
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == p.len() || remaining_mass <= 0.0 {
            out[i] = remaining;
            break;
        }
        let q = (pi / remaining_mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[i] = k;
        remaining -= k;
        remaining_mass -= pi;
    }
    out
}

/// A mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// `⟨O⟩` of the final state: exact, or the mean of `shots` ±1 outcomes.
pub fn measure_pauli<R: Rng>(
    result: &ExecutionResult,
    observable: &PauliString,
    mode: Mode,
    readout_error: f64,
    rng: &mut R,
) -> Result<Estimate> {
    measure_state(result.final_state(), observable, mode, readout_error, rng)
}

pub fn measure_state<R: Rng>(
    rho: &DensityMatrix,
    observable: &PauliString,
    mode: Mode,
    readout_error: f64,
    rng: &mut R,
) -> Result<Estimate> {
    let v = rho.expectation(observable)? * (1.0 - 2.0 * readout_error).powi(observable.weight() as i32);
    match mode {
        Mode::Exact => Ok(Estimate { mean: v, stderr: 0.0 }),
        Mode::Sampled { shots } => {
            if shots == 0 {
                return Err(invalid("shots", "must be positive in sampled mode"));
            }
            let p_plus = ((1.0 + v) / 2.0).clamp(0.0, 1.0);
            let k = Binomial::new(shots, p_plus).expect("valid binomial").sample(rng);
            let mean = 2.0 * k as f64 / shots as f64 - 1.0;
            let m = shots as f64;
            // Standard error of a ±1 mean; floor at one count to avoid a zero for pure outcomes.
            let var = (1.0 - mean * mean).max(1.0 / m);
            Ok(Estimate {
                mean,
                stderr: (var / m).sqrt(),
            })
        }
    }
}

/// Expectation of a Z-type string from bitstring counts.
pub fn z_expectation_from_counts(counts: &[u64], observable: &PauliString) -> Result<f64> {
    if observable.x_mask() != 0 {
        return Err(invalid("observable", format!("{observable} is not diagonal")));
    }
    let n = observable.num_qubits();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptySamples);
    }
    let zb = crate::pauli::to_basis_mask(observable.z_mask(), n);
    let s: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| if (i & zb).count_ones() % 2 == 0 { c as f64 } else { -(c as f64) })
        .sum();
    Ok(s / total as f64)
}

/// Uniform random Pauli word on `n` qubits.
pub fn random_pauli<R: Rng>(n: usize, rng: &mut R) -> PauliString {
    let letters: Vec<Pauli> = (0..n).map(|_| Pauli::ALL[rng.random_range(0..4)]).collect();
    PauliString::from_letters(&letters)
}

/// Insert dressings `P` before and `G P G†` after each CNOT layer, then fuse.
pub fn compile_with_dressings(circuit: &TrotterCircuit, dressings: &[PauliString]) -> Result<TrotterCircuit> {
    if dressings.len() != circuit.cnot_layers.len() {
        return Err(Error::InsertionCount {
            expected: circuit.cnot_layers.len(),
            actual: dressings.len(),
        });
    }
    let n = circuit.n;
    let mut before: Vec<Option<PauliString>> = vec![None; circuit.gates.len()];
    let mut after: Vec<Option<PauliString>> = vec![None; circuit.gates.len()];
    for (layer, p) in circuit.cnot_layers.iter().zip(dressings) {
        if p.num_qubits() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: p.num_qubits(),
            });
        }
        if p.is_identity() {
            continue;
        }
        let gates: Vec<GateOp> = layer.iter().map(|&i| circuit.gates[i].clone()).collect();
        let image = clifford_conjugate_all(&gates, p)?;
        before[layer[0]] = Some(*p);
        after[*layer.last().expect("non-empty layer")] = Some(image);
    }
    if before.iter().all(Option::is_none) {
        return Ok(circuit.clone());
    }
    let push_letters = |out: &mut Vec<GateOp>, p: &PauliString| {
        for q in 0..n {
            let l = p.letter(q);
            if l != Pauli::I {
                out.push(GateOp::Pauli { qubit: q, letter: l });
            }
        }
    };
    let mut gates = Vec::with_capacity(circuit.gates.len() + 4 * n);
    for (i, g) in circuit.gates.iter().enumerate() {
        if let Some(p) = &before[i] {
            push_letters(&mut gates, p);
        }
        gates.push(g.clone());
        if let Some(p) = &after[i] {
            push_letters(&mut gates, p);
        }
    }
    TrotterCircuit::from_gates(n, fuse_dressings(gates), circuit.dt, circuit.order)
}

/// Merge each qubit's single-qubit gates between multi-qubit gates into one
/// `U1` whenever the run contains a Pauli dressing.
fn fuse_dressings(gates: Vec<GateOp>) -> Vec<GateOp> {
    let mut out = Vec::with_capacity(gates.len());
    let mut run: Vec<GateOp> = Vec::new();
    let flush = |run: &mut Vec<GateOp>, out: &mut Vec<GateOp>| {
        let mut order: Vec<usize> = Vec::new();
        for g in run.iter() {
            let q = g.qubits()[0];
            if !order.contains(&q) {
                order.push(q);
            }
        }
        for q in order {
            let mine: Vec<&GateOp> = run.iter().filter(|g| g.qubits()[0] == q).collect();
            if mine.iter().any(|g| matches!(g, GateOp::Pauli { .. })) {
                let m = mine.iter().fold(Pauli::I.matrix(), |acc: Mat2, g| {
                    mat2_mul(&g.single_qubit_matrix().expect("single-qubit gate"), &acc)
                });
                out.push(GateOp::U1 { qubit: q, matrix: m });
            } else {
                out.extend(mine.into_iter().cloned());
            }
        }
        run.clear();
    };
    for g in gates {
        if g.single_qubit_matrix().is_some() {
            run.push(g);
        } else {
            flush(&mut run, &mut out);
            out.push(g);
        }
    }
    flush(&mut run, &mut out);
    out
}

/// One uniformly twirled copy of `circuit`.
pub fn twirl_once<R: Rng>(circuit: &TrotterCircuit, rng: &mut R) -> Result<TrotterCircuit> {
    let dressings: Vec<PauliString> = circuit
        .cnot_layers
        .iter()
        .map(|_| random_pauli(circuit.n, rng))
        .collect();
    compile_with_dressings(circuit, &dressings)
}

/// `copies` independently twirled, logically equivalent copies of `circuit`.
pub fn randomized_compile(circuit: &TrotterCircuit, copies: usize, seed: u64) -> Result<Vec<TrotterCircuit>> {
    if copies < 1 {
        return Err(invalid("R", "need at least one copy"));
    }
    let mut rng = stream_rng(seed, 0);
    (0..copies).map(|_| twirl_once(circuit, &mut rng)).collect()
}

/// Pauli-basis process matrix `χ_ab` of the mixture of unitaries `errors`
/// (uniform weights): `χ_ab = mean_j c_a^j conj(c_b^j)`, `c_a = Tr(P_a W)/2^n`.
pub fn pauli_process_matrix(errors: &[CMatrix]) -> Vec<Vec<C64>> {
    let dim = errors.first().map(|e| e.dim()).unwrap_or(1);
    let n = dim.trailing_zeros() as usize;
    let words: Vec<PauliString> = PauliString::all(n).collect();
    let k = words.len();
    let mut chi = vec![vec![C64::new(0.0, 0.0); k]; k];
    for w in errors {
        let coeffs: Vec<C64> = words
            .iter()
            .map(|p| p.matrix().mul(w).trace() / dim as f64)
            .collect();
        for a in 0..k {
            for b in 0..k {
                chi[a][b] += coeffs[a] * coeffs[b].conj();
            }
        }
    }
    let scale = 1.0 / errors.len().max(1) as f64;
    for row in chi.iter_mut() {
        for z in row.iter_mut() {
            *z *= scale;
        }
    }
    chi
}

/// Largest off-diagonal magnitude of a process matrix.
pub fn offdiagonal_residue(chi: &[Vec<C64>]) -> f64 {
    let mut r: f64 = 0.0;
    for (a, row) in chi.iter().enumerate() {
        for (b, z) in row.iter().enumerate() {
            if a != b {
                r = r.max(z.norm());
            }
        }
    }
    r
}

/// Error unitary `U_ideal† U_noisy` of each twirled copy under a CNOT kick.
pub fn twirled_error_unitaries(
    circuit: &TrotterCircuit,
    copies: &[TrotterCircuit],
    kick: f64,
) -> Vec<CMatrix> {
    let ideal_dag = circuit.unitary().adjoint();
    copies
        .iter()
        .map(|c| ideal_dag.mul(&c.unitary_with_kick(kick)))
        .collect()
}
