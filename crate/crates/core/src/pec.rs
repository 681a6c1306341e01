//! Partial probabilistic error cancellation: quasi-probabilities, decoherence-rate
//! scheduling, insertion sampling, mitigated estimators and cost formulas.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{check_factors, reset_dephasing_probability, PauliChannel};
use crate::emulator::{
    apply_readout_error, sample_counts, stream_rng, twirl_once, DeviceModel, Estimate, LayerPropagator,
};
use crate::error::{invalid, Error, Result};
use crate::gate::GateOp;
use crate::hamiltonian::tolerant_ceil;
use crate::linalg::DensityMatrix;
use crate::pauli::{Pauli, PauliString};
use crate::trotter::TrotterCircuit;

/// Monte Carlo samples per parallel work unit.
const BLOCK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuasiKind {
    /// `q_0 = 1 + Σ r_k ε_k`, `q_k = -r_k ε_k`.
    #[default]
    FirstOrder,
    /// Exact map onto the reduced channel, built in the fidelity domain.
    ExactInverse,
}

/// Signed decomposition of a (partial) inverse channel over the Pauli words of a subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiProbability {
    pub subgroup: Vec<usize>,
    /// Coefficients in word-index order.
    pub q: Vec<f64>,
}

impl QuasiProbability {
    pub fn new(subgroup: Vec<usize>, q: Vec<f64>) -> Result<Self> {
        let len = 1usize << (2 * subgroup.len());
        if q.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: q.len(),
            });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(invalid("q", "coefficients must be finite"));
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { subgroup, q })
    }

    pub fn identity(subgroup: Vec<usize>) -> Self {
        let mut q = vec![0.0; 1 << (2 * subgroup.len())];
        q[0] = 1.0;
        Self { subgroup, q }
    }

    pub fn width(&self) -> usize {
        self.subgroup.len()
    }

    /// `C_mit = Σ |q_k|`.
    pub fn c_mit(&self) -> f64 {
        self.q.iter().map(|x| x.abs()).sum()
    }

    /// Sampling probabilities `|q_k| / C_mit`.
    pub fn probabilities(&self) -> Vec<f64> {
        let c = self.c_mit();
        self.q.iter().map(|x| x.abs() / c).collect()
    }

    pub fn sign(&self, k: usize) -> f64 {
        if self.q[k] < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.q[1..].iter().all(|&x| x == 0.0)
    }

    /// Coefficients of the insertion map applied after `ch`, i.e. `Σ_{a,b} ε_a q_b P_a P_b`.
    pub fn composed_after(&self, ch: &PauliChannel) -> Result<Vec<f64>> {
        if ch.subgroup() != self.subgroup.as_slice() {
            return Err(Error::Tiling(format!(
                "quasi-probability on {:?} does not match channel on {:?}",
                self.subgroup,
                ch.subgroup()
            )));
        }
        let words: Vec<PauliString> = PauliString::all(self.width()).collect();
        let mut out = vec![0.0; words.len()];
        for (a, wa) in words.iter().enumerate() {
            let ea = ch.probs()[a];
            if ea == 0.0 {
                continue;
            }
            for (b, wb) in words.iter().enumerate() {
                out[wa.mul(wb)?.index()] += ea * self.q[b];
            }
        }
        Ok(out)
    }
}

/// First-order partial inverse of `ch` with mitigation factors `r` (indexed by word; `r[0]` is ignored).
pub fn build_quasiprobability(ch: &PauliChannel, r: &[f64]) -> Result<QuasiProbability> {
    check_factors(r, ch.probs().len())?;
    let mut q: Vec<f64> = ch
        .probs()
        .iter()
        .zip(r)
        .map(|(e, ri)| -ri * e)
        .collect();
    q[0] = 1.0 - q[1..].iter().sum::<f64>();
    Ok(QuasiProbability {
        subgroup: ch.subgroup().to_vec(),
        q,
    })
}

/// Quasi-probability whose composition with `ch` is exactly `ch.reduced(r)`.
pub fn build_exact_quasiprobability(ch: &PauliChannel, r: &[f64]) -> Result<QuasiProbability> {
    let reduced = ch.reduced(r)?;
    let f = ch.fidelities();
    let fr = reduced.fidelities();
    let mut ratio = Vec::with_capacity(f.len());
    for (a, (&fa, &fra)) in f.iter().zip(&fr).enumerate() {
        if fa <= 0.0 {
            return Err(invalid(
                "channel",
                format!("fidelity of word {a} is {fa}; the channel is not invertible"),
            ));
        }
        ratio.push(fra / fa);
    }
    let words: Vec<PauliString> = ch.words().collect();
    let len = words.len() as f64;
    let mut q: Vec<f64> = words
        .iter()
        .map(|wk| {
            words
                .iter()
                .zip(&ratio)
                .map(|(wa, x)| wa.sign_unchecked(wk) as f64 * x)
                .sum::<f64>()
                / len
        })
        .collect();
    q[0] = 1.0 - q[1..].iter().sum::<f64>();
    Ok(QuasiProbability {
        subgroup: ch.subgroup().to_vec(),
        q,
    })
}

pub fn build_quasi(kind: QuasiKind, ch: &PauliChannel, r: &[f64]) -> Result<QuasiProbability> {
    match kind {
        QuasiKind::FirstOrder => build_quasiprobability(ch, r),
        QuasiKind::ExactInverse => build_exact_quasiprobability(ch, r),
    }
}

/// Factors `r` on every non-identity word.
pub fn uniform_factors(width: usize, r: f64) -> Vec<f64> {
    let mut v = vec![r; 1 << (2 * width)];
    v[0] = 0.0;
    v
}

/// `ε_r = Σ_{k>0} r_k ε_k`.
pub fn mitigated_weight(ch: &PauliChannel, r: &[f64]) -> f64 {
    ch.probs().iter().zip(r).skip(1).map(|(e, ri)| e * ri).sum()
}

/// Schedule of one subgroup channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSchedule {
    pub channel: PauliChannel,
    /// Target rates `Γ_k` per word (`[0]` unused).
    pub targets: Vec<f64>,
    pub r: Vec<f64>,
    /// Rates `ε_k (1 - r_k) / Δt` actually realized.
    pub realized: Vec<f64>,
    pub quasi: QuasiProbability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationPlan {
    /// Largest step allowed by the target rates; `None` when no rate constrains it.
    pub dt_max: Option<f64>,
    pub dt: f64,
    pub layers: usize,
    pub kind: QuasiKind,
    pub channels: Vec<ChannelSchedule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Force this step instead of the largest admissible one.
    pub dt: Option<f64>,
    /// Upper bound on the step, e.g. from a Trotter error budget.
    pub dt_cap: Option<f64>,
    pub kind: QuasiKind,
}

fn word_label(ch: &PauliChannel, k: usize) -> String {
    let w = PauliString::from_index(ch.width(), k);
    let qs: Vec<String> = ch.subgroup().iter().map(|q| q.to_string()).collect();
    format!("{w}@{}", qs.join(","))
}

/// Choose `Δt`, `D` and factors `r_k` so the realized rates `ε_k(1-r_k)/Δt` hit `targets`.
pub fn plan_decoherence_control(
    channels: &[PauliChannel],
    targets: &[Vec<f64>],
    t: f64,
    opts: &PlanOptions,
) -> Result<MitigationPlan> {
    if channels.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: channels.len(),
            actual: targets.len(),
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be positive"));
    }
    let mut dt_max: Option<f64> = None;
    for (ch, g) in channels.iter().zip(targets) {
        if g.len() != ch.probs().len() {
            return Err(Error::DimensionMismatch {
                expected: ch.probs().len(),
                actual: g.len(),
            });
        }
        for k in 1..g.len() {
            let (gk, ek) = (g[k], ch.probs()[k]);
            if !(gk >= 0.0 && gk.is_finite()) {
                return Err(invalid(&format!("gamma[{}]", word_label(ch, k)), "must be finite and non-negative"));
            }
            if gk > 0.0 {
                if ek == 0.0 {
                    return Err(Error::MissingChannel {
                        label: word_label(ch, k),
                        rate: gk,
                    });
                }
                let bound = ek / gk;
                dt_max = Some(dt_max.map_or(bound, |d: f64| d.min(bound)));
            }
        }
    }
    let (dt, layers) = match opts.dt {
        Some(dt) => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("dt", "must be positive"));
            }
            let d = (t / dt).round();
            if d < 1.0 || ((t / dt) - d).abs() > 1e-9 * d.max(1.0) {
                return Err(invalid("dt", format!("t = {t} is not a whole number of steps of {dt}")));
            }
            if let Some(bound) = dt_max {
                if dt > bound * (1.0 + 1e-12) {
                    let (ch, k) = binding_channel(channels, targets, dt);
                    return Err(Error::RateUnreachable {
                        label: word_label(&channels[ch], k),
                        rate: targets[ch][k],
                        available: channels[ch].probs()[k] / dt,
                        dt,
                    });
                }
            }
            (dt, d as usize)
        }
        None => {
            let bound = match (dt_max, opts.dt_cap) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => {
                    return Err(invalid("dt", "no target rate constrains the step; give dt or dt_cap"))
                }
            };
            if !(bound > 0.0) {
                return Err(invalid("dt_cap", "must be positive"));
            }
            let d = tolerant_ceil(t / bound).max(1.0);
            (t / d, d as usize)
        }
    };
    let at_bound = dt_max.is_some_and(|b| (dt - b).abs() <= 1e-12 * b);
    let mut schedules = Vec::with_capacity(channels.len());
    for (ch, g) in channels.iter().zip(targets) {
        let mut r = vec![0.0; g.len()];
        for k in 1..g.len() {
            let ek = ch.probs()[k];
            r[k] = if ek == 0.0 {
                1.0
            } else if at_bound && g[k] > 0.0 && (ek / g[k] - dt).abs() <= 1e-12 * dt {
                0.0
            } else {
                (1.0 - g[k] * dt / ek).clamp(0.0, 1.0)
            };
        }
        schedules.push(schedule(ch, g.clone(), r, dt, opts.kind)?);
    }
    Ok(MitigationPlan {
        dt_max,
        dt,
        layers,
        kind: opts.kind,
        channels: schedules,
    })
}

fn binding_channel(channels: &[PauliChannel], targets: &[Vec<f64>], dt: f64) -> (usize, usize) {
    let mut best = (0, 1, f64::INFINITY);
    for (i, (ch, g)) in channels.iter().zip(targets).enumerate() {
        for k in 1..g.len() {
            if g[k] > 0.0 {
                let slack = ch.probs()[k] - g[k] * dt;
                if slack < best.2 {
                    best = (i, k, slack);
                }
            }
        }
    }
    (best.0, best.1)
}

fn schedule(ch: &PauliChannel, targets: Vec<f64>, r: Vec<f64>, dt: f64, kind: QuasiKind) -> Result<ChannelSchedule> {
    let realized = ch
        .probs()
        .iter()
        .zip(&r)
        .enumerate()
        .map(|(k, (e, ri))| if k == 0 { 0.0 } else { e * (1.0 - ri) / dt })
        .collect();
    let quasi = build_quasi(kind, ch, &r)?;
    Ok(ChannelSchedule {
        channel: ch.clone(),
        targets,
        r,
        realized,
        quasi,
    })
}

impl MitigationPlan {
    /// Plan with explicit factors per channel; targets are set to the realized rates.
    pub fn from_factors(
        channels: &[PauliChannel],
        factors: &[Vec<f64>],
        dt: f64,
        layers: usize,
        kind: QuasiKind,
    ) -> Result<Self> {
        if channels.len() != factors.len() {
            return Err(Error::DimensionMismatch {
                expected: channels.len(),
                actual: factors.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        let mut schedules = Vec::with_capacity(channels.len());
        for (ch, r) in channels.iter().zip(factors) {
            check_factors(r, ch.probs().len())?;
            let mut r = r.clone();
            r[0] = 0.0;
            let mut s = schedule(ch, vec![], r, dt, kind)?;
            s.targets = s.realized.clone();
            schedules.push(s);
        }
        Ok(Self {
            dt_max: None,
            dt,
            layers,
            kind,
            channels: schedules,
        })
    }

    /// Unmitigated plan (`r ≡ 0`).
    pub fn unmitigated(channels: &[PauliChannel], dt: f64, layers: usize) -> Result<Self> {
        let f: Vec<Vec<f64>> = channels.iter().map(|c| vec![0.0; c.probs().len()]).collect();
        Self::from_factors(channels, &f, dt, layers, QuasiKind::FirstOrder)
    }

    pub fn quasis(&self) -> Vec<QuasiProbability> {
        self.channels.iter().map(|s| s.quasi.clone()).collect()
    }

    pub fn subgroups(&self) -> Vec<Vec<usize>> {
        self.channels.iter().map(|s| s.channel.subgroup().to_vec()).collect()
    }

    /// Cost of one layer, `Π_m C_mit^(m)`.
    pub fn c_iter(&self) -> f64 {
        iteration_cost(&self.quasis())
    }

    /// `C_tot = C_iter^D`.
    pub fn c_tot(&self) -> f64 {
        self.c_iter().powi(self.layers as i32)
    }

    /// Channels with `ε_k(1-r_k)`, i.e. what the mitigated device realizes per layer.
    pub fn reduced_channels(&self) -> Result<Vec<PauliChannel>> {
        self.channels.iter().map(|s| s.channel.reduced(&s.r)).collect()
    }

    /// Reject a device whose channel subgroups differ from the planned ones.
    pub fn check_tiling(&self, subgroups: &[Vec<usize>]) -> Result<()> {
        if self.subgroups() != subgroups {
            return Err(Error::Tiling(format!(
                "plan subgroups {:?} differ from device subgroups {:?}",
                self.subgroups(),
                subgroups
            )));
        }
        Ok(())
    }

    pub fn default_samples(&self) -> usize {
        default_samples(self.c_tot())
    }
}

/// `ceil(90 · C_tot²)`.
pub fn default_samples(c_tot: f64) -> usize {
    (90.0 * c_tot * c_tot).ceil() as usize
}

/// Device channels with the dephasing byproduct of every reset slot folded into
/// the channel that contains the reset qubit.
pub fn effective_channels(model: &DeviceModel, circuit: &TrotterCircuit) -> Result<Vec<PauliChannel>> {
    let mut channels = model.channels.clone();
    for g in circuit.reset_gates() {
        let GateOp::Reset { qubit, w } = g else {
            continue;
        };
        let p = reset_dephasing_probability(w, model.p_er);
        let slot = channels
            .iter()
            .position(|c| c.subgroup().contains(&qubit))
            .ok_or_else(|| Error::Tiling(format!("no channel contains reset qubit {qubit}")))?;
        let ch = &channels[slot];
        let pos = ch.subgroup().iter().position(|&q| q == qubit).expect("contains");
        let mut z = PauliString::identity(ch.width());
        z.set(pos, Pauli::Z);
        let deph = PauliChannel::from_errors(ch.subgroup().to_vec(), &[(z, p)])?;
        channels[slot] = ch.compose(&deph)?;
    }
    Ok(channels)
}

/// One Monte Carlo draw of insertions for every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InsertionDraw {
    pub layers: Vec<PauliString>,
    /// Sign of each layer's insertion.
    pub layer_signs: Vec<f64>,
    pub sign: f64,
    /// `C_tot`; the estimator uses `weight · sign · value`.
    pub weight: f64,
}

/// Per-subgroup alias tables for repeated draws.
#[derive(Debug, Clone)]
pub struct InsertionSampler {
    n: usize,
    layers: usize,
    c_iter: f64,
    tables: Vec<(Vec<usize>, WeightedIndex<f64>, QuasiProbability)>,
}

impl InsertionSampler {
    pub fn new(plan: &MitigationPlan, n: usize) -> Result<Self> {
        let mut tables = Vec::with_capacity(plan.channels.len());
        for s in &plan.channels {
            for &q in s.quasi.subgroup.iter() {
                if q >= n {
                    return Err(Error::QubitOutOfRange { index: q, n });
                }
            }
            let w: Vec<f64> = s.quasi.q.iter().map(|x| x.abs()).collect();
            let table = WeightedIndex::new(&w).map_err(|e| invalid("quasi", e.to_string()))?;
            tables.push((s.quasi.subgroup.clone(), table, s.quasi.clone()));
        }
        Ok(Self {
            n,
            layers: plan.layers,
            c_iter: plan.c_iter(),
            tables,
        })
    }

    /// Draw one full-register insertion and its sign for a single layer.
    pub fn draw_layer<R: Rng>(&self, rng: &mut R) -> (PauliString, f64) {
        let mut p = PauliString::identity(self.n);
        let mut sign = 1.0;
        for (subgroup, table, quasi) in &self.tables {
            let k = table.sample(rng);
            sign *= quasi.sign(k);
            if k != 0 {
                let w = PauliString::from_index(subgroup.len(), k);
                for (j, &q) in subgroup.iter().enumerate() {
                    p.set(q, w.letter(j));
                }
            }
        }
        (p, sign)
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> InsertionDraw {
        let mut layers = Vec::with_capacity(self.layers);
        let mut layer_signs = Vec::with_capacity(self.layers);
        for _ in 0..self.layers {
            let (p, s) = self.draw_layer(rng);
            layers.push(p);
            layer_signs.push(s);
        }
        let sign = layer_signs.iter().product();
        InsertionDraw {
            layers,
            layer_signs,
            sign,
            weight: self.c_iter.powi(self.layers as i32),
        }
    }

    pub fn c_iter(&self) -> f64 {
        self.c_iter
    }
}

/// Draw per-layer insertions for a device with the given subgroups.
pub fn sample_insertions<R: Rng>(
    plan: &MitigationPlan,
    n: usize,
    subgroups: &[Vec<usize>],
    rng: &mut R,
) -> Result<InsertionDraw> {
    plan.check_tiling(subgroups)?;
    Ok(InsertionSampler::new(plan, n)?.draw(rng))
}

/// Mean and standard error of `C_tot · sign · value`.
pub fn mitigated_expectation(samples: &[(f64, f64)], c_tot: f64) -> Result<Estimate> {
    if samples.len() < 2 {
        return Err(Error::EmptySamples);
    }
    let vals: Vec<f64> = samples.iter().map(|(s, v)| c_tot * s * v).collect();
    Ok(mean_stderr(&vals))
}

fn mean_stderr(vals: &[f64]) -> Estimate {
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Estimate {
        mean,
        stderr: (var / m).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MitigationConfig {
    pub samples: usize,
    /// Shots per sampled circuit; `None` reads populations exactly.
    pub shots: Option<u64>,
    pub seed: u64,
}

/// Mitigated populations at every layer boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigatedSeries {
    pub times: Vec<f64>,
    /// `populations[d][i]`: estimate of `⟨i|ρ(d Δt)|i⟩`.
    pub populations: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub samples: usize,
    pub c_tot: f64,
}

#[derive(Clone)]
struct Accum {
    sum: Vec<Vec<f64>>,
    sq: Vec<Vec<f64>>,
}

impl Accum {
    fn new(points: usize, dim: usize) -> Self {
        Self {
            sum: vec![vec![0.0; dim]; points],
            sq: vec![vec![0.0; dim]; points],
        }
    }

    fn merge(&mut self, other: &Accum) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.sq.iter_mut().zip(&other.sq) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Sign-weighted Monte Carlo over insertion draws.
///
/// Sample `i` uses stream `i` of `cfg.seed`; when the device has a coherent CNOT
/// kick each sample also runs a freshly twirled copy of the layer. Blocks are
/// reduced in index order, so results do not depend on the thread count.
pub fn run_mitigated(
    circuit: &TrotterCircuit,
    model: &DeviceModel,
    plan: &MitigationPlan,
    initial: &DensityMatrix,
    cfg: &MitigationConfig,
) -> Result<MitigatedSeries> {
    if cfg.samples < 2 {
        return Err(Error::EmptySamples);
    }
    if cfg.shots == Some(0) {
        return Err(invalid("shots", "must be positive"));
    }
    if initial.num_qubits() != model.n {
        return Err(Error::DimensionMismatch {
            expected: 1 << model.n,
            actual: initial.dim(),
        });
    }
    plan.check_tiling(&model.subgroups())?;
    let sampler = InsertionSampler::new(plan, model.n)?;
    let base = LayerPropagator::new(circuit, model)?;
    let layers = plan.layers;
    let dim = initial.dim();
    let c_iter = sampler.c_iter();
    let blocks: Vec<usize> = (0..cfg.samples.div_ceil(BLOCK)).collect();
    let partial = blocks
        .par_iter()
        .map(|&b| {
            let mut acc = Accum::new(layers + 1, dim);
            for i in b * BLOCK..((b + 1) * BLOCK).min(cfg.samples) {
                let mut rng = stream_rng(cfg.seed, i as u64);
                let prop = if model.kick != 0.0 {
                    let c = twirl_once(circuit, &mut rng)?;
                    base.with_unitary(c.unitary_with_kick(model.kick))
                } else {
                    base.clone()
                };
                let mut rho = initial.clone();
                let mut weight = 1.0;
                for d in 0..=layers {
                    if d > 0 {
                        let (p, s) = sampler.draw_layer(&mut rng);
                        rho = prop.step(&rho, Some(&p))?;
                        weight *= c_iter * s;
                    }
                    let pops = match cfg.shots {
                        None => apply_readout_error(&rho.populations(), model.n, model.readout_error),
                        Some(shots) => sample_counts(&rho.populations(), model.n, shots, model.readout_error, &mut rng)
                            .into_iter()
                            .map(|c| c as f64 / shots as f64)
                            .collect(),
                    };
                    for (j, p) in pops.iter().enumerate() {
                        let v = weight * p;
                        acc.sum[d][j] += v;
                        acc.sq[d][j] += v * v;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Accum::new(layers + 1, dim);
    for a in &partial {
        total.merge(a);
    }
    let m = cfg.samples as f64;
    let mut populations = Vec::with_capacity(layers + 1);
    let mut stderr = Vec::with_capacity(layers + 1);
    for d in 0..=layers {
        let mean: Vec<f64> = total.sum[d].iter().map(|s| s / m).collect();
        let se = total.sq[d]
            .iter()
            .zip(&mean)
            .map(|(q, mu)| ((q / m - mu * mu).max(0.0) * m / (m - 1.0) / m).sqrt())
            .collect();
        populations.push(mean);
        stderr.push(se);
    }
    Ok(MitigatedSeries {
        times: (0..=layers).map(|d| d as f64 * plan.dt).collect(),
        populations,
        stderr,
        samples: cfg.samples,
        c_tot: c_iter.powi(layers as i32),
    })
}

/// Exhaustive sum over every insertion sequence weighted by `Π q_k`; exact-mode states per layer.
///
/// Cost grows as `(Π_m 4^K_m)^D`; intended for small oracle checks.
pub fn enumerate_mitigated_states(
    circuit: &TrotterCircuit,
    model: &DeviceModel,
    plan: &MitigationPlan,
    initial: &DensityMatrix,
) -> Result<Vec<DensityMatrix>> {
    plan.check_tiling(&model.subgroups())?;
    let prop = LayerPropagator::new(circuit, model)?;
    let mut layer_terms: Vec<(PauliString, f64)> = vec![(PauliString::identity(model.n), 1.0)];
    for s in &plan.channels {
        let mut next = Vec::new();
        for (p, w) in &layer_terms {
            for (k, &qk) in s.quasi.q.iter().enumerate() {
                if qk == 0.0 {
                    continue;
                }
                let word = PauliString::from_index(s.quasi.width(), k).embed(&s.quasi.subgroup, model.n)?;
                next.push((p.mul(&word)?.unsigned(), w * qk));
            }
        }
        layer_terms = next;
    }
    let total = layer_terms.len().pow(plan.layers as u32);
    if total > 1 << 20 {
        return Err(invalid("plan", format!("{total} insertion sequences is too many to enumerate")));
    }
    // Depth-first over sequences; each branch carries its state and weight.
    let mut out: Vec<Option<DensityMatrix>> = vec![None; plan.layers + 1];
    out[0] = Some(initial.clone());
    let mut stack: Vec<(usize, DensityMatrix, f64)> = vec![(0, initial.clone(), 1.0)];
    while let Some((d, rho, w)) = stack.pop() {
        if d == plan.layers {
            continue;
        }
        for (p, qk) in &layer_terms {
            let next = prop.step(&rho, Some(p))?;
            let wn = w * qk;
            let scaled = next.matrix().scale(crate::linalg::C64::new(wn, 0.0));
            let slot = &mut out[d + 1];
            match slot {
                Some(acc) => {
                    let m = acc.matrix().add(&scaled);
                    *acc = DensityMatrix::from_matrix_unchecked(model.n, m);
                }
                None => *slot = Some(DensityMatrix::from_matrix_unchecked(model.n, scaled)),
            }
            stack.push((d + 1, next, wn));
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every depth reached")).collect())
}

/// `C_tot = (1 + 2 ε_r)^{g D}`.
pub fn total_cost(eps_r: f64, g: usize, d: usize) -> f64 {
    (1.0 + 2.0 * eps_r).powf((g * d) as f64)
}

/// `C_iter = Π_m C_mit^(m)`.
pub fn iteration_cost(quasis: &[QuasiProbability]) -> f64 {
    quasis.iter().map(|q| q.c_mit()).product()
}

/// One cost series: `C_tot` against depth at fixed `n` and `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSeries {
    pub n: usize,
    pub r: f64,
    pub eps_r: f64,
    /// `(D, C_tot)` points.
    pub points: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingVariable {
    N,
    R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub x: f64,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFit {
    pub variable: ScalingVariable,
    pub series: Vec<SeriesFit>,
    /// Slope of the per-series log-slopes against the scaling variable (α or β).
    pub coefficient: f64,
    pub offset: f64,
    /// Largest deviation from the linear law relative to the largest slope.
    pub linear_residual: f64,
    /// Mean of `slope / (n ε_r)`.
    pub lambda: f64,
}

fn linear_fit(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let resid = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok((slope, intercept, resid))
}

/// Fit `ln C_tot = slope · D` per series, then `slope = coefficient · x + offset`.
pub fn fit_cost_scaling(series: &[CostSeries], variable: ScalingVariable) -> Result<CostFit> {
    if series.len() < 2 {
        return Err(Error::Fit("need at least two series".into()));
    }
    let mut fits = Vec::with_capacity(series.len());
    for s in series {
        if s.points.len() < 3 {
            return Err(Error::Fit(format!("series n={} r={} has fewer than 3 points", s.n, s.r)));
        }
        if s.points.iter().any(|p| !(p.1 > 0.0)) {
            return Err(Error::Fit("non-positive cost".into()));
        }
        let pts: Vec<(f64, f64)> = s.points.iter().map(|&(d, c)| (d as f64, c.ln())).collect();
        let (slope, intercept, residual) = linear_fit(&pts)?;
        let x = match variable {
            ScalingVariable::N => s.n as f64,
            ScalingVariable::R => s.r,
        };
        fits.push(SeriesFit {
            x,
            slope,
            intercept,
            residual,
        });
    }
    let pts: Vec<(f64, f64)> = fits.iter().map(|f| (f.x, f.slope)).collect();
    let (coefficient, offset, resid) = linear_fit(&pts)?;
    let scale = fits.iter().map(|f| f.slope.abs()).fold(0.0, f64::max);
    let lambdas: Vec<f64> = series
        .iter()
        .zip(&fits)
        .filter(|(s, _)| s.eps_r > 0.0 && s.n > 0)
        .map(|(s, f)| f.slope / (s.n as f64 * s.eps_r))
        .collect();
    let lambda = if lambdas.is_empty() {
        f64::NAN
    } else {
        lambdas.iter().sum::<f64>() / lambdas.len() as f64
    };
    Ok(CostFit {
        variable,
        series: fits,
        coefficient,
        offset,
        linear_residual: if scale > 0.0 { resid / scale } else { 0.0 },
        lambda,
    })
}

/// Largest total noise probability compatible with a shot budget:
/// `Γ t / D + ln(M_max) / (2 λ n D²)`.
pub fn max_error_budget(gamma: f64, t: f64, d: f64, n: usize, lambda: f64, m_max: f64) -> f64 {
    gamma * t / d + m_max.ln() / (2.0 * lambda * n as f64 * d * d)
}

/// [`max_error_budget`] with `D = n^d J (J+E) t² / ε_T`.
pub fn trotter_error_budget(
    eps_trot: f64,
    gamma: f64,
    n: usize,
    lattice_dim: u32,
    j: f64,
    e: f64,
    t: f64,
    lambda: f64,
    m_max: f64,
) -> f64 {
    let nd = (n as f64).powi(lattice_dim as i32);
    let a = j * (j + e);
    eps_trot * gamma / (nd * a * t) + eps_trot * eps_trot * m_max.ln() / (2.0 * lambda * nd * nd * n as f64 * a * a * t.powi(4))
}

/// One row of a cost table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub n: usize,
    pub d: usize,
    pub r: f64,
    pub eps_r: f64,
    pub c_iter: f64,
    pub c_tot: f64,
    pub m_required: usize,
}

/// Channels on the standard tiling: every single-qubit word at `eps_single`
/// on the qubits a bond owns, every weight-2 word at `eps_pair`.
pub fn uniform_bond_channels(n: usize, eps_single: f64, eps_pair: f64) -> Result<Vec<PauliChannel>> {
    let tiling = crate::emulator::standard_tiling(n);
    let mut out = Vec::with_capacity(tiling.len());
    for bond in tiling {
        let mut errors = Vec::new();
        for w in PauliString::all(2).skip(1) {
            let support = w.support();
            if support.len() == 2 {
                errors.push((w, eps_pair));
            } else {
                let q = bond[support[0]];
                if crate::emulator::owning_pair(n, q).as_deref() == Some(bond.as_slice()) {
                    errors.push((w, eps_single));
                }
            }
        }
        out.push(PauliChannel::from_errors(bond, &errors)?);
    }
    Ok(out)
}
