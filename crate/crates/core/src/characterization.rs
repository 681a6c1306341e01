//! Pauli-noise characterization by cycle benchmarking of the Clifford-identity layer.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{normalize_into, PauliChannel};
use crate::emulator::{measure_state, stream_rng, twirl_once, DeviceModel, LayerPropagator, Mode};
use crate::error::{invalid, Error, Result};
use crate::gate::GateOp;
use crate::linalg::{CMatrix, DensityMatrix, C64};
use crate::pauli::{Pauli, PauliString};
use crate::trotter::TrotterCircuit;

/// Zero every Z-rotation angle, keeping the gate skeleton.
pub fn make_clifford_identity_variant(layer: &TrotterCircuit) -> Result<TrotterCircuit> {
    let mut gates = Vec::with_capacity(layer.gates.len());
    for (i, g) in layer.gates.iter().enumerate() {
        gates.push(match g {
            GateOp::Rz { qubit, .. } => GateOp::Rz {
                qubit: *qubit,
                theta: 0.0,
            },
            GateOp::Rx { .. } | GateOp::Ry { .. } | GateOp::U1 { .. } => {
                return Err(Error::NonZRotation(i))
            }
            other => other.clone(),
        });
    }
    TrotterCircuit::from_gates(layer.n, gates, layer.dt, layer.order)
}

/// `f_a = Σ_k ε_k · sign(a, P_k)`.
pub fn pauli_fidelity(ch: &PauliChannel, a: &PauliString) -> Result<f64> {
    ch.fidelity(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CBConfig {
    pub subgroup: Vec<usize>,
    pub depths: Vec<usize>,
    /// Shots per probe and depth; `None` reads expectations exactly.
    pub shots: Option<u64>,
    /// Probe words on the subgroup; `None` means every non-identity word.
    pub probes: Option<Vec<PauliString>>,
    /// Independent twirl sequences averaged per point when the device has a coherent kick.
    pub twirls: usize,
    pub seed: u64,
}

impl CBConfig {
    pub fn new(subgroup: Vec<usize>) -> Self {
        Self {
            subgroup,
            depths: vec![2, 4, 8, 16],
            shots: None,
            probes: None,
            twirls: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depths.len() < 2 {
            return Err(invalid("depths", "need at least two depths"));
        }
        if self.depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("depths", "must be strictly increasing"));
        }
        if self.shots == Some(0) {
            return Err(invalid("shots", "must be positive"));
        }
        Ok(())
    }

    fn probe_words(&self) -> Vec<PauliString> {
        match &self.probes {
            Some(p) => p.clone(),
            None => PauliString::all(self.subgroup.len()).skip(1).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub depth: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFit {
    pub probe: PauliString,
    pub f: f64,
    pub amplitude: f64,
    pub stderr: f64,
    pub residual: f64,
    /// Some depth gave a non-positive expectation; those points are dropped.
    pub nonpositive: bool,
    pub decay: Vec<DecayPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub subgroup: Vec<usize>,
    pub probes: Vec<ProbeFit>,
}

impl FidelityEstimate {
    pub fn get(&self, probe: &PauliString) -> Option<&ProbeFit> {
        self.probes.iter().find(|p| p.probe == probe.unsigned())
    }
}

/// Product state with `+1` eigenvalue for `a` (identity letters start in `|0⟩`).
pub fn probe_eigenstate(a: &PauliString) -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let factors: Vec<DensityMatrix> = a
        .letters()
        .into_iter()
        .map(|l| {
            let psi = match l {
                Pauli::X => [C64::new(s, 0.0), C64::new(s, 0.0)],
                Pauli::Y => [C64::new(s, 0.0), C64::new(0.0, s)],
                _ => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            };
            DensityMatrix::from_pure(&psi).expect("normalised")
        })
        .collect();
    DensityMatrix::product(&factors).expect("non-empty")
}

/// Benchmark every probe on `cfg.subgroup`, fitting `⟨a⟩(m) = A f^m`.
pub fn run_cycle_benchmark(
    model: &DeviceModel,
    layer_v: &TrotterCircuit,
    cfg: &CBConfig,
) -> Result<FidelityEstimate> {
    cfg.validate()?;
    if layer_v.unitary().unitary_distance(&CMatrix::identity(1 << layer_v.n)) > 1e-10 {
        return Err(invalid("layer", "not a Clifford-identity layer"));
    }
    for &q in &cfg.subgroup {
        if q >= model.n {
            return Err(Error::QubitOutOfRange { index: q, n: model.n });
        }
    }
    let probes = cfg.probe_words();
    for p in &probes {
        if p.num_qubits() != cfg.subgroup.len() {
            return Err(Error::LengthMismatch {
                expected: cfg.subgroup.len(),
                actual: p.num_qubits(),
            });
        }
    }
    let prop = LayerPropagator::new(layer_v, model)?;
    let fits = probes
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            benchmark_probe(model, layer_v, &prop, cfg, a, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityEstimate {
        subgroup: cfg.subgroup.clone(),
        probes: fits,
    })
}

fn benchmark_probe<R: Rng>(
    model: &DeviceModel,
    layer_v: &TrotterCircuit,
    prop: &LayerPropagator,
    cfg: &CBConfig,
    a: &PauliString,
    rng: &mut R,
) -> Result<ProbeFit> {
    let full = a.embed(&cfg.subgroup, model.n)?;
    let rho0 = probe_eigenstate(&full);
    let max_depth = *cfg.depths.last().expect("validated");
    let twirl = model.kick != 0.0 && cfg.twirls > 0;
    let runs = if twirl { cfg.twirls } else { 1 };
    let mut exact = vec![0.0; cfg.depths.len()];
    for _ in 0..runs {
        let mut rho = rho0.clone();
        let mut next = 0;
        for m in 1..=max_depth {
            let step = if twirl {
                let c = twirl_once(layer_v, rng)?;
                prop.with_unitary(c.unitary_with_kick(model.kick))
            } else {
                prop.clone()
            };
            rho = step.step(&rho, None)?;
            if cfg.depths[next] == m {
                exact[next] += rho.expectation(&full)?;
                next += 1;
            }
        }
    }
    let readout = (1.0 - 2.0 * model.readout_error).powi(full.weight() as i32);
    let z: PauliString = "Z".parse().expect("label");
    let mut decay = Vec::with_capacity(cfg.depths.len());
    for (d, &m) in cfg.depths.iter().enumerate() {
        let v = readout * exact[d] / runs as f64;
        let mode = match cfg.shots {
            None => Mode::Exact,
            Some(shots) => Mode::Sampled { shots },
        };
        let rho = expectation_state(v);
        let e = measure_state(&rho, &z, mode, 0.0, rng)?;
        decay.push(DecayPoint {
            depth: m,
            value: e.mean,
            stderr: e.stderr,
        });
    }
    Ok(fit_decay(*a, decay))
}

/// Single-qubit diagonal state with `⟨Z⟩ = v`, used to sample a ±1 readout.
fn expectation_state(v: f64) -> DensityMatrix {
    let p = ((1.0 + v) / 2.0).clamp(0.0, 1.0);
    DensityMatrix::from_matrix_unchecked(1, CMatrix::from_real_diagonal(&[p, 1.0 - p]))
}

/// Log-linear least squares of `ln⟨a⟩` against depth, weighted by `⟨a⟩²/σ²`
/// when standard errors are available.
pub fn fit_decay(probe: PauliString, decay: Vec<DecayPoint>) -> ProbeFit {
    let nonpositive = decay.iter().any(|p| p.value <= 0.0);
    let pts: Vec<(f64, f64, f64)> = decay
        .iter()
        .filter(|p| p.value > 0.0)
        .map(|p| {
            let w = if p.stderr > 0.0 {
                (p.value / p.stderr).powi(2)
            } else {
                1.0
            };
            (p.depth as f64, p.value.ln(), w)
        })
        .collect();
    if pts.len() < 2 {
        return ProbeFit {
            probe,
            f: 0.0,
            amplitude: 0.0,
            stderr: f64::INFINITY,
            residual: f64::INFINITY,
            nonpositive: true,
            decay,
        };
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = pts
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let weighted = decay.iter().any(|p| p.stderr > 0.0);
    let slope_var = if weighted {
        1.0 / sxx
    } else if pts.len() > 2 {
        chi2 / (pts.len() - 2) as f64 / sxx
    } else {
        0.0
    };
    let f = slope.exp();
    ProbeFit {
        probe,
        f,
        amplitude: intercept.exp(),
        stderr: f * slope_var.sqrt(),
        residual: (chi2 / sw).sqrt(),
        nonpositive,
        decay,
    }
}

/// Raw transform `ε_k = 4^{-K} Σ_a sign(a, k) f_a` over fidelities in word-index order.
pub fn fidelities_to_probabilities(f: &[f64], k: usize) -> Result<Vec<f64>> {
    let len = 1usize << (2 * k);
    if f.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: f.len(),
        });
    }
    let words: Vec<PauliString> = PauliString::all(k).collect();
    Ok(words
        .iter()
        .map(|wk| {
            words
                .iter()
                .zip(f)
                .map(|(wa, fa)| wa.sign_unchecked(wk) as f64 * fa)
                .sum::<f64>()
                / len as f64
        })
        .collect())
}

/// Invert fitted fidelities to error probabilities; negatives are clamped to
/// zero and the result renormalized.
pub fn reconstruct_error_probabilities(f: &FidelityEstimate, k: usize) -> Result<PauliChannel> {
    if f.subgroup.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: f.subgroup.len(),
        });
    }
    let mut fid = Vec::with_capacity(1 << (2 * k));
    for w in PauliString::all(k) {
        if w.is_identity() {
            fid.push(1.0);
            continue;
        }
        let fit = f.get(&w).ok_or_else(|| Error::MissingProbe(w.to_string()))?;
        fid.push(fit.f);
    }
    let eps = fidelities_to_probabilities(&fid, k)?;
    normalize_into(f.subgroup.clone(), eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_chain_hamiltonian, ChainParams};
    use crate::trotter::{build_trotter_layer, TrotterPlan};

    fn chain_layer() -> TrotterCircuit {
        let h = build_chain_hamiltonian(&ChainParams::linear(2, 122.0, 0.5, 0.5)).unwrap();
        build_trotter_layer(&h, &TrotterPlan::new(1, 0.01, 1).unwrap()).unwrap()
    }

    fn estimate_from(ch: &PauliChannel) -> FidelityEstimate {
        FidelityEstimate {
            subgroup: ch.subgroup().to_vec(),
            probes: ch
                .words()
                .skip(1)
                .map(|a| ProbeFit {
                    probe: a,
                    f: ch.fidelity(&a).unwrap(),
                    amplitude: 1.0,
                    stderr: 0.0,
                    residual: 0.0,
                    nonpositive: false,
                    decay: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn identity_variant_keeps_skeleton() {
        let layer = chain_layer();
        let v = make_clifford_identity_variant(&layer).unwrap();
        assert_eq!(v.cnot_count(), 4);
        assert_eq!(v.gates.len(), layer.gates.len());
        assert!(v.unitary().unitary_distance(&CMatrix::identity(4)) < 1e-12);
        assert_eq!(make_clifford_identity_variant(&v).unwrap(), v);
        let u = v.unitary();
        assert!(u.mul(&u).unitary_distance(&CMatrix::identity(4)) < 1e-12);
    }

    #[test]
    fn identity_variant_rejects_other_rotations() {
        let c = TrotterCircuit::from_gates(1, vec![GateOp::Rx { qubit: 0, theta: 0.1 }], 0.1, 1).unwrap();
        assert_eq!(make_clifford_identity_variant(&c), Err(Error::NonZRotation(0)));
    }

    #[test]
    fn fidelity_examples() {
        let id = PauliChannel::identity(vec![0]).unwrap();
        for a in id.words() {
            assert_eq!(pauli_fidelity(&id, &a).unwrap(), 1.0);
        }
        let depol = PauliChannel::from_labels(vec![0], &[("X", 0.01), ("Y", 0.01), ("Z", 0.01)]).unwrap();
        let f = pauli_fidelity(&depol, &"X".parse().unwrap()).unwrap();
        assert!((f - 0.96).abs() < 1e-15);
    }

    #[test]
    fn reconstruct_examples() {
        let noiseless = PauliChannel::identity(vec![0]).unwrap();
        let ch = reconstruct_error_probabilities(&estimate_from(&noiseless), 1).unwrap();
        assert_eq!(ch.probs(), &[1.0, 0.0, 0.0, 0.0]);
        let f = vec![1.0, 0.9, 0.9, 1.0];
        let eps = fidelities_to_probabilities(&f, 1).unwrap();
        let expected = [0.95, 0.0, 0.0, 0.05];
        for (a, b) in eps.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_probe_is_reported() {
        let ch = PauliChannel::from_labels(vec![0], &[("Z", 0.05)]).unwrap();
        let mut est = estimate_from(&ch);
        est.probes.pop();
        assert!(matches!(
            reconstruct_error_probabilities(&est, 1),
            Err(Error::MissingProbe(_))
        ));
    }

    #[test]
    fn exact_benchmark_recovers_z_flip() {
        let h = crate::hamiltonian::Hamiltonian::new(1, vec![(0.3, "Z".parse().unwrap())]).unwrap();
        let layer = build_trotter_layer(&h, &TrotterPlan::new(1, 0.1, 1).unwrap()).unwrap();
        let v = make_clifford_identity_variant(&layer).unwrap();
        let ch = PauliChannel::from_labels(vec![0], &[("Z", 0.05)]).unwrap();
        let model = DeviceModel::with_channels(1, vec![ch]).unwrap();
        let est = run_cycle_benchmark(&model, &v, &CBConfig::new(vec![0])).unwrap();
        let fx = est.get(&"X".parse().unwrap()).unwrap();
        assert!((fx.f - 0.9).abs() < 1e-6);
        assert!((fx.amplitude - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noiseless_benchmark_gives_unit_fidelity() {
        let v = make_clifford_identity_variant(&chain_layer()).unwrap();
        let model = DeviceModel::noiseless(2);
        let mut cfg = CBConfig::new(vec![0, 1]);
        cfg.shots = Some(10_000);
        cfg.seed = 5;
        let est = run_cycle_benchmark(&model, &v, &cfg).unwrap();
        for p in &est.probes {
            assert!((p.f - 1.0).abs() <= 3.0 * p.stderr.max(1e-4), "{:?}", p);
        }
    }

    #[test]
    fn benchmark_requires_identity_layer() {
        let model = DeviceModel::noiseless(2);
        assert!(run_cycle_benchmark(&model, &chain_layer(), &CBConfig::new(vec![0, 1])).is_err());
        let mut cfg = CBConfig::new(vec![0, 1]);
        cfg.depths = vec![4, 2];
        let v = make_clifford_identity_variant(&chain_layer()).unwrap();
        assert!(run_cycle_benchmark(&model, &v, &cfg).is_err());
    }

    #[test]
    fn nonpositive_points_are_flagged() {
        let decay = vec![
            DecayPoint { depth: 2, value: 0.5, stderr: 0.0 },
            DecayPoint { depth: 4, value: -0.01, stderr: 0.0 },
            DecayPoint { depth: 8, value: 0.1, stderr: 0.0 },
        ];
        let fit = fit_decay("X".parse().unwrap(), decay);
        assert!(fit.nonpositive);
        assert!(fit.f > 0.0 && fit.f < 1.0);
    }
}
