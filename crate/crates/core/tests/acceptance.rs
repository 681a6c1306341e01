//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! summarizes. Run a subset with `cargo test --test acceptance -- AC2 AC7`.
//! Failures only set the exit status when `NOISE_FORGE_STRICT_ACCEPTANCE=1`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use noise_forge::channels::{channel_to_dissipator, LayerChannel, LindbladSpec, PauliChannel};
use noise_forge::characterization::{make_clifford_identity_variant, reconstruct_error_probabilities, run_cycle_benchmark, CBConfig};
use noise_forge::emulator::{execute, owning_pair, standard_tiling, stream_rng, DeviceModel, LayerPropagator, Mode};
use noise_forge::gate::GateOp;
use noise_forge::hamiltonian::{build_chain_hamiltonian, build_tfim_hamiltonian, ChainParams, Hamiltonian};
use noise_forge::lindblad::{eta_metric, rk4_propagate, trotterized_lindblad, LindbladRun, TimeSeries};
use noise_forge::linalg::{DensityMatrix, C64};
use noise_forge::pauli::{Pauli, PauliString};
use noise_forge::pec::{
    build_exact_quasiprobability, build_quasiprobability, effective_channels, enumerate_mitigated_states,
    fit_cost_scaling, mitigated_weight, plan_decoherence_control, run_mitigated, total_cost, uniform_bond_channels,
    uniform_factors, CostSeries, MitigationConfig, MitigationPlan, PlanOptions, QuasiKind, ScalingVariable,
};
use noise_forge::trotter::{build_trotter_layer, TrotterCircuit, TrotterPlan};

// Pinned tolerances and budgets.
const AC1_ORACLE_TOL: f64 = 1e-9;
const AC1_ETA_MAX: f64 = 0.02;
const AC1_BUDGET: Duration = Duration::from_secs(60);
const AC2_ETA_MAX: f64 = 0.03;
const AC2_BUDGET: Duration = Duration::from_secs(600);
const AC3_REPS: usize = 20;
const AC3_SAMPLES: usize = 50;
const AC3_RATIO_FACTOR: f64 = 2.0;
const AC4_EXACT_TOL: f64 = 1e-6;
const AC4_REL_TOL: f64 = 0.15;
const AC4_ABS_TOL: f64 = 1e-3;
const AC4_MIN_FRACTION: f64 = 0.95;
const AC4_SHOTS: u64 = 100_000;
const AC5_IDENTITY_TOL: f64 = 1e-10;
const AC5_LINEAR_TOL: f64 = 0.05;
const AC6_ETA_MAX: f64 = 0.03;
const AC7_ETA_MAX: f64 = 0.04;
const AC7_BUDGET: Duration = Duration::from_secs(1200);
const AC8_TOL: f64 = 1e-10;

// Chain of the two-qubit experiments: E_m = 122 - 0.5 m, J = 0.5, start in |1,0⟩.
const E0: f64 = 122.0;
const SLOPE: f64 = 0.5;
const J: f64 = 0.5;

/// Largest RK4 step used for reference runs (the chain has |H| ≈ 120 per qubit).
const RK4_MAX_DT: f64 = 0.0025;

struct Outcome {
    pass: bool,
    detail: String,
}

fn chain(n: usize) -> Hamiltonian {
    build_chain_hamiltonian(&ChainParams::linear(n, E0, SLOPE, J)).expect("chain")
}

fn layer(h: &Hamiltonian, order: usize, dt: f64) -> TrotterCircuit {
    build_trotter_layer(h, &TrotterPlan::new(order, dt, 1).expect("plan")).expect("layer")
}

fn excited_first(n: usize) -> DensityMatrix {
    let bits: String = (0..n).map(|m| if m == 0 { '1' } else { '0' }).collect();
    DensityMatrix::from_bits(&bits).expect("bits")
}

/// Channel on `subgroup` with each listed word drawn uniformly in `[lo, hi)`.
fn random_channel<R: Rng>(subgroup: Vec<usize>, words: &[PauliString], lo: f64, hi: f64, rng: &mut R) -> PauliChannel {
    let errors: Vec<(PauliString, f64)> = words.iter().map(|w| (*w, rng.random_range(lo..hi))).collect();
    PauliChannel::from_errors(subgroup, &errors).expect("channel")
}

fn all_words(k: usize) -> Vec<PauliString> {
    PauliString::all(k).skip(1).collect()
}

/// Random K=2 channels on the standard tiling, single-qubit words only on owned qubits.
fn random_tiling<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<PauliChannel> {
    standard_tiling(n)
        .into_iter()
        .map(|bond| {
            let words: Vec<PauliString> = all_words(2)
                .into_iter()
                .filter(|w| {
                    let s = w.support();
                    s.len() == 2 || owning_pair(n, bond[s[0]]).as_deref() == Some(bond.as_slice())
                })
                .collect();
            random_channel(bond, &words, lo, hi, rng)
        })
        .collect()
}

fn reference(spec: LindbladSpec, rho0: &DensityMatrix, dt: f64, layers: usize) -> TimeSeries {
    let substeps = (dt / RK4_MAX_DT).ceil() as usize;
    rk4_propagate(&LindbladRun::with_substeps(spec, rho0.clone(), dt, layers, substeps)).expect("rk4")
}

fn pauli_layer(channels: &[PauliChannel]) -> Vec<LayerChannel> {
    channels.iter().cloned().map(LayerChannel::Pauli).collect()
}

fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let (dt, layers, shots, seed) = (0.1, 100, 10_000, 1000);
    let h = chain(2);
    let c = layer(&h, 1, dt);
    let mut rng = stream_rng(seed, 1);
    let ch = random_channel(vec![0, 1], &all_words(2), 1e-3, 2e-2, &mut rng);
    let mut model = DeviceModel::with_channels(2, vec![ch]).expect("model");
    model.seed = seed;
    let rho0 = excited_first(2);
    let exact = execute(&c, layers, &model, Mode::Exact, None, &rho0).expect("exact");
    let twin = trotterized_lindblad(&c.unitary(), &model.layer_channels(), &rho0, layers, dt).expect("twin");
    let oracle = exact
        .states
        .iter()
        .zip(&twin.states)
        .map(|(a, b)| a.matrix().max_abs_diff(b.matrix()))
        .fold(0.0, f64::max);
    let sampled = execute(&c, layers, &model, Mode::Sampled { shots }, None, &rho0).expect("sampled");
    let pops: Vec<Vec<f64>> = sampled
        .counts
        .expect("counts")
        .iter()
        .map(|cs| cs.iter().map(|&x| x as f64 / shots as f64).collect())
        .collect();
    let spec = channel_to_dissipator(&h, &model.layer_channels(), dt).expect("dissipator");
    let rk = reference(spec, &rho0, dt, layers);
    let eta = max(&eta_metric(&pops, &rk.populations()).expect("eta"));
    let systematic = max(&eta_metric(&exact.states.iter().map(|s| s.populations()).collect::<Vec<_>>(), &rk.populations()).expect("eta"));
    let elapsed = start.elapsed();
    Outcome {
        pass: oracle <= AC1_ORACLE_TOL && eta <= AC1_ETA_MAX && elapsed <= AC1_BUDGET,
        detail: format!(
            "oracle gap {oracle:.2e} (<= {AC1_ORACLE_TOL:.0e}); sampled max eta {eta:.4} (<= {AC1_ETA_MAX}); exact-mode eta {systematic:.4}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    }
}

/// Intrinsic noise of the mitigation experiments.
fn weak_channel(seed: u64) -> PauliChannel {
    let mut rng = stream_rng(seed, 1);
    random_channel(vec![0, 1], &all_words(2), 1e-3, 6e-3, &mut rng)
}

fn ac2() -> Outcome {
    let (dt, layers, seed) = (0.25, 20, 2000);
    let h = chain(2);
    let c = layer(&h, 1, dt);
    let ch = weak_channel(seed);
    let model = DeviceModel::with_channels(2, vec![ch.clone()]).expect("model");
    let rho0 = excited_first(2);
    let mut pass = true;
    let mut parts = Vec::new();
    for r in [0.1, 0.8] {
        let start = Instant::now();
        let plan = MitigationPlan::from_factors(&[ch.clone()], &[uniform_factors(2, r)], dt, layers, QuasiKind::FirstOrder)
            .expect("plan");
        let samples = plan.default_samples();
        let cfg = MitigationConfig {
            samples,
            shots: None,
            seed: seed + 1,
        };
        let out = run_mitigated(&c, &model, &plan, &rho0, &cfg).expect("mitigated");
        let spec = channel_to_dissipator(&h, &pauli_layer(&plan.reduced_channels().expect("reduced")), dt).expect("spec");
        let rk = reference(spec, &rho0, dt, layers);
        let eta = max(&eta_metric(&out.populations, &rk.populations()).expect("eta"));
        let elapsed = start.elapsed();
        pass &= eta <= AC2_ETA_MAX && elapsed <= AC2_BUDGET;
        parts.push(format!(
            "r={r}: C_tot {:.3}, M {samples}, max eta {eta:.4}, {:.1}s",
            plan.c_tot(),
            elapsed.as_secs_f64()
        ));
    }
    Outcome {
        pass,
        detail: format!("{} (<= {AC2_ETA_MAX})", parts.join("; ")),
    }
}

fn ac3() -> Outcome {
    let (dt, layers, seed) = (0.25, 20, 3000);
    let h = chain(2);
    let c = layer(&h, 1, dt);
    let ch = weak_channel(2000);
    let model = DeviceModel::with_channels(2, vec![ch.clone()]).expect("model");
    let rho0 = excited_first(2);
    let mut stats = Vec::new();
    for (i, r) in [0.1, 0.8].into_iter().enumerate() {
        let plan = MitigationPlan::from_factors(&[ch.clone()], &[uniform_factors(2, r)], dt, layers, QuasiKind::FirstOrder)
            .expect("plan");
        let spec = channel_to_dissipator(&h, &pauli_layer(&plan.reduced_channels().expect("reduced")), dt).expect("spec");
        let rk = reference(spec, &rho0, dt, layers);
        let mut etas = Vec::with_capacity(AC3_REPS);
        let mut finals: Vec<Vec<f64>> = Vec::with_capacity(AC3_REPS);
        for rep in 0..AC3_REPS {
            let cfg = MitigationConfig {
                samples: AC3_SAMPLES,
                shots: Some(1),
                seed: seed + (100 * i + rep) as u64,
            };
            let out = run_mitigated(&c, &model, &plan, &rho0, &cfg).expect("mitigated");
            let eta = eta_metric(&out.populations, &rk.populations()).expect("eta");
            etas.push(eta.iter().sum::<f64>() / eta.len() as f64);
            finals.push(out.populations[layers].clone());
        }
        let (mean, std) = mean_std(&etas);
        let spread = (0..4)
            .map(|j| mean_std(&finals.iter().map(|f| f[j]).collect::<Vec<_>>()).1)
            .sum::<f64>()
            / 4.0;
        stats.push((mean, std, spread, plan.c_tot()));
    }
    let (lo, hi) = (stats[0], stats[1]);
    let ratio = hi.2 / lo.2;
    let cost_ratio = hi.3 / lo.3;
    let within = ratio <= AC3_RATIO_FACTOR * cost_ratio && ratio >= cost_ratio / AC3_RATIO_FACTOR;
    Outcome {
        pass: hi.0 > lo.0 && hi.1 > lo.1 && within,
        detail: format!(
            "eta mean {:.4} vs {:.4}, eta std {:.4} vs {:.4} (r=0.1 vs 0.8); stderr ratio {ratio:.2} vs C_tot ratio {cost_ratio:.2}",
            lo.0, hi.0, lo.1, hi.1
        ),
    }
}

fn ac4() -> Outcome {
    let seed = 4000;
    let h = chain(2);
    let v = make_clifford_identity_variant(&layer(&h, 1, 0.1)).expect("variant");
    let mut rng = stream_rng(seed, 1);
    let mut exact_err: f64 = 0.0;
    let (mut hits, mut total) = (0usize, 0usize);
    for i in 0..50 {
        let (subgroup, hi) = if i < 25 { (vec![0], 0.02) } else { (vec![0, 1], 0.006) };
        let k = subgroup.len();
        let ch = random_channel(subgroup.clone(), &all_words(k), 0.0, hi, &mut rng);
        let model = DeviceModel::with_channels(2, vec![ch.clone()]).expect("model");
        let mut cfg = CBConfig::new(subgroup);
        cfg.seed = seed + i as u64;
        let est = run_cycle_benchmark(&model, &v, &cfg).expect("exact benchmark");
        let rec = reconstruct_error_probabilities(&est, k).expect("reconstruct");
        for (a, b) in rec.probs().iter().zip(ch.probs()) {
            exact_err = exact_err.max((a - b).abs());
        }
        cfg.shots = Some(AC4_SHOTS);
        let est = run_cycle_benchmark(&model, &v, &cfg).expect("sampled benchmark");
        let rec = reconstruct_error_probabilities(&est, k).expect("reconstruct");
        for (a, b) in rec.probs().iter().zip(ch.probs()).skip(1) {
            total += 1;
            if (a - b).abs() <= (AC4_REL_TOL * b).max(AC4_ABS_TOL) {
                hits += 1;
            }
        }
    }
    let fraction = hits as f64 / total as f64;
    Outcome {
        pass: exact_err <= AC4_EXACT_TOL && fraction >= AC4_MIN_FRACTION,
        detail: format!(
            "exact max error {exact_err:.2e} (<= {AC4_EXACT_TOL:.0e}); sampled within tolerance {hits}/{total} = {:.3} (>= {AC4_MIN_FRACTION})",
            fraction
        ),
    }
}

fn ac5() -> Outcome {
    let mut rng = stream_rng(5000, 1);
    let base = random_channel(vec![0, 1], &all_words(2), 0.0, 0.006, &mut rng);
    let mut identity_err: f64 = 0.0;
    for n in 2..=6 {
        let channels: Vec<PauliChannel> = (0..n - 1)
            .map(|m| PauliChannel::new(vec![m, m + 1], base.probs().to_vec()).expect("copy"))
            .collect();
        for r in [0.25, 1.0] {
            let f = vec![uniform_factors(2, r); n - 1];
            let eps_r = mitigated_weight(&base, &f[0]);
            for d in [1, 10, 40] {
                let plan = MitigationPlan::from_factors(&channels, &f, 0.1, d, QuasiKind::FirstOrder).expect("plan");
                let c = total_cost(eps_r, n - 1, d);
                identity_err = identity_err.max((plan.c_tot() - c).abs() / c);
            }
        }
    }
    let depths = [5usize, 10, 20, 40];
    let eps1 = mitigated_weight(&base, &uniform_factors(2, 1.0));
    let by_n: Vec<CostSeries> = (2..=6)
        .map(|n| CostSeries {
            n,
            r: 1.0,
            eps_r: eps1,
            points: depths.iter().map(|&d| (d, total_cost(eps1, n - 1, d))).collect(),
        })
        .collect();
    let fit_n = fit_cost_scaling(&by_n, ScalingVariable::N).expect("fit n");
    let by_r: Vec<CostSeries> = [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&r| {
            let eps_r = mitigated_weight(&base, &uniform_factors(2, r));
            CostSeries {
                n: 4,
                r,
                eps_r,
                points: depths.iter().map(|&d| (d, total_cost(eps_r, 3, d))).collect(),
            }
        })
        .collect();
    let fit_r = fit_cost_scaling(&by_r, ScalingVariable::R).expect("fit r");
    Outcome {
        pass: identity_err <= AC5_IDENTITY_TOL
            && eps1 <= 0.05
            && fit_n.linear_residual < AC5_LINEAR_TOL
            && fit_r.linear_residual < AC5_LINEAR_TOL,
        detail: format!(
            "product vs closed form {identity_err:.1e}; eps_r {eps1:.4}; slope vs n: {:.4} n + {:.4} (residual {:.1e}); slope vs r: {:.4} r + {:.4} (residual {:.1e})",
            fit_n.coefficient, fit_n.offset, fit_n.linear_residual, fit_r.coefficient, fit_r.offset, fit_r.linear_residual
        ),
    }
}

fn ac6() -> Outcome {
    // Reset probability w = Γ·Δt is first order in Δt, so this run uses a finer step than AC2.
    let (dt, layers, seed, r) = (0.05, 40, 6000, 0.2);
    let h = chain(2);
    let ch = weak_channel(seed);
    let rho0 = excited_first(2);
    let mut pass = true;
    let mut parts = Vec::new();
    for gamma_ad in [J, 3.0 * J] {
        let model = DeviceModel::with_channels(2, vec![ch.clone()]).expect("model");
        let w = gamma_ad * dt / (1.0 - model.p_er);
        let c = layer(&h, 1, dt)
            .with_resets(vec![GateOp::Reset { qubit: 0, w }, GateOp::Reset { qubit: 1, w }])
            .expect("resets");
        let eff = effective_channels(&model, &c).expect("effective");
        // Keep (1-r) of the intrinsic noise on every word; the reset dephasing is removed entirely.
        let factors: Vec<f64> = eff[0]
            .probs()
            .iter()
            .zip(ch.probs())
            .enumerate()
            .map(|(k, (&e, &e0))| if k == 0 || e == 0.0 { 0.0 } else { (1.0 - (1.0 - r) * e0 / e).clamp(0.0, 1.0) })
            .collect();
        let plan = MitigationPlan::from_factors(&eff, &[factors], dt, layers, QuasiKind::FirstOrder).expect("plan");
        let samples = plan.default_samples();
        let cfg = MitigationConfig {
            samples,
            shots: None,
            seed: seed + 1,
        };
        let out = run_mitigated(&c, &model, &plan, &rho0, &cfg).expect("mitigated");
        let intrinsic = ch.reduced(&uniform_factors(2, r)).expect("reduced");
        let mut spec = channel_to_dissipator(&h, &[LayerChannel::Pauli(intrinsic)], dt).expect("spec");
        spec.add_damping(0, gamma_ad);
        spec.add_damping(1, gamma_ad);
        let rk = reference(spec, &rho0, dt, layers);
        let eta = max(&eta_metric(&out.populations, &rk.populations()).expect("eta"));
        pass &= eta <= AC6_ETA_MAX;
        parts.push(format!(
            "Gamma_ad={gamma_ad}: C_tot {:.2}, M {samples}, max eta {eta:.4}",
            plan.c_tot()
        ));
    }
    Outcome {
        pass,
        detail: format!("{} (<= {AC6_ETA_MAX})", parts.join("; ")),
    }
}

fn is_dephasing(w: &PauliString) -> bool {
    w.letters().iter().all(|l| matches!(l, Pauli::I | Pauli::Z))
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let (n, dt, layers, seed) = (4, 0.1, 50, 7000);
    let h = chain(n);
    let c = layer(&h, 1, dt);
    let mut rng = stream_rng(seed, 1);
    let channels = random_tiling(n, 1e-3, 4e-3, &mut rng);
    let model = DeviceModel::with_channels(n, channels.clone()).expect("model");
    let factors: Vec<Vec<f64>> = channels
        .iter()
        .map(|ch| {
            ch.words()
                .map(|w| if w.is_identity() { 0.0 } else if is_dephasing(&w) { 0.5 } else { 0.1 })
                .collect()
        })
        .collect();
    let plan = MitigationPlan::from_factors(&channels, &factors, dt, layers, QuasiKind::FirstOrder).expect("plan");
    let samples = plan.default_samples();
    let rho0 = excited_first(n);
    let cfg = MitigationConfig {
        samples,
        shots: None,
        seed: seed + 1,
    };
    let out = run_mitigated(&c, &model, &plan, &rho0, &cfg).expect("mitigated");
    let spec = channel_to_dissipator(&h, &pauli_layer(&plan.reduced_channels().expect("reduced")), dt).expect("spec");
    let rk = reference(spec, &rho0, dt, layers);
    let middle: Vec<Vec<f64>> = out.populations.iter().map(|p| marginal(p, n, &[1, 2])).collect();
    let eta = max(&eta_metric(&middle, &rk.reduced_populations(&[1, 2])).expect("eta"));
    let elapsed = start.elapsed();
    Outcome {
        pass: eta <= AC7_ETA_MAX && elapsed <= AC7_BUDGET,
        detail: format!(
            "C_tot {:.3}, M {samples}, middle-pair max eta {eta:.4} (<= {AC7_ETA_MAX}); {:.1}s",
            plan.c_tot(),
            elapsed.as_secs_f64()
        ),
    }
}

/// Marginal of a full-register population vector on `keep` (qubit 0 is the leading bit).
fn marginal(p: &[f64], n: usize, keep: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << keep.len()];
    for (i, &x) in p.iter().enumerate() {
        let mut j = 0;
        for &q in keep {
            j = (j << 1) | ((i >> (n - 1 - q)) & 1);
        }
        out[j] += x;
    }
    out
}

fn ac8() -> Outcome {
    let dt = 0.1;
    let h = chain(2);
    let c = layer(&h, 1, dt);
    let mut rng = stream_rng(8000, 1);
    let ch = random_channel(vec![0, 1], &all_words(2), 1e-3, 2e-2, &mut rng);
    let model = DeviceModel::with_channels(2, vec![ch.clone()]).expect("model");
    let rho0 = excited_first(2);
    let r = uniform_factors(2, 0.7);
    let reduced = DeviceModel::with_channels(2, vec![ch.reduced(&r).expect("reduced")]).expect("model");
    let prop = LayerPropagator::new(&c, &model).expect("propagator");
    let (mut exact_gap, mut first_gap, mut nominal_gap, mut bound): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let eps: f64 = ch.error_rate();
    let eps_r = mitigated_weight(&ch, &r);
    for layers in [1, 2] {
        let target = execute(&c, layers, &reduced, Mode::Exact, None, &rho0).expect("reduced run");
        let exact_plan = MitigationPlan::from_factors(&[ch.clone()], &[r.clone()], dt, layers, QuasiKind::ExactInverse).expect("plan");
        let first_plan = MitigationPlan::from_factors(&[ch.clone()], &[r.clone()], dt, layers, QuasiKind::FirstOrder).expect("plan");
        let ex = enumerate_mitigated_states(&c, &model, &exact_plan, &rho0).expect("enumerate");
        let fo = enumerate_mitigated_states(&c, &model, &first_plan, &rho0).expect("enumerate");
        // Independent route for the first-order quasi: apply the composed coefficient map directly.
        let q = build_quasiprobability(&ch, &r).expect("quasi");
        let coeffs = q.composed_after(&ch).expect("compose");
        let mut rho = rho0.clone();
        for d in 1..=layers {
            let u = rho.apply_unitary(prop.unitary()).expect("unitary");
            let mut acc = u.matrix().scale(C64::new(0.0, 0.0));
            for (k, w) in PauliString::all(2).enumerate() {
                let term = u.apply_pauli(&w).expect("pauli");
                acc.add_assign_scaled(term.matrix(), C64::new(coeffs[k], 0.0));
            }
            rho = DensityMatrix::from_matrix(acc).unwrap_or_else(|_| rho.clone());
            first_gap = first_gap.max(fo[d].matrix().max_abs_diff(rho.matrix()));
            exact_gap = exact_gap.max(ex[d].matrix().max_abs_diff(target.states[d].matrix()));
            nominal_gap = nominal_gap.max(fo[d].matrix().max_abs_diff(target.states[d].matrix()));
        }
        bound = bound.max(layers as f64 * 2.0 * eps * eps_r);
    }
    let exact_q = build_exact_quasiprobability(&ch, &r).expect("exact quasi");
    Outcome {
        pass: exact_gap <= AC8_TOL && first_gap <= AC8_TOL && nominal_gap <= bound,
        detail: format!(
            "exact-inverse quasi vs reduced channel {exact_gap:.1e}; first-order quasi vs its composed map {first_gap:.1e} (<= {AC8_TOL:.0e}); first-order vs reduced {nominal_gap:.2e} (second-order bound {bound:.2e}); C_mit {:.5} vs {:.5}",
            exact_q.c_mit(),
            1.0 + 2.0 * eps_r
        ),
    }
}

#[allow(clippy::approx_constant)]
fn ac9() -> Outcome {
    let (jz, hx, dt) = (0.5236, 1.0, 0.25);
    let (eps_single, eps_pair) = (0.07, 0.01);
    let scenarios = [(0.0, 0.0), (jz / 2.0, 0.0), (jz / 2.0, jz / 4.0)];
    let mut costs = vec![Vec::new(); 3];
    for n in 2..=10 {
        let h = build_tfim_hamiltonian(n, jz, hx).expect("tfim");
        for (s, &(gp, gad)) in scenarios.iter().enumerate() {
            let channels = uniform_bond_channels(n, eps_single, eps_pair).expect("channels");
            let model = DeviceModel::with_channels(n, channels).expect("model");
            let mut c = layer(&h, 1, dt);
            if gad > 0.0 {
                let w = gad * dt / (1.0 - model.p_er);
                c = c.with_resets((0..n).map(|q| GateOp::Reset { qubit: q, w }).collect()).expect("resets");
            }
            let eff = effective_channels(&model, &c).expect("effective");
            let targets: Vec<Vec<f64>> = eff
                .iter()
                .map(|ch| {
                    ch.words()
                        .map(|w| {
                            let support = w.support();
                            let owned = support.len() == 1
                                && owning_pair(n, ch.subgroup()[support[0]]).as_deref() == Some(ch.subgroup());
                            if owned {
                                gp
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            let opts = PlanOptions {
                dt: Some(dt),
                ..Default::default()
            };
            let plan = plan_decoherence_control(&eff, &targets, dt, &opts).expect("plan");
            costs[s].push(plan.c_iter());
        }
    }
    let monotone = costs.iter().all(|c| c.windows(2).all(|w| w[1] > w[0]));
    let ordered = (0..costs[0].len()).all(|i| costs[0][i] > costs[2][i] && costs[2][i] > costs[1][i]);
    let fmt = |c: &[f64]| format!("{:.3}..{:.3}", c[0], c[c.len() - 1]);
    Outcome {
        pass: monotone && ordered,
        detail: format!(
            "C_iter n=2..10: full {}, partial+damping {}, partial {}; monotone {monotone}, ordered {ordered}",
            fmt(&costs[0]),
            fmt(&costs[2]),
            fmt(&costs[1])
        ),
    }
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let checks: [(&str, fn() -> Outcome); 9] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
    ];
    let mut failed = 0;
    for (id, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| f == id) {
            continue;
        }
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{id} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {failed} failing");
    let strict = std::env::var("NOISE_FORGE_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
