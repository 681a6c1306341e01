//! Mode pipelines. Every artifact is computed first and written afterwards by a
//! single writer.

use std::path::{Path, PathBuf};

use noise_forge::channels::{channel_to_dissipator, LayerChannel, PauliChannel};
use noise_forge::characterization::{make_clifford_identity_variant, reconstruct_error_probabilities, run_cycle_benchmark, CBConfig};
use noise_forge::emulator::{apply_readout_error, execute, DeviceModel, Mode as RunMode};
use noise_forge::gate::GateOp;
use noise_forge::hamiltonian::{build_chain_hamiltonian, build_tfim_hamiltonian, ChainParams, Hamiltonian};
use noise_forge::lindblad::{eta_from_populations, rk4_propagate, LindbladRun};
use noise_forge::linalg::DensityMatrix;
use noise_forge::pec::{
    default_samples, effective_channels, mitigated_weight, plan_decoherence_control, run_mitigated, uniform_bond_channels,
    uniform_factors, CostRow, MitigationConfig, MitigationPlan, PlanOptions,
};
use noise_forge::trotter::{build_trotter_layer, TrotterCircuit, TrotterPlan};

use crate::config::{word_label, DeviceSpec, ExperimentConfig, HamiltonianSpec, Mode, PecSource, PecSpec};
use crate::output::{self, Line, SeriesRow};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Named file contents produced by one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Write every artifact into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::output(&dir.display().to_string(), e))?;
        let mut out = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let p = dir.join(name);
            output::write_file(&p, contents)?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Run the configured mode and collect its artifacts; SVG plots only when `svg`.
pub fn run_pipeline(cfg: &ExperimentConfig, svg: bool) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    match cfg.mode {
        Mode::Characterize => characterize(cfg, svg, &mut art)?,
        Mode::Plan => plan(cfg, &mut art)?,
        Mode::Simulate => simulate(cfg, svg, &mut art)?,
        Mode::Mitigate => mitigate(cfg, svg, &mut art)?,
        Mode::Cost => cost(cfg, svg, &mut art)?,
    }
    Ok(art)
}

pub fn build_hamiltonian(spec: &HamiltonianSpec) -> Result<Hamiltonian> {
    Ok(match spec {
        HamiltonianSpec::Chain {
            site_energies,
            couplings,
        } => build_chain_hamiltonian(&ChainParams {
            site_energies: site_energies.clone(),
            couplings: couplings.clone(),
        })?,
        HamiltonianSpec::Tfim { n, j, h } => build_tfim_hamiltonian(*n, *j, *h)?,
    })
}

fn hamiltonian(cfg: &ExperimentConfig) -> Result<Hamiltonian> {
    build_hamiltonian(cfg.hamiltonian.as_ref().ok_or_else(|| missing("chain", "Hamiltonian block"))?)
}

fn device(cfg: &ExperimentConfig) -> Result<&DeviceSpec> {
    cfg.device.as_ref().ok_or_else(|| missing("device", "device block"))
}

fn pec(cfg: &ExperimentConfig) -> Result<&PecSpec> {
    cfg.pec.as_ref().ok_or_else(|| missing("pec", "pec block"))
}

fn missing(path: &str, what: &str) -> CliError {
    CliError::Config(vec![crate::config::Violation {
        path: path.into(),
        message: format!("{what} required"),
    }])
}

/// Reset probability per layer realizing damping `rate`, compensating reset failure.
pub fn reset_probability(rate: f64, dt: f64, p_er: f64) -> f64 {
    rate * dt / (1.0 - p_er)
}

/// One Trotter layer with the device's reset slots appended.
pub fn layer_circuit(h: &Hamiltonian, order: usize, dt: f64, dev: &DeviceSpec) -> Result<TrotterCircuit> {
    let c = build_trotter_layer(h, &TrotterPlan::new(order, dt, 1)?)?;
    if dev.resets.is_empty() {
        return Ok(c);
    }
    let resets = dev
        .resets
        .iter()
        .map(|r| GateOp::Reset {
            qubit: r.qubit,
            w: reset_probability(r.rate, dt, dev.model.p_er),
        })
        .collect();
    Ok(c.with_resets(resets)?)
}

fn layers_for(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

fn total_time(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.run.t.ok_or_else(|| missing("run.t", "total time"))
}

fn layer_dt(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.trotter.dt.ok_or_else(|| missing("trotter.dt", "Trotter step"))
}

/// Channels a plan acts on: intrinsic noise with any reset dephasing folded in.
fn plan_channels(cfg: &ExperimentConfig, dev: &DeviceSpec, dt: f64) -> Result<Vec<PauliChannel>> {
    if dev.resets.is_empty() {
        return Ok(dev.model.channels.clone());
    }
    let h = hamiltonian(cfg)?;
    let c = layer_circuit(&h, cfg.trotter.order, dt, dev)?;
    Ok(effective_channels(&dev.model, &c)?)
}

/// Mitigation plan from factors, targets or a plan file.
pub fn build_plan(cfg: &ExperimentConfig) -> Result<MitigationPlan> {
    let dev = device(cfg)?;
    let spec = pec(cfg)?;
    match &spec.source {
        PecSource::PlanFile(_, plan) => Ok((**plan).clone()),
        PecSource::Factors(map) => {
            let dt = layer_dt(cfg)?;
            let channels = plan_channels(cfg, dev, dt)?;
            let factors: Vec<Vec<f64>> = channels.iter().map(|ch| map.expand(ch, 0.0)).collect();
            Ok(MitigationPlan::from_factors(
                &channels,
                &factors,
                dt,
                layers_for(total_time(cfg)?, dt),
                spec.kind,
            )?)
        }
        PecSource::Targets(map) => {
            let t = total_time(cfg)?;
            let channels = match cfg.trotter.dt {
                Some(dt) => plan_channels(cfg, dev, dt)?,
                None => dev.model.channels.clone(),
            };
            let targets: Vec<Vec<f64>> = channels.iter().map(|ch| map.expand(ch, 0.0)).collect();
            let opts = PlanOptions {
                dt: cfg.trotter.dt,
                dt_cap: None,
                kind: spec.kind,
            };
            Ok(plan_decoherence_control(&channels, &targets, t, &opts)?)
        }
    }
}

fn initial_state(cfg: &ExperimentConfig, n: usize) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_bits(&cfg.initial_bits(n))?)
}

fn observed(cfg: &ExperimentConfig, n: usize) -> Vec<usize> {
    cfg.run.observe.clone().unwrap_or_else(|| (0..n).collect())
}

/// Marginal of a full-register population vector on `keep` (qubit 0 leads).
pub fn marginal(p: &[f64], n: usize, keep: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << keep.len()];
    for (i, &x) in p.iter().enumerate() {
        out[reduced_index(i, n, keep)] += x;
    }
    out
}

fn reduced_index(i: usize, n: usize, keep: &[usize]) -> usize {
    keep.iter().fold(0, |j, &q| (j << 1) | ((i >> (n - 1 - q)) & 1))
}

fn population_label(j: usize, width: usize, keep: &[usize], n: usize) -> String {
    let bits: String = (0..width).map(|b| if (j >> (width - 1 - b)) & 1 == 1 { '1' } else { '0' }).collect();
    if keep.len() == n && keep.iter().enumerate().all(|(a, &b)| a == b) {
        format!("P({bits})")
    } else {
        let qs: Vec<String> = keep.iter().map(|q| q.to_string()).collect();
        format!("P({bits})@{}", qs.join(","))
    }
}

/// Observed populations per time point with their standard errors.
struct Observed {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    stderr: Vec<Vec<f64>>,
}

fn series_rows(obs: &Observed, eta: Option<&[f64]>, keep: &[usize], n: usize) -> Vec<SeriesRow> {
    let mut rows = Vec::new();
    for (d, &t) in obs.times.iter().enumerate() {
        for (j, &v) in obs.values[d].iter().enumerate() {
            rows.push(SeriesRow {
                time: t,
                label: population_label(j, keep.len(), keep, n),
                value: v,
                stderr: obs.stderr[d][j],
                eta: eta.map(|e| e[d]),
            });
        }
    }
    rows
}

fn reference_series(
    cfg: &ExperimentConfig,
    spec: noise_forge::channels::LindbladSpec,
    rho0: &DensityMatrix,
    dt: f64,
    layers: usize,
    keep: &[usize],
) -> Result<Observed> {
    let substeps = (dt / cfg.rk4_dt(dt)).ceil().max(1.0) as usize;
    let ts = rk4_propagate(&LindbladRun::with_substeps(spec, rho0.clone(), dt, layers, substeps))?;
    let n = rho0.num_qubits();
    let values: Vec<Vec<f64>> = ts.states.iter().map(|s| marginal(&s.populations(), n, keep)).collect();
    let stderr = values.iter().map(|v| vec![0.0; v.len()]).collect();
    Ok(Observed {
        times: ts.times.clone(),
        values,
        stderr,
    })
}

fn eta_series(a: &Observed, b: &Observed) -> Result<Vec<f64>> {
    if a.values.len() != b.values.len() {
        return Err(noise_forge::Error::GridMismatch(a.values.len(), b.values.len()).into());
    }
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| Ok(eta_from_populations(x, y)?))
        .collect()
}

fn series_chart(title: &str, obs: &Observed, reference: Option<&Observed>, keep: &[usize], n: usize) -> String {
    let mut lines = Vec::new();
    let width = keep.len();
    for j in 0..(1usize << width) {
        let label = population_label(j, width, keep, n);
        lines.push(Line {
            label: label.clone(),
            points: obs.times.iter().zip(&obs.values).map(|(&t, v)| (t, v[j])).collect(),
            dashed: false,
        });
        if let Some(r) = reference {
            lines.push(Line {
                label: format!("{label} ref"),
                points: r.times.iter().zip(&r.values).map(|(&t, v)| (t, v[j])).collect(),
                dashed: true,
            });
        }
    }
    output::line_chart(title, "time", "population", &lines)
}

fn emit_series(
    cfg: &ExperimentConfig,
    svg: bool,
    art: &mut Artifacts,
    title: &str,
    obs: &Observed,
    reference: Option<&Observed>,
    keep: &[usize],
    n: usize,
) -> Result<()> {
    let eta = reference.map(|r| eta_series(obs, r)).transpose()?;
    let rows = series_rows(obs, eta.as_deref(), keep, n);
    art.add("timeseries.csv", output::series_csv(&cfg.hash, cfg.seed(), &rows)?);
    if let Some(r) = reference {
        let rows = series_rows(r, None, keep, n);
        art.add("reference.csv", output::series_csv(&cfg.hash, cfg.seed(), &rows)?);
    }
    if svg {
        art.add("timeseries.svg", series_chart(title, obs, reference, keep, n));
    }
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, svg: bool, art: &mut Artifacts) -> Result<()> {
    let h = hamiltonian(cfg)?;
    let dev = device(cfg)?;
    let n = h.num_qubits();
    let dt = layer_dt(cfg)?;
    let layers = layers_for(total_time(cfg)?, dt);
    let circuit = layer_circuit(&h, cfg.trotter.order, dt, dev)?;
    let model = DeviceModel {
        seed: cfg.seed(),
        ..dev.model.clone()
    };
    let rho0 = initial_state(cfg, n)?;
    let keep = observed(cfg, n);
    let mode = match cfg.run.shots {
        Some(shots) => RunMode::Sampled { shots },
        None => RunMode::Exact,
    };
    let res = execute(&circuit, layers, &model, mode, None, &rho0)?;
    let times: Vec<f64> = (0..=layers).map(|d| d as f64 * dt).collect();
    let obs = match (&res.counts, cfg.run.shots) {
        (Some(counts), Some(shots)) => {
            let values: Vec<Vec<f64>> = counts
                .iter()
                .map(|c| {
                    let p: Vec<f64> = c.iter().map(|&k| k as f64 / shots as f64).collect();
                    marginal(&p, n, &keep)
                })
                .collect();
            let stderr = values
                .iter()
                .map(|v| v.iter().map(|&p| (p * (1.0 - p) / shots as f64).sqrt()).collect())
                .collect();
            Observed { times, values, stderr }
        }
        _ => {
            let values: Vec<Vec<f64>> = res
                .states
                .iter()
                .map(|s| marginal(&apply_readout_error(&s.populations(), n, model.readout_error), n, &keep))
                .collect();
            let stderr = values.iter().map(|v| vec![0.0; v.len()]).collect();
            Observed { times, values, stderr }
        }
    };
    let reference = if cfg.run.reference {
        let mut channels = model.layer_channels();
        for r in &dev.resets {
            channels.push(LayerChannel::Reset {
                qubit: r.qubit,
                w: reset_probability(r.rate, dt, model.p_er),
                p_er: model.p_er,
            });
        }
        let spec = channel_to_dissipator(&h, &channels, dt)?;
        Some(reference_series(cfg, spec, &rho0, dt, layers, &keep)?)
    } else {
        None
    };
    emit_series(cfg, svg, art, "device populations", &obs, reference.as_ref(), &keep, n)
}

fn mitigate(cfg: &ExperimentConfig, svg: bool, art: &mut Artifacts) -> Result<()> {
    let h = hamiltonian(cfg)?;
    let dev = device(cfg)?;
    let n = h.num_qubits();
    let plan = build_plan(cfg)?;
    let dt = plan.dt;
    let circuit = layer_circuit(&h, cfg.trotter.order, dt, dev)?;
    let rho0 = initial_state(cfg, n)?;
    let keep = observed(cfg, n);
    let samples = pec(cfg)?.samples.unwrap_or_else(|| plan.default_samples());
    let mc = MitigationConfig {
        samples,
        shots: cfg.run.shots,
        seed: cfg.seed(),
    };
    let series = run_mitigated(&circuit, &dev.model, &plan, &rho0, &mc)?;
    // Marginal errors are summed, an upper bound on the stderr of the marginal.
    let values: Vec<Vec<f64>> = series.populations.iter().map(|p| marginal(p, n, &keep)).collect();
    let stderr: Vec<Vec<f64>> = series.stderr.iter().map(|s| marginal(s, n, &keep)).collect();
    let obs = Observed {
        times: series.times.clone(),
        values,
        stderr,
    };
    let reference = if cfg.run.reference {
        let reduced: Vec<LayerChannel> = plan.reduced_channels()?.into_iter().map(LayerChannel::Pauli).collect();
        let mut spec = channel_to_dissipator(&h, &reduced, dt)?;
        for r in &dev.resets {
            spec.add_damping(r.qubit, reset_probability(r.rate, dt, dev.model.p_er) * (1.0 - dev.model.p_er) / dt);
        }
        Some(reference_series(cfg, spec, &rho0, dt, plan.layers, &keep)?)
    } else {
        None
    };
    emit_series(cfg, svg, art, "mitigated populations", &obs, reference.as_ref(), &keep, n)?;
    art.add("plan.json", plan_json(&plan)?);
    Ok(())
}

pub fn plan_json(plan: &MitigationPlan) -> Result<String> {
    serde_json::to_string_pretty(plan)
        .map(|s| s + "\n")
        .map_err(|e| CliError::output("plan.json", e))
}

fn plan(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let plan = build_plan(cfg)?;
    let mut rows = Vec::new();
    for s in &plan.channels {
        for k in 1..s.channel.probs().len() {
            rows.push(vec![
                word_label(&s.channel, k),
                output::num(s.channel.probs()[k]),
                output::num(s.r[k]),
                output::num(s.targets[k]),
                output::num(s.realized[k]),
                output::num(s.quasi.q[k]),
            ]);
        }
    }
    let header = ["channel", "epsilon", "r", "target_rate", "realized_rate", "q"];
    art.add("plan.csv", output::csv_text(&cfg.hash, cfg.seed(), &header, &rows)?);
    art.add("plan.json", plan_json(&plan)?);
    Ok(())
}

fn characterize(cfg: &ExperimentConfig, svg: bool, art: &mut Artifacts) -> Result<()> {
    let h = hamiltonian(cfg)?;
    let dev = device(cfg)?;
    let dt = layer_dt(cfg)?;
    let layer = build_trotter_layer(&h, &TrotterPlan::new(cfg.trotter.order, dt, 1)?)?;
    let v = make_clifford_identity_variant(&layer)?;
    let subgroups = cfg.characterize.subgroups.clone().unwrap_or_else(|| dev.model.subgroups());
    let mut channels = Vec::with_capacity(subgroups.len());
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (i, sg) in subgroups.iter().enumerate() {
        let mut cb = CBConfig::new(sg.clone());
        cb.depths = cfg.characterize.depths.clone();
        cb.shots = cfg.run.shots;
        cb.twirls = cfg.characterize.twirls;
        cb.seed = cfg.seed().wrapping_add(i as u64);
        let est = run_cycle_benchmark(&dev.model, &v, &cb)?;
        channels.push(reconstruct_error_probabilities(&est, sg.len())?);
        let group: Vec<String> = sg.iter().map(|q| q.to_string()).collect();
        let group = group.join(",");
        for fit in &est.probes {
            for p in &fit.decay {
                rows.push(vec![
                    group.clone(),
                    fit.probe.to_string(),
                    p.depth.to_string(),
                    output::num(p.value),
                    output::num(p.stderr),
                    output::num(fit.f),
                ]);
            }
            lines.push(Line {
                label: format!("{}@{group}", fit.probe),
                points: fit.decay.iter().map(|p| (p.depth as f64, p.value)).collect(),
                dashed: false,
            });
        }
    }
    let estimated = DeviceModel {
        channels,
        kick: 0.0,
        ..dev.model.clone()
    };
    let header = ["subgroup", "probe", "depth", "value", "stderr", "fidelity"];
    art.add("decay.csv", output::csv_text(&cfg.hash, cfg.seed(), &header, &rows)?);
    let json = serde_json::to_string_pretty(&estimated).map_err(|e| CliError::output("channels.json", e))?;
    art.add("channels.json", json + "\n");
    if svg {
        art.add("decay.svg", output::line_chart("cycle benchmark decays", "depth", "expectation", &lines));
    }
    Ok(())
}

/// Cost table over `n`, `r` and depth for uniform bond channels.
pub fn cost_rows(cfg: &ExperimentConfig) -> Result<Vec<CostRow>> {
    let c = &cfg.cost;
    let kind = cfg.pec.as_ref().map(|p| p.kind).unwrap_or_default();
    let mut rows = Vec::new();
    for &n in &c.n {
        let channels = uniform_bond_channels(n, c.eps_single, c.eps_pair)?;
        for &r in &c.r {
            let factors: Vec<Vec<f64>> = channels.iter().map(|ch| uniform_factors(ch.width(), r)).collect();
            let eps_r = channels.iter().zip(&factors).map(|(ch, f)| mitigated_weight(ch, f)).sum::<f64>() / channels.len() as f64;
            for &d in &c.depths {
                let plan = MitigationPlan::from_factors(&channels, &factors, 1.0, d, kind)?;
                let c_tot = plan.c_tot();
                rows.push(CostRow {
                    n,
                    d,
                    r,
                    eps_r,
                    c_iter: plan.c_iter(),
                    c_tot,
                    m_required: default_samples(c_tot),
                });
            }
        }
    }
    Ok(rows)
}

fn cost(cfg: &ExperimentConfig, svg: bool, art: &mut Artifacts) -> Result<()> {
    let rows = cost_rows(cfg)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.d.to_string(),
                output::num(r.r),
                output::num(r.eps_r),
                output::num(r.c_iter),
                output::num(r.c_tot),
                r.m_required.to_string(),
            ]
        })
        .collect();
    art.add("cost.csv", output::csv_text(&cfg.hash, cfg.seed(), &output::COST_HEADER, &table)?);
    if svg {
        let mut lines: Vec<Line> = Vec::new();
        for r in &rows {
            let label = format!("n={} r={}", r.n, r.r);
            match lines.iter_mut().find(|l| l.label == label) {
                Some(l) => l.points.push((r.d as f64, r.c_tot.ln())),
                None => lines.push(Line {
                    label,
                    points: vec![(r.d as f64, r.c_tot.ln())],
                    dashed: false,
                }),
            }
        }
        art.add("cost.svg", output::line_chart("total mitigation cost", "layers D", "ln C_tot", &lines));
    }
    Ok(())
}
