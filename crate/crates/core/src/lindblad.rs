//! Classical references: RK4 integration of the Lindblad equation, the
//! Trotterized channel propagator and the population agreement metric.

use serde::{Deserialize, Serialize};

use crate::channels::{LayerChannel, LindbladSpec, PauliChannel};
use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, DensityMatrix, C64};
use crate::pauli::PauliString;

/// Trace drift that aborts an integration.
pub const MAX_TRACE_DRIFT: f64 = 1e-6;

/// Integrator steps per layer used for reference runs.
pub const DEFAULT_SUBSTEPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladRun {
    pub spec: LindbladSpec,
    pub initial: DensityMatrix,
    pub t: f64,
    pub dt: f64,
    /// Emit every `stride` integrator steps.
    pub stride: usize,
}

impl LindbladRun {
    /// Reference run on the layer grid `k·layer_dt`, `k = 0..=layers`, with `dt = layer_dt/20`.
    pub fn on_layer_grid(spec: LindbladSpec, initial: DensityMatrix, layer_dt: f64, layers: usize) -> Self {
        Self::with_substeps(spec, initial, layer_dt, layers, DEFAULT_SUBSTEPS)
    }

    /// Layer-grid run with `substeps` integrator steps per layer.
    pub fn with_substeps(
        spec: LindbladSpec,
        initial: DensityMatrix,
        layer_dt: f64,
        layers: usize,
        substeps: usize,
    ) -> Self {
        let substeps = substeps.max(1);
        Self {
            spec,
            initial,
            t: layer_dt * layers as f64,
            dt: layer_dt / substeps as f64,
            stride: substeps,
        }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(invalid("t", "must be finite and non-negative"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if self.stride == 0 {
            return Err(invalid("stride", "must be positive"));
        }
        let s = (self.t / self.dt).round();
        if (s * self.dt - self.t).abs() > 1e-9 * self.t.max(1.0) {
            return Err(invalid("dt", format!("t = {} is not a whole number of steps", self.t)));
        }
        Ok(s as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Smallest eigenvalue seen across emitted states (positivity monitor).
    pub min_eigenvalue: f64,
}

impl TimeSeries {
    fn new(times: Vec<f64>, states: Vec<DensityMatrix>) -> Self {
        let min_eigenvalue = states.iter().map(|s| s.min_eigenvalue()).fold(f64::INFINITY, f64::min);
        Self {
            times,
            states,
            min_eigenvalue,
        }
    }

    pub fn populations(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.populations()).collect()
    }

    pub fn reduced_populations(&self, keep: &[usize]) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.reduced_populations(keep)).collect()
    }
}

/// Classic fourth-order Runge–Kutta on `dρ/dt = L[ρ]`, Hermitian-symmetrized each step.
pub fn rk4_propagate(run: &LindbladRun) -> Result<TimeSeries> {
    run.spec.validate()?;
    let n = run.spec.num_qubits();
    if run.initial.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            actual: run.initial.dim(),
        });
    }
    let steps = run.steps()?;
    let h = run.spec.hamiltonian.matrix();
    let dt = run.dt;
    let half = C64::new(dt / 2.0, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    let trace0 = run.initial.trace().re;
    let mut rho = run.initial.clone();
    let mut times = vec![0.0];
    let mut states = vec![rho.clone()];
    for s in 1..=steps {
        let r = rho.matrix();
        let k1 = run.spec.apply_generator(&h, r);
        let k2 = run.spec.apply_generator(&h, &add_scaled(r, &k1, half));
        let k3 = run.spec.apply_generator(&h, &add_scaled(r, &k2, half));
        let k4 = run.spec.apply_generator(&h, &add_scaled(r, &k3, full));
        let mut incr = k1.add(&k4);
        incr.add_assign_scaled(&k2, two);
        incr.add_assign_scaled(&k3, two);
        let next = add_scaled(r, &incr, sixth);
        rho = DensityMatrix::from_matrix_unchecked(n, next);
        rho.symmetrize();
        let drift = (rho.trace().re - trace0).abs();
        if drift > MAX_TRACE_DRIFT || !drift.is_finite() {
            return Err(Error::Unstable {
                drift,
                time: s as f64 * dt,
            });
        }
        if s % run.stride == 0 || s == steps {
            times.push(s as f64 * dt);
            states.push(rho.clone());
        }
    }
    Ok(TimeSeries::new(times, states))
}

fn add_scaled(a: &CMatrix, b: &CMatrix, s: C64) -> CMatrix {
    let mut out = a.clone();
    out.add_assign_scaled(b, s);
    out
}

/// Largest entry change at the emitted times when the step is halved.
pub fn step_doubling_check(run: &LindbladRun) -> Result<f64> {
    let coarse = rk4_propagate(run)?;
    let fine = rk4_propagate(&LindbladRun {
        dt: run.dt / 2.0,
        stride: run.stride * 2,
        ..run.clone()
    })?;
    if coarse.states.len() != fine.states.len() {
        return Err(Error::GridMismatch(coarse.states.len(), fine.states.len()));
    }
    Ok(coarse
        .states
        .iter()
        .zip(&fine.states)
        .map(|(a, b)| a.matrix().max_abs_diff(b.matrix()))
        .fold(0.0, f64::max))
}

/// Alternate the layer unitary and the per-layer channels `layers` times.
pub fn trotterized_lindblad(
    unitary: &CMatrix,
    channels: &[LayerChannel],
    initial: &DensityMatrix,
    layers: usize,
    dt: f64,
) -> Result<TimeSeries> {
    if unitary.dim() != initial.dim() {
        return Err(Error::DimensionMismatch {
            expected: initial.dim(),
            actual: unitary.dim(),
        });
    }
    let mut times = Vec::with_capacity(layers + 1);
    let mut states = Vec::with_capacity(layers + 1);
    times.push(0.0);
    states.push(initial.clone());
    let mut rho = initial.clone();
    for d in 1..=layers {
        rho = rho.apply_unitary(unitary)?;
        for ch in channels {
            rho = match ch {
                LayerChannel::Pauli(c) => apply_in_pauli_basis(&rho, c)?,
                other => other.apply(&rho)?,
            };
        }
        rho.symmetrize();
        times.push(d as f64 * dt);
        states.push(rho.clone());
    }
    Ok(TimeSeries::new(times, states))
}

/// Pauli channel applied as a diagonal transfer matrix: every Pauli component
/// of `rho` is scaled by the channel fidelity of its restriction to the subgroup.
fn apply_in_pauli_basis(rho: &DensityMatrix, ch: &PauliChannel) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    let norm = 1.0 / rho.dim() as f64;
    let mut acc = CMatrix::zeros(rho.dim());
    for p in PauliString::all(n) {
        let c = rho.expectation(&p)?;
        if c == 0.0 {
            continue;
        }
        let f = ch.fidelity(&p.restrict(ch.subgroup()))?;
        acc.add_assign_scaled(&p.matrix(), C64::new(c * f * norm, 0.0));
    }
    Ok(DensityMatrix::from_matrix_unchecked(n, acc))
}

/// Mean absolute difference between two population vectors.
pub fn eta_from_populations(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// `η(t)` per time point for two population series on the same grid.
pub fn eta_metric(q: &[Vec<f64>], c: &[Vec<f64>]) -> Result<Vec<f64>> {
    if q.len() != c.len() {
        return Err(Error::GridMismatch(q.len(), c.len()));
    }
    q.iter().zip(c).map(|(a, b)| eta_from_populations(a, b)).collect()
}

/// [`eta_metric`] on full-register populations of two state series.
pub fn eta_series(q: &TimeSeries, c: &TimeSeries) -> Result<Vec<f64>> {
    if q.times.len() != c.times.len() {
        return Err(Error::GridMismatch(q.times.len(), c.times.len()));
    }
    for (a, b) in q.times.iter().zip(&c.times) {
        if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
            return Err(invalid("times", format!("grids differ at {a} vs {b}")));
        }
    }
    eta_metric(&q.populations(), &c.populations())
}
