//! Experiment configuration: JSON text validated into typed blocks, with every
//! violation reported under a path-like locator.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use noise_forge::channels::PauliChannel;
use noise_forge::emulator::DeviceModel;
use noise_forge::pauli::PauliString;
use noise_forge::pec::{MitigationPlan, QuasiKind};

/// Largest register simulated with dense density matrices.
pub const MAX_DENSE_QUBITS: usize = 10;
pub const DEFAULT_ORDER: usize = 1;
pub const DEFAULT_DEPTHS: [usize; 4] = [2, 4, 8, 16];
/// Reference integrator steps per Trotter layer.
pub const DEFAULT_RK4_SUBSTEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    Characterize,
    Plan,
    Simulate,
    Mitigate,
    Cost,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Characterize, Mode::Plan, Mode::Simulate, Mode::Mitigate, Mode::Cost];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Characterize => "characterize",
            Mode::Plan => "plan",
            Mode::Simulate => "simulate",
            Mode::Mitigate => "mitigate",
            Mode::Cost => "cost",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    fn sampled(self) -> bool {
        matches!(self, Mode::Characterize | Mode::Simulate | Mode::Mitigate)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianSpec {
    Chain { site_energies: Vec<f64>, couplings: Vec<f64> },
    Tfim { n: usize, j: f64, h: f64 },
}

impl HamiltonianSpec {
    pub fn num_qubits(&self) -> usize {
        match self {
            HamiltonianSpec::Chain { site_energies, .. } => site_energies.len(),
            HamiltonianSpec::Tfim { n, .. } => *n,
        }
    }
}

/// Reset slot realizing amplitude damping at `rate` on `qubit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResetSpec {
    pub qubit: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub model: DeviceModel,
    pub resets: Vec<ResetSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrotterSpec {
    pub order: usize,
    pub dt: Option<f64>,
}

/// Per-word values keyed by labels such as `XI@0,1`, with a fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct WordMap {
    pub default: f64,
    pub words: BTreeMap<String, f64>,
}

impl WordMap {
    pub fn uniform(v: f64) -> Self {
        Self {
            default: v,
            words: BTreeMap::new(),
        }
    }

    /// Values for every word of `ch`; entry 0 is `identity`.
    pub fn expand(&self, ch: &PauliChannel, identity: f64) -> Vec<f64> {
        (0..ch.probs().len())
            .map(|k| {
                if k == 0 {
                    identity
                } else {
                    *self.words.get(&word_label(ch, k)).unwrap_or(&self.default)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PecSource {
    Factors(WordMap),
    Targets(WordMap),
    PlanFile(PathBuf, Box<MitigationPlan>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PecSpec {
    pub source: PecSource,
    /// `None` means `ceil(90·C_tot²)`.
    pub samples: Option<usize>,
    pub kind: QuasiKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizeSpec {
    /// `None` benchmarks every subgroup of the device.
    pub subgroups: Option<Vec<Vec<usize>>>,
    pub depths: Vec<usize>,
    pub twirls: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub n: Vec<usize>,
    pub depths: Vec<usize>,
    pub r: Vec<f64>,
    pub eps_single: f64,
    pub eps_pair: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub t: Option<f64>,
    pub seed: Option<u64>,
    /// `None` reads populations exactly.
    pub shots: Option<u64>,
    pub initial: Option<String>,
    pub reference: bool,
    pub rk4_dt: Option<f64>,
    /// Qubits whose reduced populations are reported; `None` keeps all.
    pub observe: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub hamiltonian: Option<HamiltonianSpec>,
    pub device: Option<DeviceSpec>,
    pub trotter: TrotterSpec,
    pub pec: Option<PecSpec>,
    pub characterize: CharacterizeSpec,
    pub cost: CostSpec,
    pub run: RunSpec,
    /// Hex SHA-256 of the canonical config text plus overrides.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    pub fn initial_bits(&self, n: usize) -> String {
        self.run
            .initial
            .clone()
            .unwrap_or_else(|| (0..n).map(|m| if m == 0 { '1' } else { '0' }).collect())
    }

    /// Reference integrator step, `Δt/20` unless configured.
    pub fn rk4_dt(&self, layer_dt: f64) -> f64 {
        self.run.rk4_dt.unwrap_or(layer_dt / DEFAULT_RK4_SUBSTEPS as f64)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
}

/// Label of word `k` of `ch`, e.g. `ZI@0,1`.
pub fn word_label(ch: &PauliChannel, k: usize) -> String {
    let w = PauliString::from_index(ch.width(), k);
    let qs: Vec<String> = ch.subgroup().iter().map(|q| q.to_string()).collect();
    format!("{w}@{}", qs.join(","))
}

pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, Vec<Violation>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![Violation {
            path: "$".into(),
            message: format!("cannot read {}: {e}", path.display()),
        }]
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base, overrides)
}

/// Parse config text; relative file references resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path, overrides: &Overrides) -> Result<ExperimentConfig, Vec<Violation>> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        vec![Violation {
            path: "$".into(),
            message: format!("invalid JSON: {e}"),
        }]
    })?;
    let mut v = Validator { errors: Vec::new(), base };
    let cfg = v.config(&value, overrides);
    match cfg {
        Some(cfg) if v.errors.is_empty() => Ok(cfg),
        _ => Err(v.errors),
    }
}

fn config_hash(value: &Value, overrides: &Overrides) -> String {
    let mut h = Sha256::new();
    h.update(value.to_string().as_bytes());
    if let Some(m) = overrides.mode {
        h.update(format!("|mode={m}").as_bytes());
    }
    if let Some(s) = overrides.seed {
        h.update(format!("|seed={s}").as_bytes());
    }
    hex::encode(h.finalize())
}

struct Validator<'a> {
    errors: Vec<Violation>,
    base: &'a Path,
}

type Obj = Map<String, Value>;

impl Validator<'_> {
    fn fail(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(Violation {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str) -> Option<&'v Obj> {
        match v.as_object() {
            Some(o) => Some(o),
            None => {
                self.fail(path, format!("expected an object, got {}", kind(v)));
                None
            }
        }
    }

    fn check_keys(&mut self, o: &Obj, path: &str, allowed: &[&str]) {
        for k in o.keys() {
            if !allowed.contains(&k.as_str()) {
                self.fail(&join(path, k), format!("unknown key (expected one of {})", allowed.join(", ")));
            }
        }
    }

    fn number(&mut self, o: &Obj, path: &str, key: &str) -> Option<f64> {
        let p = join(path, key);
        match o.get(key) {
            None | Some(Value::Null) => None,
            Some(Value::Number(x)) => x.as_f64(),
            Some(v) => {
                self.fail(&p, format!("expected a number, got {}", kind(v)));
                None
            }
        }
    }

    fn required_number(&mut self, o: &Obj, path: &str, key: &str) -> Option<f64> {
        let x = self.number(o, path, key);
        if x.is_none() && !o.contains_key(key) {
            self.fail(&join(path, key), "missing required key");
        }
        x
    }

    fn positive(&mut self, x: Option<f64>, path: &str) -> Option<f64> {
        match x {
            Some(x) if x > 0.0 && x.is_finite() => Some(x),
            Some(x) => {
                self.fail(path, format!("must be positive, got {x}"));
                None
            }
            None => None,
        }
    }

    fn probability(&mut self, x: Option<f64>, path: &str) -> Option<f64> {
        match x {
            Some(x) if (0.0..=1.0).contains(&x) => Some(x),
            Some(x) => {
                self.fail(path, format!("must lie in [0, 1], got {x}"));
                None
            }
            None => None,
        }
    }

    /// Unsigned integer; negative or fractional values are range violations.
    fn count(&mut self, v: &Value, path: &str) -> Option<u64> {
        match v {
            Value::Number(x) => {
                if let Some(u) = x.as_u64() {
                    Some(u)
                } else if x.as_i64().is_some() {
                    self.fail(path, format!("out of range: must be non-negative, got {x}"));
                    None
                } else {
                    self.fail(path, format!("expected an integer, got {x}"));
                    None
                }
            }
            v => {
                self.fail(path, format!("expected an integer, got {}", kind(v)));
                None
            }
        }
    }

    fn opt_count(&mut self, o: &Obj, path: &str, key: &str) -> Option<u64> {
        match o.get(key) {
            None | Some(Value::Null) => None,
            Some(v) => self.count(v, &join(path, key)),
        }
    }

    fn bool(&mut self, o: &Obj, path: &str, key: &str, default: bool) -> bool {
        match o.get(key) {
            None | Some(Value::Null) => default,
            Some(Value::Bool(b)) => *b,
            Some(v) => {
                self.fail(&join(path, key), format!("expected a boolean, got {}", kind(v)));
                default
            }
        }
    }

    fn string<'v>(&mut self, o: &'v Obj, path: &str, key: &str) -> Option<&'v str> {
        match o.get(key) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s),
            Some(v) => {
                self.fail(&join(path, key), format!("expected a string, got {}", kind(v)));
                None
            }
        }
    }

    fn numbers(&mut self, o: &Obj, path: &str, key: &str) -> Option<Vec<f64>> {
        let p = join(path, key);
        let arr = match o.get(key)? {
            Value::Array(a) => a,
            v => {
                self.fail(&p, format!("expected an array, got {}", kind(v)));
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        let mut ok = true;
        for (i, x) in arr.iter().enumerate() {
            match x.as_f64() {
                Some(x) => out.push(x),
                None => {
                    self.fail(&format!("{p}[{i}]"), format!("expected a number, got {}", kind(x)));
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    fn counts(&mut self, v: &Value, path: &str) -> Option<Vec<usize>> {
        let arr = match v {
            Value::Array(a) => a,
            v => {
                self.fail(path, format!("expected an array, got {}", kind(v)));
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        let mut ok = true;
        for (i, x) in arr.iter().enumerate() {
            match self.count(x, &format!("{path}[{i}]")) {
                Some(u) => out.push(u as usize),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn opt_counts(&mut self, o: &Obj, path: &str, key: &str) -> Option<Vec<usize>> {
        match o.get(key) {
            None | Some(Value::Null) => None,
            Some(v) => self.counts(v, &join(path, key)),
        }
    }

    fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn read_json<T: serde::de::DeserializeOwned>(&mut self, file: &str, path: &str) -> Option<(PathBuf, T)> {
        let full = self.resolve(file);
        let text = match std::fs::read_to_string(&full) {
            Ok(t) => t,
            Err(e) => {
                self.fail(path, format!("cannot read {}: {e}", full.display()));
                return None;
            }
        };
        match serde_json::from_str(&text) {
            Ok(v) => Some((full, v)),
            Err(e) => {
                self.fail(path, format!("invalid contents of {}: {e}", full.display()));
                None
            }
        }
    }

    fn config(&mut self, root: &Value, overrides: &Overrides) -> Option<ExperimentConfig> {
        let o = self.object(root, "$")?;
        self.check_keys(
            o,
            "",
            &["mode", "chain", "tfim", "device", "trotter", "pec", "characterize", "cost", "run"],
        );
        let file_mode = match self.string(o, "", "mode") {
            Some(s) => match Mode::parse(s) {
                Some(m) => Some(m),
                None => {
                    self.fail("mode", format!("unknown mode {s:?}"));
                    None
                }
            },
            None => None,
        };
        let mode = match overrides.mode.or(file_mode) {
            Some(m) => m,
            None => {
                self.fail("mode", "missing required key (or pass a subcommand)");
                Mode::Simulate
            }
        };

        let hamiltonian = self.hamiltonian(o);
        let trotter = self.trotter(o.get("trotter"));
        let run = self.run(o.get("run"), overrides);
        let device = o.get("device").and_then(|d| self.device(d));
        let pec = o.get("pec").and_then(|p| self.pec(p));
        let characterize = self.characterize(o.get("characterize"));
        let cost = self.cost(o.get("cost"));

        let cfg = ExperimentConfig {
            mode,
            hamiltonian,
            device,
            trotter,
            pec,
            characterize,
            cost,
            run,
            hash: config_hash(root, overrides),
        };
        self.cross_checks(&cfg, o);
        Some(cfg)
    }

    fn hamiltonian(&mut self, o: &Obj) -> Option<HamiltonianSpec> {
        match (o.get("chain"), o.get("tfim")) {
            (Some(_), Some(_)) => {
                self.fail("chain", "exactly one Hamiltonian block (chain or tfim) is allowed");
                None
            }
            (Some(c), None) => self.chain(c),
            (None, Some(t)) => self.tfim(t),
            (None, None) => None,
        }
    }

    fn chain(&mut self, v: &Value) -> Option<HamiltonianSpec> {
        let o = self.object(v, "chain")?;
        self.check_keys(o, "chain", &["n", "e0", "slope", "j", "site_energies", "couplings"]);
        if o.contains_key("site_energies") {
            let e = self.numbers(o, "chain", "site_energies")?;
            let c = self.numbers(o, "chain", "couplings").unwrap_or_else(|| vec![0.0; e.len().saturating_sub(1)]);
            if e.is_empty() {
                self.fail("chain.site_energies", "must not be empty");
                return None;
            }
            if c.len() + 1 != e.len() {
                self.fail("chain.couplings", format!("expected {} couplings, got {}", e.len() - 1, c.len()));
                return None;
            }
            return Some(HamiltonianSpec::Chain {
                site_energies: e,
                couplings: c,
            });
        }
        let n = self.n(o, "chain");
        let e0 = self.required_number(o, "chain", "e0");
        let slope = self.number(o, "chain", "slope").unwrap_or(0.0);
        let j = self.required_number(o, "chain", "j");
        let (n, e0, j) = (n?, e0?, j?);
        let p = noise_forge::hamiltonian::ChainParams::linear(n, e0, slope, j);
        Some(HamiltonianSpec::Chain {
            site_energies: p.site_energies,
            couplings: p.couplings,
        })
    }

    fn n(&mut self, o: &Obj, path: &str) -> Option<usize> {
        let p = join(path, "n");
        match o.get("n") {
            None => {
                self.fail(&p, "missing required key");
                None
            }
            Some(v) => match self.count(v, &p)? as usize {
                0 => {
                    self.fail(&p, "must be at least 1");
                    None
                }
                n if n > MAX_DENSE_QUBITS => {
                    self.fail(&p, format!("at most {} qubits", MAX_DENSE_QUBITS));
                    None
                }
                n => Some(n),
            },
        }
    }

    fn tfim(&mut self, v: &Value) -> Option<HamiltonianSpec> {
        let o = self.object(v, "tfim")?;
        self.check_keys(o, "tfim", &["n", "j", "h"]);
        let n = self.n(o, "tfim");
        let j = self.required_number(o, "tfim", "j");
        let h = self.required_number(o, "tfim", "h");
        Some(HamiltonianSpec::Tfim { n: n?, j: j?, h: h? })
    }

    fn trotter(&mut self, v: Option<&Value>) -> TrotterSpec {
        let mut spec = TrotterSpec {
            order: DEFAULT_ORDER,
            dt: None,
        };
        let Some(o) = v.and_then(|v| self.object(v, "trotter")) else {
            return spec;
        };
        self.check_keys(o, "trotter", &["order", "dt"]);
        if let Some(k) = self.opt_count(o, "trotter", "order") {
            if k == 1 || (k >= 2 && k % 2 == 0) {
                spec.order = k as usize;
            } else {
                self.fail("trotter.order", format!("must be 1 or even, got {k}"));
            }
        }
        let dt = self.number(o, "trotter", "dt");
        spec.dt = self.positive(dt, "trotter.dt");
        spec
    }

    fn run(&mut self, v: Option<&Value>, overrides: &Overrides) -> RunSpec {
        let mut spec = RunSpec {
            t: None,
            seed: None,
            shots: None,
            initial: None,
            reference: true,
            rk4_dt: None,
            observe: None,
        };
        if let Some(o) = v.and_then(|v| self.object(v, "run")) {
            self.check_keys(o, "run", &["t", "seed", "shots", "initial", "reference", "rk4_dt", "observe"]);
            let t = self.number(o, "run", "t");
            spec.t = self.positive(t, "run.t");
            spec.seed = self.opt_count(o, "run", "seed");
            spec.shots = self.opt_count(o, "run", "shots");
            if spec.shots == Some(0) {
                self.fail("run.shots", "out of range: must be at least 1 (omit for exact populations)");
            }
            if let Some(s) = self.string(o, "run", "initial") {
                if s.is_empty() || !s.chars().all(|c| c == '0' || c == '1') {
                    self.fail("run.initial", format!("expected a bitstring, got {s:?}"));
                } else {
                    spec.initial = Some(s.to_string());
                }
            }
            spec.reference = self.bool(o, "run", "reference", true);
            let rk = self.number(o, "run", "rk4_dt");
            spec.rk4_dt = self.positive(rk, "run.rk4_dt");
            spec.observe = self.opt_counts(o, "run", "observe");
        }
        if overrides.seed.is_some() {
            spec.seed = overrides.seed;
        }
        spec
    }

    fn device(&mut self, v: &Value) -> Option<DeviceSpec> {
        let o = self.object(v, "device")?;
        self.check_keys(
            o,
            "device",
            &["from_file", "n", "channels", "uniform", "p_er", "readout_error", "kick", "resets"],
        );
        let mut model = if let Some(file) = self.string(o, "device", "from_file") {
            if o.contains_key("channels") || o.contains_key("uniform") {
                self.fail("device.from_file", "cannot be combined with channels or uniform");
            }
            let (_, m): (PathBuf, DeviceModel) = self.read_json(file, "device.from_file")?;
            m
        } else {
            let n = self.n(o, "device")?;
            let channels = match (o.get("channels"), o.get("uniform")) {
                (Some(_), Some(_)) => {
                    self.fail("device.uniform", "cannot be combined with channels");
                    return None;
                }
                (Some(c), None) => self.channels(c)?,
                (None, Some(u)) => self.uniform(u, n)?,
                (None, None) => Vec::new(),
            };
            DeviceModel {
                channels,
                ..DeviceModel::noiseless(n)
            }
        };
        let p_er = self.number(o, "device", "p_er");
        if let Some(p) = self.probability(p_er, "device.p_er") {
            model.p_er = p;
        }
        let ro = self.number(o, "device", "readout_error");
        if let Some(e) = self.probability(ro, "device.readout_error") {
            model.readout_error = e;
        }
        if let Some(k) = self.number(o, "device", "kick") {
            model.kick = k;
        }
        if let Err(e) = model.validate() {
            self.fail("device", e.to_string());
            return None;
        }
        let resets = match o.get("resets") {
            Some(r) => self.resets(r, model.n)?,
            None => Vec::new(),
        };
        Some(DeviceSpec { model, resets })
    }

    fn channels(&mut self, v: &Value) -> Option<Vec<PauliChannel>> {
        let Value::Array(arr) = v else {
            self.fail("device.channels", format!("expected an array, got {}", kind(v)));
            return None;
        };
        let mut out = Vec::with_capacity(arr.len());
        let mut ok = true;
        for (i, c) in arr.iter().enumerate() {
            let p = format!("device.channels[{i}]");
            match channel_from_value(c) {
                Ok(ch) => out.push(ch),
                Err(e) => {
                    self.fail(&p, e.to_string());
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    fn uniform(&mut self, v: &Value, n: usize) -> Option<Vec<PauliChannel>> {
        let o = self.object(v, "device.uniform")?;
        self.check_keys(o, "device.uniform", &["eps_single", "eps_pair"]);
        let s = self.required_number(o, "device.uniform", "eps_single");
        let s = self.probability(s, "device.uniform.eps_single");
        let p = self.number(o, "device.uniform", "eps_pair").or(Some(0.0));
        let p = self.probability(p, "device.uniform.eps_pair");
        match noise_forge::pec::uniform_bond_channels(n, s?, p?) {
            Ok(c) => Some(c),
            Err(e) => {
                self.fail("device.uniform", e.to_string());
                None
            }
        }
    }

    fn resets(&mut self, v: &Value, n: usize) -> Option<Vec<ResetSpec>> {
        let Value::Array(arr) = v else {
            self.fail("device.resets", format!("expected an array, got {}", kind(v)));
            return None;
        };
        let mut out = Vec::new();
        for (i, r) in arr.iter().enumerate() {
            let p = format!("device.resets[{i}]");
            let Some(o) = self.object(r, &p) else { continue };
            self.check_keys(o, &p, &["qubit", "rate"]);
            let q = match o.get("qubit") {
                Some(q) => self.count(q, &join(&p, "qubit")),
                None => {
                    self.fail(&join(&p, "qubit"), "missing required key");
                    None
                }
            };
            let rate = self.required_number(o, &p, "rate");
            let rate = self.positive(rate, &join(&p, "rate"));
            if let Some(q) = q {
                if q as usize >= n {
                    self.fail(&join(&p, "qubit"), format!("qubit {q} out of range for {n} qubits"));
                    continue;
                }
            }
            if let (Some(q), Some(rate)) = (q, rate) {
                out.push(ResetSpec { qubit: q as usize, rate });
            }
        }
        Some(out)
    }

    fn word_map(&mut self, v: &Value, path: &str, probability: bool) -> Option<WordMap> {
        let check = |s: &mut Self, x: f64, p: &str| -> bool {
            let ok = if probability { (0.0..=1.0).contains(&x) } else { x >= 0.0 && x.is_finite() };
            if !ok {
                let range = if probability { "[0, 1]" } else { "[0, ∞)" };
                s.fail(p, format!("must lie in {range}, got {x}"));
            }
            ok
        };
        match v {
            Value::Number(x) => {
                let x = x.as_f64()?;
                check(self, x, path).then(|| WordMap::uniform(x))
            }
            Value::Object(o) => {
                let mut map = WordMap::uniform(0.0);
                let mut ok = true;
                for (k, x) in o {
                    let p = join(path, k);
                    let Some(x) = x.as_f64() else {
                        self.fail(&p, format!("expected a number, got {}", kind(x)));
                        ok = false;
                        continue;
                    };
                    ok &= check(self, x, &p);
                    if k == "default" {
                        map.default = x;
                    } else {
                        map.words.insert(k.clone(), x);
                    }
                }
                ok.then_some(map)
            }
            v => {
                self.fail(path, format!("expected a number or an object, got {}", kind(v)));
                None
            }
        }
    }

    fn pec(&mut self, v: &Value) -> Option<PecSpec> {
        let o = self.object(v, "pec")?;
        self.check_keys(o, "pec", &["r", "targets", "plan_file", "samples", "kind"]);
        let present: Vec<&str> = ["r", "targets", "plan_file"].into_iter().filter(|k| o.contains_key(*k)).collect();
        if present.len() != 1 {
            self.fail("pec", format!("expected exactly one of r, targets, plan_file; got {}", present.len()));
            return None;
        }
        let samples = match o.get("samples") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) if s == "auto" => None,
            Some(v) => match self.count(v, "pec.samples") {
                Some(m) if m >= 2 => Some(m as usize),
                Some(m) => {
                    self.fail("pec.samples", format!("out of range: need at least 2 samples, got {m}"));
                    None
                }
                None => None,
            },
        };
        let kind = match self.string(o, "pec", "kind") {
            None => QuasiKind::default(),
            Some(s) => match serde_json::from_value(Value::String(s.into())) {
                Ok(k) => k,
                Err(_) => {
                    self.fail("pec.kind", format!("expected first_order or exact_inverse, got {s:?}"));
                    QuasiKind::default()
                }
            },
        };
        let source = match present[0] {
            "r" => PecSource::Factors(self.word_map(&o["r"], "pec.r", true)?),
            "targets" => PecSource::Targets(self.word_map(&o["targets"], "pec.targets", false)?),
            _ => {
                let file = self.string(o, "pec", "plan_file")?;
                let (path, plan): (PathBuf, MitigationPlan) = self.read_json(file, "pec.plan_file")?;
                PecSource::PlanFile(path, Box::new(plan))
            }
        };
        Some(PecSpec { source, samples, kind })
    }

    fn characterize(&mut self, v: Option<&Value>) -> CharacterizeSpec {
        let mut spec = CharacterizeSpec {
            subgroups: None,
            depths: DEFAULT_DEPTHS.to_vec(),
            twirls: 1,
        };
        let Some(o) = v.and_then(|v| self.object(v, "characterize")) else {
            return spec;
        };
        self.check_keys(o, "characterize", &["subgroups", "depths", "twirls"]);
        if let Some(Value::Array(arr)) = o.get("subgroups") {
            let mut groups = Vec::new();
            for (i, g) in arr.iter().enumerate() {
                if let Some(g) = self.counts(g, &format!("characterize.subgroups[{i}]")) {
                    groups.push(g);
                }
            }
            spec.subgroups = Some(groups);
        } else if let Some(v) = o.get("subgroups") {
            self.fail("characterize.subgroups", format!("expected an array, got {}", kind(v)));
        }
        if let Some(d) = self.opt_counts(o, "characterize", "depths") {
            if d.len() < 2 || d.windows(2).any(|w| w[1] <= w[0]) || d[0] == 0 {
                self.fail("characterize.depths", "need at least two positive, strictly increasing depths");
            } else {
                spec.depths = d;
            }
        }
        if let Some(t) = self.opt_count(o, "characterize", "twirls") {
            spec.twirls = t as usize;
        }
        spec
    }

    fn cost(&mut self, v: Option<&Value>) -> CostSpec {
        let mut spec = CostSpec {
            n: vec![2, 3, 4],
            depths: vec![1, 2, 5, 10, 20, 50],
            r: vec![1.0],
            eps_single: 0.005,
            eps_pair: 0.002,
        };
        let Some(o) = v.and_then(|v| self.object(v, "cost")) else {
            return spec;
        };
        self.check_keys(o, "cost", &["n", "depths", "r", "eps_single", "eps_pair"]);
        if let Some(n) = self.opt_counts(o, "cost", "n") {
            if n.is_empty() || n.iter().any(|&n| n < 2) {
                self.fail("cost.n", "need at least one value, each at least 2");
            } else {
                spec.n = n;
            }
        }
        if let Some(d) = self.opt_counts(o, "cost", "depths") {
            if d.is_empty() || d.contains(&0) {
                self.fail("cost.depths", "need at least one positive depth");
            } else {
                spec.depths = d;
            }
        }
        if let Some(r) = self.numbers(o, "cost", "r") {
            for (i, &x) in r.iter().enumerate() {
                self.probability(Some(x), &format!("cost.r[{i}]"));
            }
            spec.r = r;
        }
        let s = self.number(o, "cost", "eps_single");
        if let Some(s) = self.probability(s, "cost.eps_single") {
            spec.eps_single = s;
        }
        let p = self.number(o, "cost", "eps_pair");
        if let Some(p) = self.probability(p, "cost.eps_pair") {
            spec.eps_pair = p;
        }
        spec
    }

    fn cross_checks(&mut self, cfg: &ExperimentConfig, o: &Obj) {
        let mode = cfg.mode;
        let needs_hamiltonian = matches!(mode, Mode::Characterize | Mode::Simulate | Mode::Mitigate)
            || (mode == Mode::Plan && cfg.device.as_ref().is_some_and(|d| !d.resets.is_empty()));
        if needs_hamiltonian && cfg.hamiltonian.is_none() && !o.contains_key("chain") && !o.contains_key("tfim") {
            self.fail("chain", format!("{mode} needs a Hamiltonian block (chain or tfim)"));
        }
        if matches!(mode, Mode::Characterize | Mode::Plan | Mode::Simulate | Mode::Mitigate) && !o.contains_key("device") {
            self.fail("device", format!("{mode} needs a device block"));
        }
        if let (Some(h), Some(d)) = (&cfg.hamiltonian, &cfg.device) {
            if h.num_qubits() != d.model.n {
                self.fail("device.n", format!("device has {} qubits, Hamiltonian has {}", d.model.n, h.num_qubits()));
            }
        }
        if let (Some(init), Some(h)) = (&cfg.run.initial, &cfg.hamiltonian) {
            if init.len() != h.num_qubits() {
                self.fail("run.initial", format!("expected {} bits, got {}", h.num_qubits(), init.len()));
            }
        }
        if let (Some(obs), Some(h)) = (&cfg.run.observe, &cfg.hamiltonian) {
            if obs.is_empty() || obs.iter().any(|&q| q >= h.num_qubits()) {
                self.fail("run.observe", format!("qubits must be distinct and below {}", h.num_qubits()));
            } else {
                let mut s = obs.clone();
                s.sort_unstable();
                s.dedup();
                if s.len() != obs.len() {
                    self.fail("run.observe", "qubits must be distinct");
                }
            }
        }
        if mode.sampled() && cfg.run.seed.is_none() {
            let sampled = mode == Mode::Mitigate || cfg.run.shots.is_some();
            if sampled {
                self.fail("run.seed", format!("{mode} with sampling needs a seed (config or --seed)"));
            }
        }
        if matches!(mode, Mode::Simulate | Mode::Mitigate | Mode::Plan) && cfg.run.t.is_none() {
            let from_plan = matches!(cfg.pec.as_ref().map(|p| &p.source), Some(PecSource::PlanFile(..)));
            if !(mode == Mode::Mitigate && from_plan) && !o.get("run").is_some_and(|r| r.get("t").is_some()) {
                self.fail("run.t", format!("{mode} needs a total time"));
            }
        }
        let plan_file = matches!(cfg.pec.as_ref().map(|p| &p.source), Some(PecSource::PlanFile(..)));
        let targets = matches!(cfg.pec.as_ref().map(|p| &p.source), Some(PecSource::Targets(_)));
        let needs_dt = match mode {
            Mode::Characterize | Mode::Simulate => true,
            Mode::Mitigate => !plan_file && !targets,
            Mode::Plan => !targets || cfg.device.as_ref().is_some_and(|d| !d.resets.is_empty()),
            Mode::Cost => false,
        };
        if needs_dt && cfg.trotter.dt.is_none() && !o.get("trotter").is_some_and(|t| t.get("dt").is_some()) {
            self.fail("trotter.dt", format!("{mode} needs a Trotter step"));
        }
        if matches!(mode, Mode::Plan | Mode::Mitigate) && !o.contains_key("pec") {
            self.fail("pec", format!("{mode} needs a pec block"));
        }
        if let (Some(pec), Some(dev)) = (&cfg.pec, &cfg.device) {
            self.check_pec_against_device(pec, dev, cfg.trotter.dt);
        }
        if let (Some(t), Some(dt)) = (cfg.run.t, cfg.trotter.dt) {
            if !plan_file {
                let d = t / dt;
                if (d - d.round()).abs() > 1e-9 * d.max(1.0) {
                    self.fail("run.t", format!("t = {t} is not a whole number of steps dt = {dt}"));
                }
            }
        }
    }

    fn check_pec_against_device(&mut self, pec: &PecSpec, dev: &DeviceSpec, dt: Option<f64>) {
        let labels: Vec<(String, f64)> = dev
            .model
            .channels
            .iter()
            .flat_map(|ch| (1..ch.probs().len()).map(move |k| (word_label(ch, k), ch.probs()[k])))
            .collect();
        let (map, path) = match &pec.source {
            PecSource::Factors(m) => (m, "pec.r"),
            PecSource::Targets(m) => (m, "pec.targets"),
            PecSource::PlanFile(_, plan) => {
                let subgroups = dev.model.subgroups();
                if let Err(e) = plan.check_tiling(&subgroups) {
                    self.fail("pec.plan_file", e.to_string());
                }
                if let Some(dt) = dt {
                    if dt.to_bits() != plan.dt.to_bits() {
                        self.fail("trotter.dt", format!("plan file fixes dt = {}, config has {dt}", plan.dt));
                    }
                }
                return;
            }
        };
        for k in map.words.keys() {
            if !labels.iter().any(|(l, _)| l == k) {
                self.fail(&join(path, k), "no such channel word on the device");
            }
        }
        // A fixed step caps every reachable rate at ε_k/Δt; resets only add Z dephasing.
        if let (PecSource::Targets(m), Some(dt)) = (&pec.source, dt) {
            if !dev.resets.is_empty() {
                return;
            }
            for (label, eps) in &labels {
                let gamma = *m.words.get(label).unwrap_or(&m.default);
                let available = eps / dt;
                if gamma > available * (1.0 + 1e-12) {
                    self.fail(
                        &join(path, label),
                        format!("target rate {gamma} for channel {label} exceeds ε/Δt = {available} at dt = {dt}"),
                    );
                }
            }
        }
    }
}

/// `{"subgroup": [...], "probs": {...}}`; without an identity entry the
/// listed probabilities are errors and the identity takes the rest.
fn channel_from_value(v: &Value) -> Result<PauliChannel, String> {
    let has_identity = v
        .get("probs")
        .and_then(Value::as_object)
        .is_some_and(|m| m.keys().any(|k| !k.is_empty() && k.chars().all(|c| c == 'I')));
    if has_identity {
        return serde_json::from_value(v.clone()).map_err(|e| e.to_string());
    }
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Errors {
        subgroup: Vec<usize>,
        probs: BTreeMap<String, f64>,
    }
    let e: Errors = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
    let errors: Vec<(&str, f64)> = e.probs.iter().map(|(k, &p)| (k.as_str(), p)).collect();
    PauliChannel::from_labels(e.subgroup, &errors).map_err(|e| e.to_string())
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, Vec<Violation>> {
        parse_config_str(text, Path::new("."), &Overrides::default())
    }

    const MINIMAL: &str = r#"{
        "mode": "simulate",
        "chain": {"n": 2, "e0": 122, "slope": 0.5, "j": 0.5},
        "device": {"n": 2, "channels": [{"subgroup": [0, 1], "probs": {"XI": 0.01, "ZZ": 0.02}}]},
        "trotter": {"dt": 0.1},
        "run": {"t": 1.0}
    }"#;

    #[test]
    fn minimal_simulate_fills_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.mode, Mode::Simulate);
        assert_eq!(cfg.trotter.order, 1);
        assert_eq!(cfg.device.as_ref().unwrap().model.p_er, 1e-3);
        assert!((cfg.rk4_dt(0.1) - 0.005).abs() < 1e-15);
        assert_eq!(cfg.initial_bits(2), "10");
        assert!(cfg.run.shots.is_none());
        match &cfg.hamiltonian {
            Some(HamiltonianSpec::Chain { site_energies, .. }) => assert_eq!(site_energies, &[121.5, 121.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_shots_is_a_range_violation() {
        let text = MINIMAL.replace(r#""t": 1.0"#, r#""t": 1.0, "shots": -5, "seed": 1"#);
        let errs = parse(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "run.shots" && e.message.contains("out of range")), "{errs:?}");
    }

    #[test]
    fn unreachable_target_names_the_channel() {
        let text = MINIMAL
            .replace(r#""mode": "simulate""#, r#""mode": "plan""#)
            .replace(r#""run""#, r#""pec": {"targets": {"XI@0,1": 0.5}}, "run""#);
        let errs = parse(&text).unwrap_err();
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert_eq!(errs[0].path, "pec.targets.XI@0,1");
        assert!(errs[0].message.contains("XI@0,1"));
    }

    #[test]
    fn collects_every_violation() {
        let text = r#"{
            "mode": "simulate",
            "chain": {"n": 2, "j": "strong"},
            "device": {"n": 2, "p_er": 2.0},
            "trotter": {"order": 3, "dt": -0.1},
            "run": {"shots": 0, "initial": "1x"},
            "bogus": 1
        }"#;
        let errs = parse(text).unwrap_err();
        let paths: Vec<&str> = errs.iter().map(|e| e.path.as_str()).collect();
        for p in ["bogus", "chain.e0", "chain.j", "device.p_er", "trotter.order", "trotter.dt", "run.shots", "run.initial"] {
            assert!(paths.contains(&p), "missing {p} in {paths:?}");
        }
    }

    #[test]
    fn sampled_modes_need_a_seed() {
        let text = MINIMAL.replace(r#""t": 1.0"#, r#""t": 1.0, "shots": 100"#);
        let errs = parse(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "run.seed"));
        let over = Overrides {
            seed: Some(3),
            ..Default::default()
        };
        let cfg = parse_config_str(&text, Path::new("."), &over).unwrap();
        assert_eq!(cfg.run.seed, Some(3));
    }

    #[test]
    fn two_hamiltonians_rejected() {
        let text = MINIMAL.replace(r#""trotter""#, r#""tfim": {"n": 2, "j": 1, "h": 1}, "trotter""#);
        let errs = parse(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("exactly one Hamiltonian")));
    }

    #[test]
    fn missing_plan_file_is_reported() {
        let text = MINIMAL
            .replace(r#""mode": "simulate""#, r#""mode": "mitigate""#)
            .replace(r#""run": {"t": 1.0}"#, r#""pec": {"plan_file": "does-not-exist.json"}, "run": {"seed": 1}"#);
        let errs = parse(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "pec.plan_file"), "{errs:?}");
    }

    #[test]
    fn hash_depends_on_seed_override() {
        let a = parse(MINIMAL).unwrap().hash;
        let over = Overrides {
            seed: Some(9),
            ..Default::default()
        };
        let b = parse_config_str(MINIMAL, Path::new("."), &over).unwrap().hash;
        assert_ne!(a, b);
        assert_eq!(a, parse(MINIMAL).unwrap().hash);
    }
}
