use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use noise_forge::emulator::{execute, DeviceModel, Mode};
use noise_forge::hamiltonian::{build_chain_hamiltonian, ChainParams};
use noise_forge::linalg::DensityMatrix;
use noise_forge::pec::MitigationPlan;
use noise_forge::trotter::{build_trotter_layer, TrotterPlan};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noise-forge"))
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run(mode: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(mode)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

struct Table {
    comment: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_csv(p: &Path) -> Table {
    let text = std::fs::read_to_string(p).unwrap();
    let (comment, body) = text.split_once('\n').unwrap();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    Table {
        comment: comment.to_string(),
        header,
        rows,
    }
}

fn chain_block() -> Value {
    json!({"n": 2, "e0": 122.0, "slope": 0.5, "j": 0.5})
}

fn device_block() -> Value {
    json!({
        "n": 2,
        "channels": [{"subgroup": [0, 1], "probs": {
            "IX": 0.002, "IY": 0.001, "IZ": 0.004, "XI": 0.005, "XX": 0.001, "XY": 0.003, "XZ": 0.002,
            "YI": 0.004, "YX": 0.001, "YY": 0.002, "YZ": 0.003, "ZI": 0.005, "ZX": 0.001, "ZY": 0.002, "ZZ": 0.004
        }}]
    })
}

#[test]
fn chain_end_to_end_characterize_plan_mitigate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = json!({
        "chain": chain_block(),
        "device": device_block(),
        "trotter": {"dt": 0.25},
        "run": {"t": 5.0, "seed": 11, "rk4_dt": 0.0025}
    });
    let cfg = write_config(d, "characterize.json", &base);
    ok(&run("characterize", &cfg, &d.join("char"), &["--svg", "off"]));
    let decay = read_csv(&d.join("char/decay.csv"));
    assert_eq!(decay.header, ["subgroup", "probe", "depth", "value", "stderr", "fidelity"]);
    assert_eq!(decay.rows.len(), 15 * 4);

    let mut plan_cfg = base.clone();
    plan_cfg["device"] = json!({"from_file": "char/channels.json"});
    plan_cfg["pec"] = json!({"r": 0.1});
    let cfg = write_config(d, "plan.json", &plan_cfg);
    ok(&run("plan", &cfg, &d.join("plan"), &[]));

    let mut mit_cfg = plan_cfg.clone();
    mit_cfg["pec"] = json!({"plan_file": "plan/plan.json"});
    let cfg = write_config(d, "mitigate.json", &mit_cfg);
    ok(&run("mitigate", &cfg, &d.join("mit"), &[]));
    let series = read_csv(&d.join("mit/timeseries.csv"));
    assert_eq!(series.header, ["time", "observable_label", "value", "stderr", "eta"]);
    assert!(series.comment.starts_with("# config_hash=") && series.comment.ends_with("seed=11"));
    assert_eq!(series.rows.len(), 21 * 4);
    let eta = series.rows.iter().map(|r| r[4].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(eta <= 0.03, "max eta {eta}");
    assert!(d.join("mit/timeseries.svg").exists());
    assert!(d.join("mit/reference.csv").exists());

    // The plan re-ingested by mitigate is reproduced bit-for-bit.
    let a = std::fs::read_to_string(d.join("plan/plan.json")).unwrap();
    let b = std::fs::read_to_string(d.join("mit/plan.json")).unwrap();
    assert_eq!(a, b);
    let pa: MitigationPlan = serde_json::from_str(&a).unwrap();
    let pb: MitigationPlan = serde_json::from_str(&b).unwrap();
    for (x, y) in pa.quasis().iter().zip(pb.quasis()) {
        let bits = |q: &[f64]| q.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x.q), bits(&y.q));
    }
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        "sim.json",
        &json!({
            "chain": chain_block(),
            "device": device_block(),
            "trotter": {"dt": 0.1},
            "run": {"t": 1.0, "seed": 5, "shots": 500}
        }),
    );
    ok(&run("simulate", &cfg, &d.join("a"), &[]));
    ok(&run("simulate", &cfg, &d.join("b"), &[]));
    for f in ["timeseries.csv", "reference.csv", "timeseries.svg"] {
        assert_eq!(
            std::fs::read(d.join("a").join(f)).unwrap(),
            std::fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    ok(&run("simulate", &cfg, &d.join("c"), &["--seed", "6"]));
    assert_ne!(
        std::fs::read(d.join("a/timeseries.csv")).unwrap(),
        std::fs::read(d.join("c/timeseries.csv")).unwrap()
    );

    let mit = write_config(
        d,
        "mit.json",
        &json!({
            "chain": chain_block(),
            "device": device_block(),
            "trotter": {"dt": 0.25},
            "pec": {"r": 0.5, "samples": 200},
            "run": {"t": 1.0, "seed": 3, "shots": 20}
        }),
    );
    ok(&run("mitigate", &mit, &d.join("m1"), &[]));
    let single = bin()
        .env("NOISE_FORGE_THREADS", "1")
        .args(["mitigate", "--config"])
        .arg(&mit)
        .arg("--out")
        .arg(d.join("m2"))
        .output()
        .unwrap();
    ok(&single);
    assert_eq!(
        std::fs::read(d.join("m1/timeseries.csv")).unwrap(),
        std::fs::read(d.join("m2/timeseries.csv")).unwrap()
    );
}

#[test]
fn cost_table_is_monotone_and_log_linear() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        "cost.json",
        &json!({"cost": {"n": [2, 3, 4], "r": [1.0], "depths": [1, 5, 10, 20]}}),
    );
    ok(&run("cost", &cfg, d, &[]));
    let t = read_csv(&d.join("cost.csv"));
    assert_eq!(t.header, ["n", "D", "r", "epsilon_r", "C_iter", "C_tot", "M_required"]);
    let rows: Vec<(usize, usize, f64, f64)> = t
        .rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[4].parse().unwrap(), r[5].parse().unwrap()))
        .collect();
    for depth in [1, 5, 10, 20] {
        let c: Vec<f64> = rows.iter().filter(|r| r.1 == depth).map(|r| r.3).collect();
        assert!(c.windows(2).all(|w| w[1] > w[0]), "{c:?}");
    }
    for &(_, depth, c_iter, c_tot) in &rows {
        assert!((c_tot.ln() - depth as f64 * c_iter.ln()).abs() < 1e-12);
    }
    assert!(d.join("cost.svg").exists());
}

#[test]
fn noiseless_simulation_is_pure_trotter_evolution() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        "sim.json",
        &json!({
            "chain": chain_block(),
            "device": {"n": 2},
            "trotter": {"dt": 0.1, "order": 2},
            "run": {"t": 2.0, "reference": false}
        }),
    );
    ok(&run("simulate", &cfg, d, &["--svg", "off"]));
    assert!(!d.join("timeseries.svg").exists());
    assert!(!d.join("reference.csv").exists());
    let t = read_csv(&d.join("timeseries.csv"));

    let h = build_chain_hamiltonian(&ChainParams::linear(2, 122.0, 0.5, 0.5)).unwrap();
    let c = build_trotter_layer(&h, &TrotterPlan::new(2, 0.1, 1).unwrap()).unwrap();
    let u = c.unitary();
    let mut rho = DensityMatrix::from_bits("10").unwrap();
    let mut expected = vec![rho.populations()];
    for _ in 0..20 {
        rho = rho.apply_unitary(&u).unwrap();
        expected.push(rho.populations());
    }
    let direct = execute(&c, 20, &DeviceModel::noiseless(2), Mode::Exact, None, &DensityMatrix::from_bits("10").unwrap()).unwrap();
    for (d, row) in t.rows.chunks(4).enumerate() {
        for (i, r) in row.iter().enumerate() {
            let v: f64 = r[2].parse().unwrap();
            assert!((v - expected[d][i]).abs() < 1e-12);
            assert_eq!(v, direct.states[d].populations()[i]);
            assert!(r[4].is_empty());
        }
    }
}

#[test]
fn config_errors_exit_2_with_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        "bad.json",
        &json!({
            "chain": {"n": 2, "e0": 122.0, "j": 0.5},
            "device": device_block(),
            "trotter": {"dt": 0.1},
            "pec": {"targets": {"XI@0,1": 1.0}},
            "run": {"t": 1.0, "shots": -3}
        }),
    );
    let o = run("plan", &cfg, d, &[]);
    assert_eq!(o.status.code(), Some(2));
    let record: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(record["error"], "config");
    let paths: Vec<&str> = record["violations"].as_array().unwrap().iter().map(|v| v["path"].as_str().unwrap()).collect();
    assert!(paths.contains(&"run.shots"), "{paths:?}");
    assert!(paths.contains(&"pec.targets.XI@0,1"), "{paths:?}");
}

#[test]
fn numerical_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // One RK4 step per layer cannot resolve on-site energies near 122.
    let cfg = write_config(
        d,
        "unstable.json",
        &json!({
            "chain": chain_block(),
            "device": device_block(),
            "trotter": {"dt": 0.1},
            "run": {"t": 2.0, "rk4_dt": 0.1}
        }),
    );
    let o = run("simulate", &cfg, d, &[]);
    assert_eq!(o.status.code(), Some(3));
    let record: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(record["error"], "numerical");
    assert!(record["message"].as_str().unwrap().contains("unstable"));
}
