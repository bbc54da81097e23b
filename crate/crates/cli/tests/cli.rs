use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cns_core::solvers::store::{read_fields, write_fields};
use cns_core::noise::white_noise;
use cns_core::rng::root_rng;
use cns_core::GridShape;
use serde_json::{json, Value};

fn cns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cns")).args(args).output().expect("binary runs")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cns(&args)
}

fn base_config() -> Value {
    json!({
        "version": 1,
        "seed": 5,
        "oracle": {"kind": "radial_power_law", "height": 8, "width": 8, "components": 4,
                   "variance": 0.1, "exponent": -1.0, "mean_energy": 2.0, "seed": 1},
        "bands": 4,
        "gamma": {"steps": 10, "batches": 2, "batch_size": 4},
        "sample": {"method": "sde", "steps": 12, "chains": 6}
    })
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_gamma_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &base_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&run("gen-gamma", &cfg, &a, &[]));
    assert_ok(&run("gen-gamma", &cfg, &b, &["--threads", "1"]));
    for f in ["gamma.csv", "gamma.meta.json", "gamma_stderr.csv", "band_map.csv", "gamma.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "gen-gamma");
    assert_eq!(manifest["seed"], 5);
    assert!(manifest["outputs"].as_array().unwrap().len() >= 5);
}

#[test]
fn single_step_gamma_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base_config();
    v["gamma"]["steps"] = json!(1);
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = run("gen-gamma", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base_config();
    v["sample"]["stpes"] = json!(3);
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = run("sample", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stpes"));
}

#[test]
fn missing_input_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base_config();
    v["analyze"] = json!({"samples": "nowhere/samples.bin"});
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = run("analyze", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples.bin"));
    let o = run("sample", &dir.path().join("absent.json"), &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sample_repeats_and_seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &base_config());
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_ok(&run("sample", &cfg, &a, &[]));
    assert_ok(&run("sample", &cfg, &b, &[]));
    assert_ok(&run("sample", &cfg, &c, &["--seed", "6"]));
    let bytes = |d: &Path| fs::read(d.join("samples.bin")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_ne!(bytes(&a), bytes(&c));
    assert_eq!(read_fields(&a.join("injected.bin")).unwrap().len(), 6);
}

#[test]
fn all_ones_cns_equals_white_sde() {
    let dir = tempfile::tempdir().unwrap();
    let steps = 12;
    let mut beta = String::from("t,band_0,band_1,band_2,band_3\n");
    for k in 0..steps {
        beta.push_str(&format!("{},1,1,1,1\n", k as f64 / steps as f64));
    }
    fs::write(dir.path().join("beta.csv"), beta).unwrap();
    let sde = write_config(dir.path(), "sde.json", &base_config());
    let mut v = base_config();
    v["sample"]["method"] = json!("cns");
    v["sample"]["beta_file"] = json!("beta.csv");
    let cns_cfg = write_config(dir.path(), "cns.json", &v);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&run("sample", &sde, &a, &[]));
    assert_ok(&run("sample", &cns_cfg, &b, &[]));
    for f in ["samples.bin", "inits.bin", "injected.bin"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn ode_from_init_file_ignores_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = root_rng(9);
    let inits: Vec<_> = (0..6).map(|_| white_noise(GridShape::square(8), &mut rng)).collect();
    write_fields(&dir.path().join("init.bin"), &inits).unwrap();
    let mut v = base_config();
    v["sample"]["method"] = json!("ode");
    v["sample"]["init_file"] = json!("init.bin");
    let cfg = write_config(dir.path(), "c.json", &v);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&run("sample", &cfg, &a, &["--seed", "1"]));
    assert_ok(&run("sample", &cfg, &b, &["--seed", "2"]));
    assert_eq!(fs::read(a.join("samples.bin")).unwrap(), fs::read(b.join("samples.bin")).unwrap());
    assert!(!a.join("injected.bin").exists());
}

#[test]
fn cns_without_schedule_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base_config();
    v["sample"]["method"] = json!("cns");
    let cfg = write_config(dir.path(), "c.json", &v);
    assert_eq!(run("sample", &cfg, &dir.path().join("o"), &[]).status.code(), Some(2));
}

#[test]
fn analyze_target_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = root_rng(2);
    let set: Vec<_> = (0..20).map(|_| white_noise(GridShape::square(8), &mut rng)).collect();
    write_fields(&dir.path().join("t.bin"), &set).unwrap();
    let mut v = base_config();
    v["analyze"] = json!({"samples": "t.bin", "target": "t.bin"});
    let cfg = write_config(dir.path(), "c.json", &v);
    let out = dir.path().join("o");
    assert_ok(&run("analyze", &cfg, &out, &[]));
    let mut r = csv::Reader::from_path(out.join("spectral_gap.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row[5].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);
    }
    assert!(out.join("psd.svg").exists());
}

#[test]
fn ablation_reports_one_row_per_mode() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base_config();
    v["ablate"] = json!({
        "gamma_file": "g/gamma.csv",
        "modes": [{"mode": "constant"}, {"mode": "shuffled"}, {"mode": "inverted"},
                  {"mode": "white_corruption", "fraction": 0.5},
                  {"mode": "random_corruption", "fraction": 0.25},
                  {"mode": "random_unit_energy"}],
        "steps": 10, "chains": 4, "target_samples": 50
    });
    let cfg = write_config(dir.path(), "c.json", &v);
    assert_ok(&run("gen-gamma", &cfg, &dir.path().join("g"), &[]));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&run("ablate", &cfg, &a, &[]));
    assert_ok(&run("ablate", &cfg, &b, &[]));
    let text = fs::read_to_string(a.join("ablation.csv")).unwrap();
    let labels: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        labels,
        ["constant", "shuffled", "inverted", "white_corruption_0.5", "random_corruption_0.25", "random_unit_energy"]
    );
    assert_eq!(text, fs::read_to_string(b.join("ablation.csv")).unwrap());
}
