use std::path::Path;
use std::process::{Command, Output};

use rkhs_adapt::analysis::{read_series_csv, read_sweep_csv, RunManifest};
use rkhs_adapt::simulate::trial_seed;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rkhs-adapt")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const LTI: &str = r#"{"system": "lti", "horizon": 0.5, "seed": 4, "trials": 2, "decimate": 5,
    "adaptation": {"law": "parametric", "gamma": 10},
    "kernel": {"variant": "decomposable", "sigma": 1.0, "n": 5, "d": 5, "K": 20}}"#;

#[test]
fn control_writes_series_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lti.json", LTI);
    let out = dir.path().join("out");
    let o = run(&["control", "--config", &cfg, "--out", out.to_str().unwrap(), "--trials", "3", "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let m = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(m.command, "control");
    assert_eq!(m.config.seed, 9);
    assert_eq!(m.trials.len(), 3);
    for (i, t) in m.trials.iter().enumerate() {
        assert_eq!(t.seed, trial_seed(9, i));
        let s = read_series_csv(t.csv.as_ref().unwrap()).unwrap();
        assert_eq!(s.len(), 101);
    }
}

#[test]
fn same_seed_same_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lti.json", LTI);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["control", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(run(&["control", "--config", &cfg, "--out", b.to_str().unwrap()]).status.success());
    let read = |d: &Path| std::fs::read(d.join("trial_001.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"system": "lti", "horizon": -1}"#);
    assert_eq!(run(&["control", "--config", &bad, "--out", out]).status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.json", r#"{"system": "lti", "horizon": 1, "typo": 3}"#);
    assert_eq!(run(&["control", "--config", &unknown, "--out", out]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["control", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    let lti = write(dir.path(), "lti.json", LTI);
    assert_eq!(run(&["nbody", "--config", &lti, "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["control", "--config", &lti, "--out", out, "--trials", "0"]).status.code(), Some(2));
    assert!(!out_exists(out));
}

fn out_exists(p: &str) -> bool {
    Path::new(p).exists()
}

#[test]
fn divergence_exits_three_and_keeps_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.json", r#"{"system": "quartic", "horizon": 5, "initial_offset": -2.5}"#);
    let out = dir.path().join("out");
    let o = run(&["control", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let m = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert!(m.trials[0].divergence.is_some());
    assert!(!read_series_csv(m.trials[0].csv.as_ref().unwrap()).unwrap().is_empty());
}

#[test]
fn predict_sampling_writes_energies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"system": "sampling", "horizon": 5, "beta": 0.25, "dt_meas": 0.05}"#);
    let out = dir.path().join("out");
    assert!(run(&["predict", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(out.join("trial_000_energies.csv")).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.starts_with("step,energy_before,energy_after,bound"));
}

#[test]
fn sweep_writes_table_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(r#"{{"K": [10, 20, 40], "base": {LTI}}}"#);
    let cfg = write(dir.path(), "sweep.json", &text);
    let out = dir.path().join("out");
    let o = run(&["sweep-k", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_sweep_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(s.rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![10, 20, 40]);
    let m = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(m.trials.len(), 6);
    assert!(m.extra.iter().any(|(k, v)| k == "fit" && v.get("exponent").is_some()));
}

#[test]
fn calculators_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bound = write(
        dir.path(),
        "b.json",
        r#"{"kernel": {"variant": "curl-free", "sigma": 1.0, "n": 2, "d": 2}, "eps": [0.1], "K": [100]}"#,
    );
    assert!(run(&["bound", "--config", &bound, "--out", out.to_str().unwrap()]).status.success());
    assert!(out.join("bound.json").exists());

    let check = write(
        dir.path(),
        "k.json",
        r#"{"kernel": {"variant": "decomposable", "sigma": 1.0, "n": 2, "d": 2, "K": 2000}, "pairs": 2}"#,
    );
    assert!(run(&["kernel-check", "--config", &check, "--out", out.to_str().unwrap(), "--seed", "3"]).status.success());
    let csv = std::fs::read_to_string(out.join("kernel_check.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        let text = std::fs::read_to_string(&p).unwrap();
        let ok = match name.as_str() {
            "bound.json" => rkhs_adapt::analysis::BoundConfig::from_json(&text).is_ok(),
            "kernel_check.json" => rkhs_adapt::analysis::KernelCheckConfig::from_json(&text).is_ok(),
            n if n.starts_with("sweep") => rkhs_adapt::analysis::SweepConfig::from_json(&text).is_ok(),
            _ => rkhs_adapt::simulate::SimConfig::from_json(&text).is_ok(),
        };
        assert!(ok, "{name} does not validate");
        seen += 1;
    }
    assert!(seen >= 10);
}
