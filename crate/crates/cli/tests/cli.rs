use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn nlslab(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nlslab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 6] = [
    "--override",
    "grid.L=30",
    "--override",
    "grid.n=801",
    "--override",
    "evolution.t_final=2.0",
];

fn small(extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = SMALL.to_vec();
    v.extend_from_slice(&["--override", "evolution.snapshot_stride=250"]);
    v.extend_from_slice(extra);
    v
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let o = nlslab(d.path(), &["--override", "potential.kind=\"zero\"", "spectrum"]);
    assert_eq!(o.status.code(), Some(3));
    let o = nlslab(d.path(), &["--override", "grid.spacing=0.1", "spectrum"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nlslab(d.path(), &["--override", "evolution.dt=-1", "evolve"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nlslab(d.path(), &["--config", "/definitely/not/here.toml", "spectrum"]);
    assert_eq!(o.status.code(), Some(4));
    let o = nlslab(d.path(), &["diagnose", "--run", "/definitely/not/here"]);
    assert_eq!(o.status.code(), Some(4));
    let o = nlslab(d.path(), &["report", "--run", "/definitely/not/here"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_file_and_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("deep.toml");
    std::fs::write(&cfg, "seed = 7\n[potential]\ndepth = 2.0\n[grid]\nn = 1025\n").unwrap();
    let out = d.path().join("o");
    let o = nlslab(&out, &["--config", cfg.to_str().unwrap(), "spectrum"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out.join("spectrum.json"));
    assert_eq!(v["result"]["resonance_class"], "resonant");
    assert!((v["result"]["extrapolated_lambda"].as_f64().unwrap() - 1.0).abs() < 1e-5);
    assert_eq!(v["provenance"]["seed"], 7);
    assert_eq!(v["config"]["grid"]["n"], 1025);

    let o = nlslab(&out, &["--config", cfg.to_str().unwrap(), "--seed", "9", "spectrum"]);
    assert!(o.status.success());
    assert_eq!(json(&out.join("spectrum.json"))["provenance"]["seed"], 9);
}

#[test]
fn stationary_orbit_diagnoses_to_its_modulus() {
    let d = tempfile::tempdir().unwrap();
    let o = nlslab(
        d.path(),
        &small(&[
            "--override",
            "initial.kind=\"branch\"",
            "--override",
            "initial.z_re=0.03",
            "--override",
            "initial.z_im=0.04",
            "evolve",
        ]),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = nlslab(d.path(), &["diagnose", "--run", d.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&d.path().join("diagnose.json"));
    let r = v["result"]["theorem"]["r_plus"].as_f64().unwrap();
    assert!((r - 0.05).abs() < 1e-6, "{r}");
    for f in ["modulation.csv", "diagnostics.csv", "snapshots.csv"] {
        let text = std::fs::read_to_string(d.path().join(f)).unwrap();
        assert!(text.starts_with("# nlslab "), "{f}");
        assert!(!text.contains('\r'));
    }
}

#[test]
fn outputs_carry_version_and_hash() {
    let d = tempfile::tempdir().unwrap();
    assert!(nlslab(d.path(), &small(&["evolve"])).status.success());
    let hash = json(&d.path().join("evolve.json"))["provenance"]["config_hash"]
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(hash.len(), 64);
    let meta = json(&d.path().join("trajectory.json"));
    assert_eq!(meta["provenance"]["config_hash"], hash.as_str());
    let csv = std::fs::read_to_string(d.path().join("snapshots.csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with(&format!("config_hash={hash}")));
    for f in ["fields.bin", "z_series.bin"] {
        let bytes = std::fs::read(d.path().join(f)).unwrap();
        assert_eq!(&bytes[..8], b"NLSDUMP1");
        assert_eq!(&bytes[24..88], hash.as_bytes());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(nlslab(d.path(), &small(&["evolve"])).status.success());
        assert!(nlslab(d.path(), &small(&["scatter"])).status.success());
    }
    let cmp = nlslab_cli::checks::compare_dirs(a.path(), b.path()).unwrap();
    assert!(cmp.identical, "{:?}", cmp.mismatched);
    assert!(cmp.files.iter().any(|f| f == "snapshots.csv"));
}

#[test]
fn report_lists_every_criterion() {
    let d = tempfile::tempdir().unwrap();
    let cfg = nlslab_cli::RunConfig::default();
    let check = nlslab_cli::checks::eigen_check(&nlslab_cli::config::GridConfig {
        n: 1025,
        ..Default::default()
    })
    .unwrap();
    nlslab_cli::output::write_json(&d.path().join("checks"), "eigen.json", &cfg, &check).unwrap();
    let o = nlslab(d.path(), &["report", "--run", d.path().to_str().unwrap()]);
    assert!(o.status.success());
    let v = json(&d.path().join("report.json"));
    let crit = v["criteria"].as_array().unwrap();
    assert_eq!(crit.len(), 13);
    assert_ne!(crit[0]["status"], "missing");
    assert_eq!(crit[1]["status"], "missing");
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 13);
}

#[test]
fn sweep_writes_one_directory_per_config() {
    let d = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (name, z) in [("a", "0.01"), ("b", "0.02")] {
        let p = d.path().join(format!("{name}.toml"));
        std::fs::write(
            &p,
            format!(
                "[grid]\nL = 30.0\nn = 801\n[evolution]\nt_final = 2.0\nsnapshot_stride = 250\n[initial]\nz_re = {z}\n"
            ),
        )
        .unwrap();
        paths.push(p);
    }
    let out = d.path().join("sweep");
    let mut args = vec!["sweep", "--configs"];
    args.extend(paths.iter().map(|p| p.to_str().unwrap()));
    let o = nlslab(&out, &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["a", "b"] {
        assert!(out.join(name).join("diagnose.json").exists());
    }
    let v = json(&out.join("sweep.json"));
    assert!(v.as_array().unwrap().iter().all(|e| e["error"].is_null()));
}
