use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dsii_core::spectral::read_field_csv;
use serde_json::Value;

fn dsii(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsii"))
        .args(args)
        .env_remove("DSII_THREADS")
        .output()
        .expect("binary runs")
}

fn dir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn out_arg(d: &Path) -> String {
    d.to_str().unwrap().to_string()
}

fn manifest(d: &Path, name: &str) -> Value {
    let text = fs::read_to_string(d.join(format!("{name}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let line = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(line.trim()).unwrap_or_else(|e| panic!("{e}: {line}"))
}

fn read_all(d: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(d)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let b = fs::read(&p).unwrap();
            (p.file_name().unwrap().into(), b)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn verify_passes_on_defaults() {
    let d = dir();
    let o = dsii(&["verify", "--out", &out_arg(d.path())]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}\n{}", String::from_utf8_lossy(&o.stderr));
    assert!(text.contains("PASS") && !text.contains("FAIL"), "{text}");
    let m = manifest(d.path(), "verify");
    assert_eq!(m["results"]["all_pass"], Value::Bool(true));
    assert!(d.path().join("verify.csv").exists());
}

#[test]
fn flags_override_the_config_file() {
    let d = dir();
    let cfg = d.path().join("run.cfg");
    fs::write(&cfg, "# reference\nomega = 0.80\nspectrum_kmax = 2\nformat = json\n").unwrap();
    let o = dsii(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        &out_arg(d.path()),
        "--omega",
        "0.75",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(d.path(), "spectrum");
    assert_eq!(m["inputs"]["omega"].as_f64(), Some(0.75));
    assert_eq!(m["inputs"]["spectrum_kmax"], Value::from(2));
    let rows: Value = serde_json::from_str(&fs::read_to_string(d.path().join("spectrum.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3 * 3 - 1);
    for k in ["k1", "k2", "xi1", "xi2", "mu_plus", "mu_minus"] {
        assert!(rows[0].get(k).is_some(), "{k}");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let d = dir();
    let cfg = d.path().join("run.cfg");
    fs::write(&cfg, "omega = 0.8\nomgea = 0.9\n").unwrap();
    let o = dsii(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", &out_arg(d.path())]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["kind"], "validation");
    assert!(e["message"].as_str().unwrap().contains("omgea"));

    let o = dsii(&["spectrum", "--set", "nope=1", "--out", &out_arg(d.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes_follow_the_error_class() {
    let d = dir();
    // Outside every constraint branch.
    let o = dsii(&["spectrum", "--omega", "2.0", "--out", &out_arg(d.path())]);
    assert_eq!(o.status.code(), Some(1));

    // Unattainable quadrature tolerance.
    let o = dsii(&[
        "melnikov", "--nx", "8", "--ny", "8", "--quad-nodes", "4", "--quad-tol", "1e-300", "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["kind"], "numerical");

    // Output directory below a regular file.
    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = dsii(&["spectrum", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["kind"], "io");

    let o = dsii(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let d = dir();
    let out = out_arg(d.path());
    let runs: [&[&str]; 3] = [
        &["spectrum", "--out", &out],
        &["normalform", "--kmax", "4", "--out", &out],
        &["solve-params", "--nx", "8", "--ny", "8", "--quad-nodes", "4", "--set", "quad_check=false", "--out", &out],
    ];
    for args in runs {
        assert_eq!(dsii(args).status.code(), Some(0), "{args:?}");
    }
    let first = read_all(d.path());
    for args in runs {
        dsii(args);
    }
    assert_eq!(first, read_all(d.path()));

    // Thread count changes nothing but the recorded setting.
    let d2 = dir();
    let o = Command::new(env!("CARGO_BIN_EXE_dsii"))
        .args(["normalform", "--kmax", "4", "--out", &out_arg(d2.path())])
        .env("DSII_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read(d.path().join("normalform.csv")).unwrap(),
        fs::read(d2.path().join("normalform.csv")).unwrap()
    );
}

#[test]
fn scan_domain_fills_the_lattice() {
    let d = dir();
    let o = dsii(&[
        "scan-domain", "--nx", "8", "--ny", "8", "--quad-nodes", "4", "--set", "quad_check=false", "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("scan_domain.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega,delta_rho,gamma,alpha,beta,admissible,flags"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 125);
    assert!(rows.iter().any(|r| !r.ends_with(',')), "some cells are flagged");
    assert!(rows.iter().all(|r| r.split(',').count() == 7));
}

#[test]
fn simulate_writes_readable_snapshots() {
    let d = dir();
    let o = dsii(&[
        "simulate", "--nx", "16", "--ny", "16", "--t0", "-2", "--t-final", "0.1", "--dt", "0.01",
        "--snapshot-stride", "5", "--out", &out_arg(d.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(d.path(), "simulate");
    assert_eq!(m["results"]["snapshots"], Value::from(3));
    assert!(m["results"]["orbit_l2_error"].as_f64().unwrap() < 1e-4);
    let last = d.path().join("snapshot_00002.csv");
    let q = read_field_csv(std::io::BufReader::new(fs::File::open(&last).unwrap())).unwrap();
    assert_eq!((q.grid().nx(), q.grid().ny()), (16, 16));

    // Restart from a written snapshot.
    let d2 = dir();
    let init = format!("file:{}", last.display());
    let o = dsii(&[
        "simulate", "--initial", &init, "--t-final", "0.05", "--dt", "0.01", "--nx", "16", "--ny", "16",
        "--out", &out_arg(d2.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&last).unwrap(), fs::read(d2.path().join("snapshot_00000.csv")).unwrap());
}

#[test]
fn normalform_reports_rows_and_summary() {
    let d = dir();
    let o = dsii(&["normalform", "--kmax", "4", "--out", &out_arg(d.path())]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(d.path().join("normalform.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("k1,k2,l1,l2,cond,residual,maxK"));
    let n = 9 * 9 - 1;
    assert_eq!(text.lines().count() - 1, n * n - n);
    let s: Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("normalform_summary.json")).unwrap()).unwrap();
    assert!(s["singular_pairs"].is_array());
    assert_eq!(s["fitted_exponents"].as_array().unwrap().len(), 6);
    assert!(s["max_residual_well_conditioned"].as_f64().unwrap() < 1e-12);
}

#[test]
fn melnikov_json_and_orbit_snapshots() {
    let d = dir();
    let out = out_arg(d.path());
    let o = dsii(&[
        "melnikov", "--nx", "8", "--ny", "8", "--quad-nodes", "4", "--set", "quad_check=false", "--format", "json",
        "--out", &out,
    ]);
    assert_eq!(o.status.code(), Some(0));
    let m: Value = serde_json::from_str(&fs::read_to_string(d.path().join("melnikov.json")).unwrap()).unwrap();
    assert_eq!(m["m"].as_array().unwrap().len(), 2);
    assert_eq!(m["m"][0].as_array().unwrap().len(), 4);

    let o = dsii(&["orbit", "--nx", "16", "--ny", "16", "--times=-1,0,1", "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(d.path(), "orbit");
    assert_eq!(m["results"]["samples"].as_array().unwrap().len(), 3);
    assert!(m["results"]["phase_checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == Value::Bool(true)));
    for k in ["inputs", "versions", "tolerances", "results", "outputs"] {
        assert!(m.get(k).is_some(), "{k}");
    }
}
