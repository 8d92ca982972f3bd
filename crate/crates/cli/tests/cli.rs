use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sqclock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqclock"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = sqclock(args);
    assert!(
        out.status.success(),
        "sqclock {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value_of(csv: &str, quantity: &str) -> f64 {
    csv.lines()
        .find_map(|l| {
            let mut f = l.split(',');
            (f.next() == Some(quantity)).then(|| f.next().unwrap().parse().unwrap())
        })
        .unwrap_or_else(|| panic!("{quantity} missing"))
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn validate_reports_derived_quantities() {
    let out = stdout(&["validate"]);
    assert!((value_of(&out, "r") - 0.784).abs() < 5e-4);
    assert!((value_of(&out, "sinh2_r") - 0.751).abs() < 1e-3);
    assert!((value_of(&out, "theta_mid_fringe") - 1.562).abs() < 5e-4);
}

#[test]
fn validate_warns_for_vacuum_input() {
    let out = sqclock(&["validate", "--t-spin", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(value_of(&text, "r"), 0.0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("vacuum input (classical clock)"));
}

#[test]
fn zero_atoms_is_rejected() {
    let out = sqclock(&["validate", "--atoms", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("atoms"));
}

#[test]
fn fringe_layout() {
    let out = stdout(&["fringe", "--tau-R", "250us", "--delta", "-20k..20k"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("# sqclock fringe schema=1"));
    assert_eq!(lines.next(), Some("# seed=0"));
    let header = out.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("detuning_hz,f_minus1,f_0,f_plus1"));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 401);
    for row in &rows {
        let f: Vec<f64> = row[1..5].iter().map(|v| v.parse().unwrap()).collect();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let p = path.to_str().unwrap();
        stdout(&["sensitivity", "--seed", "11", "--shots", "2000", "--out", p]);
        (
            std::fs::read(&path).unwrap(),
            std::fs::read(format!("{p}.manifest.json")).unwrap(),
        )
    };
    let (a, ma) = run("a.csv");
    let (b, mb) = run("b.csv");
    assert_eq!(a, b);
    let (ma, mb): (Value, Value) = (
        serde_json::from_slice(&ma).unwrap(),
        serde_json::from_slice(&mb).unwrap(),
    );
    assert_eq!(ma["seed"], 11);
    assert_eq!(ma["params"], mb["params"]);
    assert_eq!(ma["version"], env!("CARGO_PKG_VERSION"));

    let other = dir.path().join("c.csv");
    stdout(&[
        "sensitivity",
        "--seed",
        "12",
        "--shots",
        "2000",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_ne!(a, std::fs::read(other).unwrap());
}

#[test]
fn tomo_emits_wigner_grid() {
    let out = stdout(&[
        "tomo",
        "--r",
        "0.784",
        "--phases",
        "20",
        "--samples",
        "100",
        "--kc",
        "2",
        "--grid",
        "21",
    ]);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 21 * 21);
    assert!(out.contains("# method=radon"));
    let fit: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("# fit_var_squeezed="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(fit > 0.02 && fit < 0.3, "{fit}");
}

#[test]
fn tomo_reads_homodyne_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("samples.txt");
    let mut text = String::from("# phi x\n");
    for k in 0..8 {
        let phi = std::f64::consts::PI * k as f64 / 8.0;
        for j in 0..50 {
            let x = ((j as f64 + 0.5) / 50.0 - 0.5) * 2.0;
            text.push_str(&format!("{phi} {x}\n"));
        }
    }
    std::fs::write(&input, text).unwrap();
    let out = stdout(&[
        "tomo",
        "--input",
        input.to_str().unwrap(),
        "--method",
        "mle",
        "--n-max",
        "12",
        "--iterations",
        "30",
        "--grid",
        "11",
        "--format",
        "json",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["experiment"], "tomo");
    assert_eq!(v["meta"]["phases"], 8);
    assert_eq!(v["data"]["w"].as_array().unwrap().len(), 121);
    assert_eq!(v["params"]["n_max"], 12);
}

#[test]
fn json_output_has_params_seed_data() {
    let out = stdout(&["noise-budget", "--format", "json", "--seed", "5"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["params"]["atoms"], 10000);
    assert_eq!(v["data"]["term"][4], "total");
    assert!(v["meta"]["gain_db"].as_f64().unwrap() < 0.0);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "atoms = 5000\nt_spin = \"16ms\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    let out = stdout(&["validate", "--config", c]);
    assert_eq!(value_of(&out, "atoms"), 5000.0);
    assert!((value_of(&out, "r") - 0.392).abs() < 1e-3);
    let out = stdout(&["validate", "--config", c, "--atoms", "2e4"]);
    assert_eq!(value_of(&out, "atoms"), 20000.0);
}

#[test]
fn bad_config_fails_with_field_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "sigma_b = \"lots\"\n").unwrap();
    let out = sqclock(&["fringe", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sigma_b"), "{err}");

    let out = sqclock(&["fringe", "--set", "no_such_key=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));

    let out = sqclock(&["fringe", "--config", "/nonexistent/run.toml"]);
    assert!(!out.status.success());
}

#[test]
fn unwritable_output_is_an_error() {
    let out = sqclock(&["validate", "--out", "/nonexistent/dir/out.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot write"));
}

#[test]
fn allan_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("y.csv");
    let text: String = std::iter::once("t,y\n".to_string())
        .chain((0..64).map(|k| format!("{k},{}\n", if k % 2 == 0 { 1.0 } else { -1.0 })))
        .collect();
    std::fs::write(&input, text).unwrap();
    let out = stdout(&[
        "allan",
        "--input",
        input.to_str().unwrap(),
        "--column",
        "1",
        "--dt",
        "2s",
    ]);
    let rows = data_rows(&out);
    assert_eq!(rows[0][0], "2");
    assert!((rows[0][1].parse::<f64>().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(rows[0][2], "63");
    assert!(Path::new(&input).exists());
}

#[test]
fn variance_scan_and_phase_scan_run() {
    let out = stdout(&["variance-scan", "--deltas", "-6k,-5.5k,0", "--shots", "500"]);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2][11], "", "zero slope leaves the phase figure empty");
    let out = stdout(&[
        "phase-scan",
        "--adjust-times",
        "0..600us:300us",
        "--shots",
        "2000",
    ]);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 3);
    let db: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(db[1] < db[0] && db[1] < db[2], "{db:?}");
}
