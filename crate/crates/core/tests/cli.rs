use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ldx::config::heston_to_string;
use ldx::heston::HestonParams;

fn ldx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldx")).args(args).env_remove("LDX_THREADS").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn toy_config(dir: &Path) -> String {
    write(dir, "toy.cfg", &heston_to_string(&HestonParams::toy())).display().to_string()
}

fn rows(out: &Output) -> Vec<Vec<String>> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# "), "missing config comment");
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn heston_grid_has_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let out = ldx(&["heston", "--config", &cfg, "--u-grid=-2:2:101"]);
    assert_eq!(out.status.code(), Some(0));
    let table = rows(&out);
    assert_eq!(table[0], ["u", "lambda0", "dlambda0", "d2lambda0", "lambda1", "lambda2", "u_min", "u_max"]);
    assert_eq!(table.len(), 102);
    for row in &table[1..] {
        assert_eq!(row.len(), 8);
        assert!(row.iter().all(|v| v.parse::<f64>().unwrap().is_finite()));
    }
    let mid: f64 = table[51][1].parse().unwrap();
    assert_eq!(mid, 0.0);
}

#[test]
fn values_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let out = ldx(&["heston", "--config", &cfg, "--u-grid=0.5:1:2"]);
    let table = rows(&out);
    let l0: f64 = table[1][1].parse().unwrap();
    assert_eq!(l0, ldx::heston::lambda0(&HestonParams::toy(), 0.5).unwrap());
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let path = dir.path().join("rate.csv");
    let args = ["rate", "--config", &cfg, "--z-grid=-1:1:9"];
    let stdout = ldx(&args).stdout;
    let mut with_out: Vec<&str> = args.to_vec();
    let p = path.display().to_string();
    with_out.extend(["--out", &p]);
    assert_eq!(ldx(&with_out).status.code(), Some(0));
    assert_eq!(std::fs::read(&path).unwrap(), stdout);
}

#[test]
fn domain_violation_names_the_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let out = ldx(&["heston", "--config", &cfg, "--u-grid=-4:3:8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("u = -4"));
}

#[test]
fn usage_and_config_errors_exit_64() {
    assert_eq!(ldx(&[]).status.code(), Some(64));
    assert_eq!(ldx(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(ldx(&["rate", "--gaussian"]).status.code(), Some(64));
    assert_eq!(ldx(&["laplace", "--problem", "quartic"]).status.code(), Some(64));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "r = 0\nr = 1\n").display().to_string();
    assert_eq!(ldx(&["heston", "--config", &bad, "--u-grid=0:1:3"]).status.code(), Some(64));
    let cfg = toy_config(dir.path());
    assert_eq!(ldx(&["heston", "--config", &cfg, "--u-grid=0:1"]).status.code(), Some(64));
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(ldx(&["--help"]).status.code(), Some(0));
    assert_eq!(ldx(&["--version"]).status.code(), Some(0));
    assert_eq!(ldx(&["mc-validate", "--help"]).status.code(), Some(0));
}

#[test]
fn missing_file_is_an_io_error() {
    let out = ldx(&["heston", "--config", "/nonexistent/toy.cfg", "--u-grid=0:1:3"]);
    assert_eq!(out.status.code(), Some(74));
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let out = ldx(&["heston", "--config", &cfg, "--u-grid=0:1:3", "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(out.status.code(), Some(74));
}

#[test]
fn invalid_parameters_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = HestonParams { rho: 1.5, ..HestonParams::toy() };
    let cfg = write(dir.path(), "rho.cfg", &heston_to_string(&p)).display().to_string();
    assert_eq!(ldx(&["heston", "--config", &cfg, "--u-grid=0:1:3"]).status.code(), Some(2));
    assert_eq!(ldx(&["bounds", "--gaussian", "--set", "0.9:1.1", "--x", "2", "--eps", "0.1"]).status.code(), Some(2));
    assert_eq!(ldx(&["laplace", "--eps", "0.1,-0.1"]).status.code(), Some(2));
}

#[test]
fn laplace_reports_known_coefficients() {
    let out = ldx(&["laplace", "--problem", "cubic"]);
    assert_eq!(out.status.code(), Some(0));
    let table = rows(&out);
    let order1: f64 = table[1][5].parse().unwrap();
    assert!((order1 - 5.0 / 24.0).abs() < 1e-6);
    let fitted: f64 = table[1][6].parse().unwrap();
    assert!(fitted >= 1.8);
}

#[test]
fn bounds_rows_bracket_the_gaussian_mass() {
    let out = ldx(&["bounds", "--gaussian", "--set", "0.9:1.1", "--x", "1", "--eps", "0.1"]);
    let table = rows(&out);
    assert_eq!(table[0][0], "direction");
    let up: f64 = table[1][10].parse().unwrap();
    let lo: f64 = table[2][10].parse().unwrap();
    let mass = ldx::bounds::normal_mass(0.0, 0.1, 0.9, 1.1);
    assert!(lo <= mass && mass <= up);
}

#[test]
fn riccati_trajectory_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "toy.model", "m = 1\nn = 1\nb = 1, 0\nalpha1 = 1, 0, 0, 1\nbeta1 = -1, -0.5\n");
    let m = model.display().to_string();
    let out = ldx(&["riccati", "--model", &m, "--u=-0.5,-0.5", "--t-grid", "0:1:5"]);
    assert_eq!(out.status.code(), Some(0));
    let table = rows(&out);
    assert_eq!(table[0], ["t", "psi_1", "psi_2", "phi"]);
    assert_eq!(table[1][1].parse::<f64>().unwrap(), -0.5);
    let out = ldx(&["riccati", "--model", &m, "--u=-0.5,-0.5", "--series", "2", "--x", "1,0"]);
    assert_eq!(rows(&out).len(), 4);
    let out = ldx(&["riccati", "--model", &m, "--u=4,0", "--t-grid", "0:3:4"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn family_certification_passes_for_the_toy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let out = ldx(&["family", "--config", &cfg, "--certify-u", "0.5", "--eps", "0.1,0.05,0.025,0.0125,0.00625"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(rows(&out)[1..].iter().all(|r| r[5] == "true"));
}

#[test]
fn thread_flag_matches_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let args = ["mc-validate", "--config", &cfg, "--paths", "3000", "--steps", "20", "--eps", "0.1"];
    let base = ldx(&args).stdout;
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "5"]);
    assert_eq!(ldx(&threaded).stdout, base);
    let env = Command::new(env!("CARGO_BIN_EXE_ldx")).args(args).env("LDX_THREADS", "2").output().unwrap();
    assert_eq!(env.stdout, base);
    let bad = Command::new(env!("CARGO_BIN_EXE_ldx")).args(args).env("LDX_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(64));
}
