use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

const WATER: &str = "O 0.0 0.0 0.1173\nH 0.0 0.7572 -0.4692\nH 0.0 -0.7572 -0.4692";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rismvqe"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, atoms: &str, extra: &str) -> PathBuf {
    let p = dir.join(name);
    let text = format!(
        "basis = \"STO-3G\"\n{extra}\n[geometry]\natoms = \"\"\"\n{atoms}\n\"\"\"\n[grid]\npoints = 32\nspacing = 0.5\n"
    );
    fs::write(&p, text).unwrap();
    p
}

/// Shared neat-water table so each solvated test skips the 1D solve.
fn chi_table() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    let dir = DIR.get_or_init(|| {
        let d = TempDir::new().unwrap();
        let cfg = write_config(d.path(), "w.toml", WATER, "");
        let o = run(&["chi", cfg.to_str().unwrap(), "--out", d.path().join("water.chi").to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        d
    });
    Box::leak(dir.path().join("water.chi").into_boxed_path())
}

#[test]
fn missing_config_is_an_input_error_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["scf", "/nonexistent/run.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn malformed_inputs_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "basis = \"STO-3G\"\n[geometry]\natoms = \"X 0 0 0\"\n").unwrap();
    let out = tmp.path().join("o");
    assert_eq!(code(&run(&["scf", bad.to_str().unwrap(), "--out", out.to_str().unwrap()])), 2);
    let good = write_config(tmp.path(), "g.toml", WATER, "");
    let g = good.to_str().unwrap();
    // vqe without an active space
    assert_eq!(code(&run(&["scf", g, "--gas", "--solver", "vqe", "--out", out.to_str().unwrap()])), 2);
    // odd frozen core
    assert_eq!(code(&run(&["scf", g, "--gas", "--solver", "vqe", "--active", "3,2"])), 2);
    // scan over a non-existent atom
    let o = run(&["scan", g, "--gas", "--pair", "1,4", "--start", "1", "--stop", "2", "--step", "0.5"]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn gas_summary_has_four_energy_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "w.toml", WATER, "");
    let out = tmp.path().join("gas");
    let o = run(&[
        "scf",
        cfg.to_str().unwrap(),
        "--gas",
        "--solver",
        "vqe",
        "--active",
        "8,6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row.len(), 4);
    for v in &row {
        assert_eq!(v.split('.').nth(1).unwrap().len(), 4, "{v}");
    }
    assert_eq!(row[2], "0.0000");
    assert_eq!(row[0], row[1]);
    assert!(out.join("cycles.csv").exists() && out.join("summary.txt").exists());
    assert!(!out.join("rism.csv").exists());
}

#[test]
fn solvated_run_writes_deterministic_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "w.toml", WATER, "");
    let chi = chi_table().to_str().unwrap();
    let mut logs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = run(&["scf", cfg.to_str().unwrap(), "--chi", chi, "--cube", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        logs.push((fs::read(out.join("cycles.csv")).unwrap(), fs::read(out.join("g_O.cube")).unwrap()));
    }
    assert_eq!(logs[0], logs[1]);
    let dir = tmp.path().join("a");
    let cube = rismvqe::rism3d::Cube::read(&dir.join("g_H.cube")).unwrap();
    assert_eq!(cube.counts, [32, 32, 32]);
    assert_eq!(cube.atoms.len(), 3);
    assert!(cube.values.iter().all(|&g| g >= 0.0));
    let csv = fs::read_to_string(dir.join("cycles.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    // A = E_solute + dmu as printed
    assert!((last[1] - last[2] - last[3]).abs() < 1e-11);
}

#[test]
fn loop_failure_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "w.toml", WATER, "[convergence]\nmax_cycles = 1");
    let out = tmp.path().join("o");
    let o = run(&["scf", cfg.to_str().unwrap(), "--chi", chi_table().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed to converge"));
}

#[test]
fn gas_scan_has_inclusive_endpoints() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "h2.toml", "H 0 0 0\nH 0 0 0.74", "");
    let out = tmp.path().join("scan");
    let o = run(&[
        "scan",
        cfg.to_str().unwrap(),
        "--gas",
        "--pair",
        "1,2",
        "--start",
        "1.0",
        "--stop",
        "2.0",
        "--step",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["1.0000", "1.5000", "2.0000"]);
    for r in &rows {
        let v: Vec<f64> = r[1..5].iter().map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - v[2] - v[3]).abs() < 1e-11);
    }
}

#[test]
fn gas_norm_report_is_exactly_one_hundred_percent() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "w.toml", WATER, "");
    let out = tmp.path().join("n");
    let o = run(&["norm-report", cfg.to_str().unwrap(), "--gas", "--spaces", "2,2", "4,4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.matches("100.0%").count(), 2, "{text}");
    assert!(fs::read_to_string(out.join("norms.csv")).unwrap().lines().count() == 3);
}
