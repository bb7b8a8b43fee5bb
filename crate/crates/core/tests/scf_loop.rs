mod common;

use common::*;
use rismvqe::driver::{run_scf, run_scf_with, DriverOptions, ScfOutcome, System};
use rismvqe::norm::norm_report;
use rismvqe::scan::{run_scan, ScanSpec};
use rismvqe::solvent::{solve_1d_rism, RadialGrid, Rism1dOptions};

fn assert_identities(out: &ScfOutcome) {
    for r in &out.history {
        assert!((r.helmholtz - (r.e_solute + r.dmu)).abs() <= 1e-12, "cycle {}", r.cycle);
        assert!((r.e_potential - (r.e_solute + r.e_bind)).abs() <= 1e-12);
        assert!((r.v_solvent - (r.e_solvated - r.e_solute)).abs() <= 1e-12);
    }
}

#[test]
fn decoupled_solvent_reproduces_the_gas_phase_in_one_cycle() {
    for solver in [RHF.to_string(), vqe(4, 4)] {
        let mut cfg = config(WATER, "STO-3G", 0, &solver, 32, 0.5);
        cfg.solvent = cfg.solvent.decoupled();
        let chi = solve_1d_rism(&cfg.solvent, &RadialGrid::default_water(), &Rism1dOptions::default())
            .unwrap()
            .susceptibility;
        let solv = run_scf(&cfg, Some(&chi), &DriverOptions::default()).unwrap();
        let gas = run_scf(&cfg, None, &DriverOptions { gas: true, ..Default::default() }).unwrap();
        assert!(solv.converged);
        assert_eq!(solv.history.len(), 1);
        let (s, g) = (solv.last(), gas.last());
        assert_eq!(s.dmu, 0.0);
        assert_eq!(s.helmholtz, g.helmholtz);
        assert_eq!(s.e_potential, s.e_solute);
        assert_eq!(s.n_charges, 0);
        let rism = solv.rism.as_ref().unwrap();
        for f in &rism.fields {
            assert!(f.g.iter().all(|&x| x == 1.0) && f.c.iter().all(|&x| x == 0.0));
        }
    }
}

#[test]
fn gas_mode_skips_the_solvent() {
    let cfg = config(WATER, "STO-3G", 0, RHF, 32, 0.5);
    let out = run_scf(&cfg, None, &DriverOptions { gas: true, ..Default::default() }).unwrap();
    assert_eq!(out.history.len(), 1);
    let r = out.last();
    assert_eq!((r.dmu, r.e_bind, r.v_solvent), (0.0, 0.0, 0.0));
    assert_eq!(r.helmholtz, r.e_solute);
    assert!(out.rism.is_none() && out.grid.is_none());
    // standard STO-3G water RHF energy near this geometry
    assert!((r.helmholtz + 74.963).abs() < 2e-3, "{}", r.helmholtz);
}

#[test]
fn solvated_rhf_separates_the_gas_energy() {
    let cfg = config(WATER, "STO-3G", 0, RHF, 32, 0.5);
    let out = run_scf(&cfg, Some(water_chi()), &DriverOptions::default()).unwrap();
    assert!(out.converged);
    assert_identities(&out);
    // oracle: gas energy functional of the final density
    let sys = System::new(&cfg).unwrap();
    let d = &out.density;
    let h = sys.ints.core_hamiltonian();
    let g = sys.eri.fock_2e(d);
    let e_iso = sys.ints.nuclear_repulsion + d.component_mul(&h).sum() + 0.5 * d.component_mul(&g).sum();
    assert!((out.last().e_solute - e_iso).abs() < 1e-10, "{} vs {e_iso}", out.last().e_solute);
    // neutral water: small solvation free energy, polarisation lowers H_solv
    let r = out.last();
    assert!(r.dmu.abs() < 0.03);
    assert!(r.v_solvent < 0.0);
    let csv = out.csv();
    assert_eq!(csv.lines().count(), out.history.len() + 1);
    assert_eq!(csv.lines().next().unwrap(), ScfOutcome::CSV_HEADER);
}

#[test]
fn vqe_matches_exact_diagonalisation_in_the_loop() {
    let v = run_scf(&config(WATER, "STO-3G", 0, &vqe(4, 4), 32, 0.5), Some(water_chi()), &DriverOptions::default())
        .unwrap();
    let x = run_scf(&config(WATER, "STO-3G", 0, &exact(4, 4), 32, 0.5), Some(water_chi()), &DriverOptions::default())
        .unwrap();
    assert!(v.converged && x.converged);
    assert_identities(&v);
    assert!((v.last().helmholtz - x.last().helmholtz).abs() < 1e-6);
    let gamma = v.rdm1.as_ref().unwrap();
    assert!((gamma.trace() - 4.0).abs() < 1e-10);
    // the tail of |dA| does not grow above the convergence threshold (below it RISM noise dominates)
    let d: Vec<f64> = v.history.windows(2).map(|w| (w[1].helmholtz - w[0].helmholtz).abs()).collect();
    for w in d[d.len().saturating_sub(5)..].windows(2) {
        assert!(w[1] <= w[0] * 1.5 + 1e-7, "{d:?}");
    }
}

#[test]
fn warm_start_reaches_the_same_state_with_less_work() {
    let cfg = config(WATER, "STO-3G", 0, &vqe(2, 2), 32, 0.5);
    let sys = System::new(&cfg).unwrap();
    let opts = DriverOptions::default();
    let cold = run_scf_with(&cfg, &sys, Some(water_chi()), &opts, &Default::default()).unwrap();
    let warm = run_scf_with(&cfg, &sys, Some(water_chi()), &opts, &cold.warm_start()).unwrap();
    assert!((cold.last().helmholtz - warm.last().helmholtz).abs() < 1e-6);
    let iters = |o: &ScfOutcome| o.history.iter().map(|r| r.rism_iterations).sum::<usize>();
    assert!(iters(&warm) < iters(&cold), "{} vs {}", iters(&warm), iters(&cold));
    assert!(warm.history.len() < cold.history.len());
}

#[test]
fn scan_rows_satisfy_the_helmholtz_identity() {
    let cfg = config("H 0 0 -0.37\nH 0 0 0.37", "STO-3G", 0, RHF, 32, 0.5);
    let spec = ScanSpec { pair: (0, 1), start: 0.6, stop: 1.0, step: 0.2 };
    let warm = run_scan(&cfg, &spec, Some(water_chi()), &DriverOptions::default(), true).unwrap();
    let cold = run_scan(&cfg, &spec, Some(water_chi()), &DriverOptions::default(), false).unwrap();
    assert_eq!(warm.points.len(), 3);
    assert_eq!(warm.n_failed(), 0);
    for (a, b) in warm.rows().zip(cold.rows()) {
        assert!((a.helmholtz - a.dmu - a.e_solute).abs() <= 1e-12);
        assert!((a.helmholtz - b.helmholtz).abs() < 1e-6);
    }
    let rows: Vec<_> = warm.rows().collect();
    assert!((rows[0].r - 0.6).abs() < 1e-12 && (rows[2].r - 1.0).abs() < 1e-12);
    // H2 minimum near 0.71 A
    assert!(rows[1].e_solute < rows[0].e_solute && rows[1].e_solute < rows[2].e_solute);
    assert_eq!(warm.csv().lines().count(), 4);
}

#[test]
fn scan_records_failed_points_and_continues() {
    let mut cfg = config("H 0 0 -0.37\nH 0 0 0.37", "STO-3G", 0, RHF, 32, 0.5);
    cfg.convergence.max_cycles = 1;
    let spec = ScanSpec { pair: (0, 1), start: 0.7, stop: 0.8, step: 0.1 };
    let out = run_scan(&cfg, &spec, Some(water_chi()), &DriverOptions::default(), true).unwrap();
    assert_eq!(out.points.len(), 2);
    assert_eq!(out.n_failed(), 2);
    assert!(out.csv().lines().nth(1).unwrap().contains("NaN"));
}

#[test]
fn zero_solvent_charge_leaves_lambda_unchanged() {
    let mut cfg = config(WATER, "STO-3G", 0, RHF, 32, 0.5);
    cfg.solvent = cfg.solvent.decoupled();
    let chi = solve_1d_rism(&cfg.solvent, &RadialGrid::default_water(), &Rism1dOptions::default())
        .unwrap()
        .susceptibility;
    let rows = norm_report(&cfg, &[(2, 2)], Some(&chi), &DriverOptions::default()).unwrap();
    assert_eq!(rows[0].lambda_gas, rows[0].lambda_solvated);
    assert_eq!(format!("{:.1}", rows[0].ratio()), "100.0");
    assert!((rows[0].lambda_gas - 72.0).abs() < 0.05 * 72.0);
}
