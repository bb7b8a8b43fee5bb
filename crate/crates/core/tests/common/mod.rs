#![allow(dead_code)]

use std::sync::OnceLock;

use rismvqe::model::{validate_config, RunConfig, SolventModel};
use rismvqe::solvent::{solve_1d_rism, RadialGrid, Rism1dOptions, SolventSusceptibility};

pub const WATER: &str = "O 0.0 0.0 0.1173\nH 0.0 0.7572 -0.4692\nH 0.0 -0.7572 -0.4692";
pub const AMMONIUM: &str = "N 0 0 0\nH 0.5947 0.5947 0.5947\nH -0.5947 -0.5947 0.5947\nH -0.5947 0.5947 -0.5947\nH 0.5947 -0.5947 -0.5947";

/// Neat TIP3P water response on the default radial grid, solved once.
pub fn water_chi() -> &'static SolventSusceptibility {
    static CHI: OnceLock<SolventSusceptibility> = OnceLock::new();
    CHI.get_or_init(|| {
        solve_1d_rism(&SolventModel::tip3p(), &RadialGrid::default_water(), &Rism1dOptions::default())
            .expect("neat water converges")
            .susceptibility
    })
}

/// Config text for `atoms` (angstrom) with extra TOML tables appended.
pub fn config(atoms: &str, basis: &str, charge: i32, solver: &str, points: usize, spacing: f64) -> RunConfig {
    let text = format!(
        "basis = \"{basis}\"\ncharge = {charge}\n[geometry]\natoms = \"\"\"\n{atoms}\n\"\"\"\n\
         [solver]\n{solver}\n[grid]\npoints = {points}\nspacing = {spacing}\n"
    );
    validate_config(&text, None).expect("valid test configuration")
}

pub fn vqe(e: usize, o: usize) -> String {
    format!("method = \"vqe\"\nelectrons = {e}\norbitals = {o}")
}

pub fn exact(e: usize, o: usize) -> String {
    format!("method = \"exact\"\nelectrons = {e}\norbitals = {o}")
}

pub const RHF: &str = "method = \"rhf\"";
