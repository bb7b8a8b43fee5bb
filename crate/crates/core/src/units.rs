//! Physical constants and unit conversions. Everything inside the crate runs in
//! hartree atomic units except the solvent grid, which keeps angstrom lengths.

pub const BOHR_IN_ANGSTROM: f64 = 0.529_177_210_903;
pub const ANGSTROM_IN_BOHR: f64 = 1.0 / BOHR_IN_ANGSTROM;

/// 1 hartree expressed in J/mol.
pub const HARTREE_IN_J_PER_MOL: f64 = 2_625_499.639_479_9;

/// Boltzmann constant in hartree per kelvin.
pub const BOLTZMANN_HARTREE: f64 = 3.166_811_563_455_6e-6;

pub const HARTREE_IN_EV: f64 = 27.211_386_245_988;

pub fn angstrom_to_bohr(x: f64) -> f64 {
    x * ANGSTROM_IN_BOHR
}

pub fn bohr_to_angstrom(x: f64) -> f64 {
    x * BOHR_IN_ANGSTROM
}

pub fn j_per_mol_to_hartree(e: f64) -> f64 {
    e / HARTREE_IN_J_PER_MOL
}

/// Thermal energy k_B T in hartree.
pub fn thermal_energy(temperature: f64) -> f64 {
    BOLTZMANN_HARTREE * temperature
}
