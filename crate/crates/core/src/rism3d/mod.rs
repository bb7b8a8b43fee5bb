//! Three-dimensional RISM around a solute on a periodic cubic grid.

pub mod cube;
pub mod fft;
pub mod grid;
pub mod solver;

pub use cube::Cube;
pub use fft::Fft3;
pub use grid::Grid3D;
pub use solver::{
    binding_energy, build_potential, convolve, excess_chemical_potential, residual_of, solve_3drism, solvent_point_charges,
    solvent_species, RismLogEntry, RismOptions, RismSolution, SiteField, SolventCharges, SolventKernel, Species,
    POTENTIAL_CAP_KT,
};
