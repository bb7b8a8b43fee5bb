//! Pure-solvent site-site susceptibility: radial transforms, the neat-solvent
//! RISM solver and the tabulated χ(k).

pub mod radial;
pub mod table;
pub mod xrism;

pub use radial::RadialGrid;
pub use table::{solvent_hash, ChiInterpolator, SolventSusceptibility};
pub use xrism::{intramolecular_omega, omega_matrix, solve_1d_rism, Rism1dOptions, Rism1dSolution};
