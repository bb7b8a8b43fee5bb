//! 3D-RISM coupled to a statevector VQE: Gaussian-basis electronic structure,
//! qubit Hamiltonians, and integral-equation solvation.

pub mod basis;
pub mod boys;
pub mod driver;
pub mod error;
pub mod hamiltonian;
pub mod integrals;
pub mod linalg;
pub mod mdiis;
pub mod model;
pub mod norm;
pub mod optimize;
pub mod pauli;
pub mod potential;
pub mod rism3d;
pub mod scan;
pub mod scf;
pub mod solvent;
pub mod units;
pub mod vqe;

pub use error::{Error, Result};
