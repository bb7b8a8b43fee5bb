//! Site-site pair potentials in atomic units (distances in bohr, energies in
//! hartree). Lennard-Jones parameters come in angstrom and J/mol.

use crate::model::LennardJones;
use crate::units::{angstrom_to_bohr, j_per_mol_to_hartree};

/// Default width of the erf split between short- and long-range Coulomb, bohr.
pub const ERF_SPLIT: f64 = 1.0 * crate::units::ANGSTROM_IN_BOHR;

/// LJ parameters converted once to atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LjAu {
    pub sigma: f64,
    pub epsilon: f64,
}

impl From<LennardJones> for LjAu {
    fn from(p: LennardJones) -> Self {
        LjAu {
            sigma: angstrom_to_bohr(p.sigma),
            epsilon: j_per_mol_to_hartree(p.epsilon),
        }
    }
}

impl LjAu {
    /// Lorentz-Berthelot combination.
    pub fn mix(&self, o: &LjAu) -> LjAu {
        LjAu {
            sigma: 0.5 * (self.sigma + o.sigma),
            epsilon: (self.epsilon * o.epsilon).sqrt(),
        }
    }

    #[inline]
    pub fn energy(&self, r: f64) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        let s6 = (self.sigma / r).powi(6);
        4.0 * self.epsilon * (s6 * s6 - s6)
    }
}

/// Short-range Coulomb q_a q_b erfc(r/η)/r.
#[inline]
pub fn coulomb_short(qq: f64, r: f64, eta: f64) -> f64 {
    qq * libm::erfc(r / eta) / r
}

/// Long-range Coulomb q_a q_b erf(r/η)/r.
#[inline]
pub fn coulomb_long(qq: f64, r: f64, eta: f64) -> f64 {
    if r < 1e-8 * eta {
        return qq * 2.0 / (eta * std::f64::consts::PI.sqrt());
    }
    qq * libm::erf(r / eta) / r
}

/// 3D Fourier transform of the long-range Coulomb part at k > 0.
#[inline]
pub fn coulomb_long_k(qq: f64, k: f64, eta: f64) -> f64 {
    4.0 * std::f64::consts::PI * qq * (-0.25 * k * k * eta * eta).exp() / (k * k)
}
