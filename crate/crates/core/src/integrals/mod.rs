//! One- and two-electron integrals over contracted Cartesian Gaussians by the
//! McMurchie-Davidson scheme, plus the point-charge kernel used for the
//! solvent operator and the solute electrostatic potential.

pub mod eri;
pub mod hermite;
pub mod points;

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::basis::{cartesian_components, shell_offsets, Shell};
use crate::error::Result;
use crate::model::{nuclear_repulsion, Atom};

pub use eri::{electron_repulsion, Eri};
use hermite::{hermite_coulomb, CoulombScratch, Hermite1d, TuvIndex};
pub use points::{esp_at_points, point_charge_operator, PairExpansion};

/// Integrals defining the isolated-solute Hamiltonian.
#[derive(Debug, Clone)]
pub struct IntegralTensors {
    pub overlap: DMatrix<f64>,
    pub kinetic: DMatrix<f64>,
    pub nuclear: DMatrix<f64>,
    pub eri: Eri,
    pub nuclear_repulsion: f64,
}

impl IntegralTensors {
    pub fn compute(shells: &[Shell], atoms: &[Atom]) -> Result<Self> {
        let core = core_integrals(shells, atoms)?;
        Ok(IntegralTensors {
            overlap: core.overlap,
            kinetic: core.kinetic,
            nuclear: core.nuclear,
            eri: electron_repulsion(shells),
            nuclear_repulsion: core.nuclear_repulsion,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.overlap.nrows()
    }

    /// T + V_nuc.
    pub fn core_hamiltonian(&self) -> DMatrix<f64> {
        &self.kinetic + &self.nuclear
    }
}

#[derive(Debug, Clone)]
pub struct CoreIntegrals {
    pub overlap: DMatrix<f64>,
    pub kinetic: DMatrix<f64>,
    pub nuclear: DMatrix<f64>,
    pub nuclear_repulsion: f64,
}

/// Overlap, kinetic and nuclear-attraction matrices and the nuclear repulsion.
pub fn core_integrals(shells: &[Shell], atoms: &[Atom]) -> Result<CoreIntegrals> {
    let e_nn = nuclear_repulsion(atoms)?;
    let charges: Vec<([f64; 3], f64)> = atoms.iter().map(|a| (a.position, f64::from(a.z))).collect();
    let (s, t, v) = one_electron(shells, &charges);
    Ok(CoreIntegrals {
        overlap: s,
        kinetic: t,
        nuclear: v,
        nuclear_repulsion: e_nn,
    })
}

/// Attraction matrix -sum_C Z_C <a|1/|r - C||b> for arbitrary charges,
/// computed shell pair by shell pair. Used for V_nuc and as a reference for
/// the batched point-charge engine.
pub fn attraction_matrix(shells: &[Shell], charges: &[([f64; 3], f64)]) -> DMatrix<f64> {
    one_electron(shells, charges).2
}

fn one_electron(
    shells: &[Shell],
    charges: &[([f64; 3], f64)],
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = crate::basis::n_functions(shells);
    let off = shell_offsets(shells);
    let mut s = DMatrix::zeros(n, n);
    let mut t = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    let mut scratch = CoulombScratch::default();
    for (ia, sa) in shells.iter().enumerate() {
        for (ib, sb) in shells.iter().enumerate().take(ia + 1) {
            let l = sa.l + sb.l;
            let tuv = TuvIndex::new(l);
            let mut rbuf = vec![0.0; tuv.dim.pow(3)];
            let ca = cartesian_components(sa.l);
            let cb = cartesian_components(sb.l);
            let xab = [
                sa.center[0] - sb.center[0],
                sa.center[1] - sb.center[1],
                sa.center[2] - sb.center[2],
            ];
            for (&a, &da) in sa.exponents.iter().zip(&sa.coefficients) {
                for (&b, &db) in sb.exponents.iter().zip(&sb.coefficients) {
                    let p = a + b;
                    let pc = [
                        (a * sa.center[0] + b * sb.center[0]) / p,
                        (a * sa.center[1] + b * sb.center[1]) / p,
                        (a * sa.center[2] + b * sb.center[2]) / p,
                    ];
                    let h: [Hermite1d; 3] = [
                        Hermite1d::new(sa.l, sb.l + 2, a, b, xab[0]),
                        Hermite1d::new(sa.l, sb.l + 2, a, b, xab[1]),
                        Hermite1d::new(sa.l, sb.l + 2, a, b, xab[2]),
                    ];
                    let sp = (PI / p).sqrt();
                    let s1 = |k: usize, i: usize, j: usize| h[k].get(i, j, 0) * sp;
                    let t1 = |k: usize, i: usize, j: usize| {
                        let mut val = -2.0 * b * b * s1(k, i, j + 2) + b * (2 * j + 1) as f64 * s1(k, i, j);
                        if j >= 2 {
                            val -= 0.5 * (j * (j - 1)) as f64 * s1(k, i, j - 2);
                        }
                        val
                    };
                    let coef = da * db;
                    // nuclear attraction Hermite sums, one R cube per charge
                    let mut rsum = vec![0.0; tuv.dim.pow(3)];
                    for &(c, z) in charges {
                        let pcv = [pc[0] - c[0], pc[1] - c[1], pc[2] - c[2]];
                        hermite_coulomb(l, p, pcv, &mut scratch, &mut rbuf);
                        for &(_, _, _, o) in &tuv.entries {
                            rsum[o] += z * rbuf[o];
                        }
                    }
                    for (mu, ijk_a) in ca.iter().enumerate() {
                        for (nu, ijk_b) in cb.iter().enumerate() {
                            let f = coef * Shell::component_scale(*ijk_a) * Shell::component_scale(*ijk_b);
                            let sx = s1(0, ijk_a[0], ijk_b[0]);
                            let sy = s1(1, ijk_a[1], ijk_b[1]);
                            let sz = s1(2, ijk_a[2], ijk_b[2]);
                            let ov = sx * sy * sz;
                            let kin = t1(0, ijk_a[0], ijk_b[0]) * sy * sz
                                + sx * t1(1, ijk_a[1], ijk_b[1]) * sz
                                + sx * sy * t1(2, ijk_a[2], ijk_b[2]);
                            let mut pot = 0.0;
                            for &(tt, uu, vv, o) in &tuv.entries {
                                let e = h[0].get(ijk_a[0], ijk_b[0], tt)
                                    * h[1].get(ijk_a[1], ijk_b[1], uu)
                                    * h[2].get(ijk_a[2], ijk_b[2], vv);
                                pot += e * rsum[o];
                            }
                            pot *= -2.0 * PI / p;
                            let (i, j) = (off[ia] + mu, off[ib] + nu);
                            s[(i, j)] += f * ov;
                            t[(i, j)] += f * kin;
                            v[(i, j)] += f * pot;
                        }
                    }
                }
            }
            if ia != ib {
                for mu in 0..ca.len() {
                    for nu in 0..cb.len() {
                        let (i, j) = (off[ia] + mu, off[ib] + nu);
                        s[(j, i)] = s[(i, j)];
                        t[(j, i)] = t[(i, j)];
                        v[(j, i)] = v[(i, j)];
                    }
                }
            }
        }
    }
    (s, t, v)
}
