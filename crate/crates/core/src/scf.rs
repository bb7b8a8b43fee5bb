//! Closed-shell Hartree-Fock with DIIS, an optional extra one-electron
//! operator, and MP2 natural orbitals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrals::IntegralTensors;
use crate::linalg::{diis_weights, eigh, inverse_sqrt};

#[derive(Debug, Clone)]
pub struct RhfOptions {
    pub max_iterations: usize,
    pub density_tolerance: f64,
    pub energy_tolerance: f64,
    pub diis_size: usize,
}

impl Default for RhfOptions {
    fn default() -> Self {
        RhfOptions {
            max_iterations: 300,
            density_tolerance: 1e-8,
            energy_tolerance: 1e-10,
            diis_size: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RhfResult {
    /// AO x MO, orthonormal under S, columns by ascending orbital energy.
    pub coefficients: DMatrix<f64>,
    pub orbital_energies: DVector<f64>,
    /// D = 2 C_occ C_occ^T
    pub density: DMatrix<f64>,
    /// Includes the extra operator's expectation when present.
    pub electronic_energy: f64,
    pub total_energy: f64,
    pub n_occupied: usize,
    pub converged: bool,
    pub iterations: usize,
    pub commutator_norm: f64,
    /// Total energy after each iteration.
    pub history: Vec<f64>,
}

/// Dense two-electron tensor, index `((i*n + j)*n + k)*n + l`.
pub struct DenseEri {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseEri {
    pub fn new(ints: &IntegralTensors) -> Self {
        DenseEri {
            n: ints.n_basis(),
            data: ints.eri.to_dense(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l]
    }

    /// Two-electron part of the closed-shell Fock matrix, J - K/2.
    pub fn fock_2e(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..n {
                    let row_j = &self.data[((i * n + j) * n + k) * n..((i * n + j) * n + k + 1) * n];
                    let row_k = &self.data[((i * n + k) * n + j) * n..((i * n + k) * n + j + 1) * n];
                    for l in 0..n {
                        s += d[(k, l)] * (row_j[l] - 0.5 * row_k[l]);
                    }
                }
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        g
    }
}

fn density_from(c: &DMatrix<f64>, nocc: usize) -> DMatrix<f64> {
    let occ = c.columns(0, nocc);
    2.0 * &occ * occ.transpose()
}

/// RHF with the default options and a core-Hamiltonian guess.
pub fn run_rhf(ints: &IntegralTensors, n_electrons: usize, extra: Option<&DMatrix<f64>>) -> Result<RhfResult> {
    run_rhf_with(ints, &DenseEri::new(ints), n_electrons, extra, None, &RhfOptions::default())
}

/// RHF with explicit options; `guess` is an initial AO density.
pub fn run_rhf_with(
    ints: &IntegralTensors,
    eri: &DenseEri,
    n_electrons: usize,
    extra: Option<&DMatrix<f64>>,
    guess: Option<&DMatrix<f64>>,
    opts: &RhfOptions,
) -> Result<RhfResult> {
    if n_electrons % 2 != 0 {
        return Err(Error::Config(format!("RHF needs an even electron count, got {n_electrons}")));
    }
    let n = ints.n_basis();
    let nocc = n_electrons / 2;
    if nocc > n {
        return Err(Error::Config(format!("{n_electrons} electrons do not fit in {n} basis functions")));
    }
    let s = &ints.overlap;
    let (x, cond) = inverse_sqrt(s);
    if !(cond <= 1e10) {
        return Err(Error::LinearDependence(cond));
    }
    let mut h = ints.core_hamiltonian();
    if let Some(v) = extra {
        if v.nrows() != n || v.ncols() != n {
            return Err(Error::Config("extra operator has the wrong dimension".into()));
        }
        h += v;
    }
    let diagonalize = |f: &DMatrix<f64>| {
        let fo = x.transpose() * f * &x;
        let (e, u) = eigh(&fo);
        (e, &x * u)
    };
    let energy = |d: &DMatrix<f64>, f: &DMatrix<f64>| 0.5 * d.component_mul(&(&h + f)).sum();

    let mut d = match guess {
        Some(g) => g.clone(),
        None => density_from(&diagonalize(&h).1, nocc),
    };
    let mut focks: Vec<DMatrix<f64>> = Vec::new();
    let mut errors: Vec<DMatrix<f64>> = Vec::new();
    let mut e_old = f64::NAN;
    let mut history = Vec::new();
    let mut commutator = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let f = &h + eri.fock_2e(&d);
        let e = energy(&d, &f) + ints.nuclear_repulsion;
        if !e.is_finite() {
            return Err(Error::NonFinite("RHF energy".into()));
        }
        history.push(e);
        let fds = &f * &d * s;
        let err = x.transpose() * (&fds - fds.transpose()) * &x;
        commutator = err.amax();
        focks.push(f.clone());
        errors.push(err);
        if focks.len() > opts.diis_size {
            focks.remove(0);
            errors.remove(0);
        }
        let f_use = loop {
            if focks.len() < 2 {
                break f.clone();
            }
            let m = focks.len();
            let b = DMatrix::from_fn(m, m, |i, j| errors[i].dot(&errors[j]));
            match diis_weights(&b) {
                Some(w) => {
                    let mut acc = DMatrix::zeros(n, n);
                    for (wi, fi) in w.iter().zip(&focks) {
                        acc += *wi * fi;
                    }
                    break acc;
                }
                None => {
                    focks.remove(0);
                    errors.remove(0);
                }
            }
        };
        let (_, c) = diagonalize(&f_use);
        let d_new = density_from(&c, nocc);
        let dd = (&d_new - &d).amax();
        let de = (e - e_old).abs();
        d = d_new;
        e_old = e;
        if dd < opts.density_tolerance && de < opts.energy_tolerance {
            // final orbitals consistent with the converged density
            let f = &h + eri.fock_2e(&d);
            let (eps, c) = diagonalize(&f);
            let d = density_from(&c, nocc);
            let f = &h + eri.fock_2e(&d);
            let e_el = energy(&d, &f);
            let fds = &f * &d * s;
            commutator = (x.transpose() * (&fds - fds.transpose()) * &x).amax();
            log::debug!("RHF converged in {it} iterations, E = {:.12}", e_el + ints.nuclear_repulsion);
            return Ok(RhfResult {
                coefficients: c,
                orbital_energies: eps,
                density: d,
                electronic_energy: e_el,
                total_energy: e_el + ints.nuclear_repulsion,
                n_occupied: nocc,
                converged: true,
                iterations: it,
                commutator_norm: commutator,
                history,
            });
        }
    }
    Err(Error::RhfNotConverged {
        iterations: opts.max_iterations,
        energy: e_old,
        commutator,
    })
}

/// MO-basis two-electron integrals (pq|rs) for the columns of `c`, dense.
pub fn mo_eri(eri: &DenseEri, c: &DMatrix<f64>) -> Vec<f64> {
    let n = eri.n;
    let m = c.ncols();
    // four quarter transforms
    let mut a = eri.data.clone();
    let mut dims = [n, n, n, n];
    for axis in 0..4 {
        let mut out_dims = dims;
        out_dims[axis] = m;
        let total: usize = out_dims.iter().product();
        let mut b = vec![0.0; total];
        let stride_in: usize = dims[axis + 1..].iter().product();
        let stride_out: usize = out_dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        for o in 0..outer {
            for p in 0..m {
                for mu in 0..n {
                    let cv = c[(mu, p)];
                    if cv == 0.0 {
                        continue;
                    }
                    let src = &a[(o * dims[axis] + mu) * stride_in..(o * dims[axis] + mu + 1) * stride_in];
                    let dst = &mut b[(o * m + p) * stride_out..(o * m + p + 1) * stride_out];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += cv * s;
                    }
                }
            }
        }
        a = b;
        dims = out_dims;
    }
    a
}

#[derive(Debug, Clone)]
pub struct NaturalOrbitals {
    /// AO x NO, orthonormal under S, by descending occupation.
    pub coefficients: DMatrix<f64>,
    pub occupations: DVector<f64>,
}

/// Natural orbitals of the unrelaxed MP2 one-particle density matrix.
pub fn mp2_natural_orbitals(rhf: &RhfResult, eri: &DenseEri) -> Result<NaturalOrbitals> {
    if !rhf.converged {
        return Err(Error::Config("MP2 natural orbitals need a converged RHF reference".into()));
    }
    let c = &rhf.coefficients;
    let nmo = c.ncols();
    let no = rhf.n_occupied;
    let nv = nmo - no;
    let eps = &rhf.orbital_energies;
    let g = mo_eri(eri, c);
    let gm = |p: usize, q: usize, r: usize, s: usize| g[((p * nmo + q) * nmo + r) * nmo + s];
    // t[i][j][a][b] = (ia|jb) / (e_i + e_j - e_a - e_b)
    let ti = |i: usize, j: usize, a: usize, b: usize| ((i * no + j) * nv + a) * nv + b;
    let mut t = vec![0.0; no * no * nv * nv];
    for i in 0..no {
        for j in 0..no {
            for a in 0..nv {
                for b in 0..nv {
                    let den = eps[i] + eps[j] - eps[no + a] - eps[no + b];
                    t[ti(i, j, a, b)] = gm(i, no + a, j, no + b) / den;
                }
            }
        }
    }
    let mut gamma = DMatrix::zeros(nmo, nmo);
    for i in 0..no {
        for j in 0..no {
            let mut s = 0.0;
            for k in 0..no {
                for a in 0..nv {
                    for b in 0..nv {
                        s += t[ti(k, i, a, b)] * (2.0 * t[ti(k, j, a, b)] - t[ti(k, j, b, a)]);
                    }
                }
            }
            gamma[(i, j)] -= s;
            gamma[(j, i)] -= s;
        }
        gamma[(i, i)] += 2.0;
    }
    for a in 0..nv {
        for b in 0..nv {
            let mut s = 0.0;
            for k in 0..no {
                for j in 0..no {
                    for cc in 0..nv {
                        s += t[ti(k, j, cc, a)] * (2.0 * t[ti(k, j, cc, b)] - t[ti(k, j, b, cc)]);
                    }
                }
            }
            gamma[(no + b, no + a)] += s;
            gamma[(no + a, no + b)] += s;
        }
    }
    let (occ, u) = eigh(&gamma);
    // descending occupation; near-ties fall back to orbital-energy order
    let energy_order: Vec<f64> = (0..nmo)
        .map(|k| (0..nmo).map(|p| u[(p, k)].powi(2) * eps[p]).sum())
        .collect();
    let mut order: Vec<usize> = (0..nmo).collect();
    order.sort_by(|&a, &b| {
        if (occ[a] - occ[b]).abs() < 1e-10 {
            energy_order[a].total_cmp(&energy_order[b])
        } else {
            occ[b].total_cmp(&occ[a])
        }
    });
    let occupations = DVector::from_iterator(nmo, order.iter().map(|&k| occ[k]));
    let mut coefficients = DMatrix::zeros(c.nrows(), nmo);
    for (dst, &k) in order.iter().enumerate() {
        coefficients.set_column(dst, &(c * u.column(k)));
    }
    Ok(NaturalOrbitals {
        coefficients,
        occupations,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::model::{Atom, BasisName};

    pub fn system(atoms: &[Atom], basis: BasisName) -> IntegralTensors {
        let shells = build_basis(atoms, basis).unwrap();
        IntegralTensors::compute(&shells, atoms).unwrap()
    }

    pub fn h2(r: f64) -> Vec<Atom> {
        crate::integrals::tests::h2(r)
    }

    pub fn water() -> Vec<Atom> {
        crate::integrals::tests::water()
    }

    #[test]
    fn h2_minimal_basis_matches_symmetry_solution() {
        let ints = system(&h2(1.4), BasisName::Sto3g);
        let r = run_rhf(&ints, 2, None).unwrap();
        // the bonding orbital is fixed by symmetry: c = (1, 1)/sqrt(2 + 2 S12)
        let s12 = ints.overlap[(0, 1)];
        let c = 1.0 / (2.0 + 2.0 * s12).sqrt();
        let h = ints.core_hamiltonian();
        let h_mo = c * c * (h[(0, 0)] + h[(1, 1)] + 2.0 * h[(0, 1)]);
        let mut j = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        j += c.powi(4) * ints.eri.get(p, q, s, t);
                    }
                }
            }
        }
        let e = 2.0 * h_mo + j + ints.nuclear_repulsion;
        assert!((r.total_energy - e).abs() < 1e-10, "{} vs {e}", r.total_energy);
        assert!((r.total_energy + 1.1167).abs() < 1e-4);
        assert!(r.commutator_norm < 1e-6);
    }

    #[test]
    fn zero_extra_operator_is_a_no_op() {
        let ints = system(&water(), BasisName::Sto3g);
        let a = run_rhf(&ints, 10, None).unwrap();
        let z = DMatrix::zeros(7, 7);
        let b = run_rhf(&ints, 10, Some(&z)).unwrap();
        assert_eq!(a.total_energy, b.total_energy);
        assert_eq!(a.density, b.density);
    }

    #[test]
    fn helium_density_is_idempotent() {
        let he = vec![Atom::from_angstrom("He", [0.0, 0.0, 0.0]).unwrap()];
        for basis in [BasisName::Sto3g, BasisName::Pople631g] {
            let ints = system(&he, basis);
            let r = run_rhf(&ints, 2, None).unwrap();
            let dsd = &r.density * &ints.overlap * &r.density;
            assert!((dsd - 2.0 * &r.density).amax() < 1e-8);
        }
    }

    #[test]
    fn orbitals_are_orthonormal_and_energy_is_stable() {
        let ints = system(&water(), BasisName::Pople631gStar);
        let r = run_rhf(&ints, 10, None).unwrap();
        let ctsc = r.coefficients.transpose() * &ints.overlap * &r.coefficients;
        assert!((ctsc - DMatrix::identity(19, 19)).amax() < 1e-10);
        assert!(r.commutator_norm < 1e-6);
        // after the DIIS start-up the energy does not go back up
        for w in r.history[4..].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", r.history);
        }
    }

    pub fn rotate(atoms: &[Atom], axis: [f64; 3], angle: f64) -> Vec<Atom> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        let m = [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ];
        atoms
            .iter()
            .map(|a| {
                let p = a.position;
                let mut b = a.clone();
                for i in 0..3 {
                    b.position[i] = m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + 0.3 * i as f64;
                }
                b
            })
            .collect()
    }

    #[test]
    fn rotational_invariance() {
        let atoms = water();
        let turned = rotate(&atoms, [0.3, -1.0, 0.7], 1.1);
        let a = run_rhf(&system(&atoms, BasisName::Pople631gStar), 10, None).unwrap();
        let ib = system(&turned, BasisName::Pople631gStar);
        let b = run_rhf(&ib, 10, None).unwrap();
        assert!((a.total_energy - b.total_energy).abs() < 1e-8);
        let na = mp2_natural_orbitals(&a, &DenseEri::new(&system(&atoms, BasisName::Pople631gStar))).unwrap();
        let nb = mp2_natural_orbitals(&b, &DenseEri::new(&ib)).unwrap();
        assert!((na.occupations - nb.occupations).amax() < 1e-8);
    }

    /// Reference energies from an independent program, Cartesian d shells.
    #[test]
    fn water_reference_energies() {
        for (b, e) in [
            (BasisName::Sto3g, -74.963023138),
            (BasisName::Pople631g, -75.983974473),
            (BasisName::Pople631gStar, -76.010504988),
        ] {
            let r = run_rhf(&system(&water(), b), 10, None).unwrap();
            assert!((r.total_energy - e).abs() < 1e-7, "{b}: {}", r.total_energy);
        }
    }

    #[test]
    fn odd_electrons_rejected() {
        let ints = system(&h2(1.4), BasisName::Sto3g);
        assert!(run_rhf(&ints, 1, None).is_err());
    }

    #[test]
    fn natural_orbitals_basic_properties() {
        let ints = system(&water(), BasisName::Pople631g);
        let r = run_rhf(&ints, 10, None).unwrap();
        let no = mp2_natural_orbitals(&r, &DenseEri::new(&ints)).unwrap();
        assert!((no.occupations.sum() - 10.0).abs() < 1e-10);
        for w in no.occupations.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(no.occupations.iter().all(|&x| x > 0.0 && x < 2.0));
        let ctsc = no.coefficients.transpose() * &ints.overlap * &no.coefficients;
        assert!((ctsc - DMatrix::identity(13, 13)).amax() < 1e-10);
    }

    /// Two-electron singlet full CI in the RHF orbital basis: the spatial
    /// wavefunction is a symmetric matrix psi(p, q).
    fn two_electron_fci_occupations(ints: &IntegralTensors, r: &RhfResult) -> Vec<f64> {
        let eri = DenseEri::new(ints);
        let c = &r.coefficients;
        let m = c.ncols();
        let h = c.transpose() * ints.core_hamiltonian() * c;
        let g = mo_eri(&eri, c);
        let dim = m * m;
        let mut big = DMatrix::zeros(dim, dim);
        for p in 0..m {
            for q in 0..m {
                for r2 in 0..m {
                    for s in 0..m {
                        let mut v = g[((p * m + r2) * m + q) * m + s];
                        if q == s {
                            v += h[(p, r2)];
                        }
                        if p == r2 {
                            v += h[(q, s)];
                        }
                        big[(p * m + q, r2 * m + s)] = v;
                    }
                }
            }
        }
        // restrict to the symmetric (singlet) subspace via the swap projector
        let mut proj = DMatrix::zeros(dim, dim);
        for p in 0..m {
            for q in 0..m {
                proj[(p * m + q, p * m + q)] += 0.5;
                proj[(p * m + q, q * m + p)] += 0.5;
            }
        }
        let shifted = &proj * &big * &proj + (DMatrix::identity(dim, dim) - &proj) * 1e3;
        let (_, vecs) = eigh(&shifted);
        let psi = DMatrix::from_fn(m, m, |p, q| vecs[(p * m + q, 0)]);
        let (occ, _) = eigh(&(2.0 * &psi * psi.transpose()));
        let mut occ: Vec<f64> = occ.iter().copied().collect();
        occ.reverse();
        occ
    }

    #[test]
    fn h2_natural_occupation_against_full_ci() {
        let ints = system(&h2(1.4), BasisName::Pople631g);
        let r = run_rhf(&ints, 2, None).unwrap();
        let no = mp2_natural_orbitals(&r, &DenseEri::new(&ints)).unwrap();
        let fci = two_electron_fci_occupations(&ints, &r);
        assert!(fci[0] > 1.9);
        assert!(no.occupations[0] > 1.9);
        // MP2 misses part of the left-right correlation; full CI gives 1.971
        assert!((no.occupations[0] - fci[0]).abs() < 0.03, "{} vs {}", no.occupations[0], fci[0]);
    }

    #[test]
    fn mo_transform_of_identity_is_identity() {
        let ints = system(&water(), BasisName::Sto3g);
        let eri = DenseEri::new(&ints);
        let c = DMatrix::identity(7, 7);
        assert_eq!(mo_eri(&eri, &c), eri.data);
    }
}

