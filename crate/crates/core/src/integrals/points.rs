//! Batched point-charge kernel: the one-electron operator of a set of point
//! charges and the solute electrostatic potential at arbitrary points.
//!
//! Both paths share the same screened primitive-pair expansion, so
//! `sum_I q_I V_el(r_I) == tr(D * operator)` holds to rounding.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::eri::ShellPair;
use super::hermite::{coulomb_derivatives, hermite_coulomb, CoulombScratch};
use crate::basis::{n_functions, shell_offsets, Shell};
use crate::error::{Error, Result};
use crate::model::Atom;

/// Points per work unit in the ESP evaluation.
const CHUNK: usize = 4096;

/// Primitive pairs below this bound are dropped on both the operator and the
/// ESP side.
const PAIR_CUTOFF: f64 = 1e-14;

/// p|PC|² beyond which one-center pairs are summed as a single multipole;
/// matches the switch to the asymptotic Boys form.
const FAR_T: f64 = 40.0;

/// Primitive pairs whose two shells share one center.
struct CenterGroup {
    center: [f64; 3],
    l: usize,
    p_min: f64,
    members: Vec<usize>,
}

impl CenterGroup {
    fn dim(&self) -> usize {
        self.l + 1
    }

    #[inline]
    fn is_far(&self, c: &[f64; 3]) -> bool {
        let d = [self.center[0] - c[0], self.center[1] - c[1], self.center[2] - c[2]];
        self.p_min * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) >= FAR_T
    }
}

/// Screened Hermite expansion of every basis-function product.
pub struct PairExpansion {
    n: usize,
    offsets: Vec<usize>,
    pairs: Vec<ShellPair>,
    nb: Vec<usize>,
    /// (pair, primitive) in fixed order
    prims: Vec<(usize, usize)>,
    groups: Vec<CenterGroup>,
    /// group of each primitive pair, if any
    group_of: Vec<Option<usize>>,
}

impl PairExpansion {
    pub fn new(shells: &[Shell]) -> Self {
        let mut pairs = Vec::new();
        let mut nb = Vec::new();
        for a in 0..shells.len() {
            for b in 0..=a {
                pairs.push(ShellPair::new(shells, a, b, PAIR_CUTOFF));
                nb.push(shells[b].n_functions());
            }
        }
        let prims: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .flat_map(|(ip, p)| (0..p.prims.len()).map(move |k| (ip, k)))
            .collect();
        let mut groups: Vec<CenterGroup> = Vec::new();
        let mut group_of = vec![None; prims.len()];
        for (i, &(ip, k)) in prims.iter().enumerate() {
            let pair: &ShellPair = &pairs[ip];
            let center = shells[pair.a].center;
            if center != shells[pair.b].center {
                continue;
            }
            let p = pair.prims[k].p;
            let g = match groups.iter().position(|g| g.center == center) {
                Some(g) => g,
                None => {
                    groups.push(CenterGroup { center, l: 0, p_min: f64::INFINITY, members: Vec::new() });
                    groups.len() - 1
                }
            };
            let grp = &mut groups[g];
            grp.l = grp.l.max(pair.l);
            grp.p_min = grp.p_min.min(p);
            grp.members.push(i);
            group_of[i] = Some(g);
        }
        PairExpansion {
            n: n_functions(shells),
            offsets: shell_offsets(shells),
            pairs,
            nb,
            prims,
            groups,
            group_of,
        }
    }

    /// Offsets of a primitive pair's Hermite entries inside its group cube.
    fn group_offsets(&self, i: usize, g: &CenterGroup) -> impl Iterator<Item = (usize, usize)> + '_ {
        let pair = &self.pairs[self.prims[i].0];
        let dg = g.dim();
        pair.tuv.entries.iter().map(move |&(t, u, v, o)| (o, (t * dg + u) * dg + v))
    }

    pub fn n_basis(&self) -> usize {
        self.n
    }

    pub fn n_primitive_pairs(&self) -> usize {
        self.prims.len()
    }

    /// `-sum_I q_I <a| 1/|r - r_I| |b>`.
    pub fn operator(&self, points: &[[f64; 3]], charges: &[f64]) -> Result<DMatrix<f64>> {
        if points.len() != charges.len() {
            return Err(Error::Config(format!(
                "{} points but {} charges",
                points.len(),
                charges.len()
            )));
        }
        if points.iter().flatten().chain(charges).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point-charge input".into()));
        }
        // far-field multipoles of the charges seen from each center
        let far: Vec<Vec<f64>> = self
            .groups
            .par_iter()
            .map_init(CoulombScratch::default, |sc, g| {
                let cube = g.dim().pow(3);
                let mut d = vec![0.0; cube];
                let mut acc = vec![0.0; cube];
                let entries = super::hermite::TuvIndex::new(g.l).entries;
                for (c, &q) in points.iter().zip(charges) {
                    if !g.is_far(c) {
                        continue;
                    }
                    let x = [g.center[0] - c[0], g.center[1] - c[1], g.center[2] - c[2]];
                    coulomb_derivatives(g.l, x, sc, &mut d);
                    for &(_, _, _, o) in &entries {
                        acc[o] += q * d[o];
                    }
                }
                acc
            })
            .collect();
        let sums: Vec<Vec<f64>> = (0..self.prims.len())
            .into_par_iter()
            .map_init(CoulombScratch::default, |sc, i| {
                let (ip, k) = self.prims[i];
                let pair = &self.pairs[ip];
                let prim = &pair.prims[k];
                let cube = pair.tuv.dim.pow(3);
                let mut r = vec![0.0; cube];
                let mut acc = vec![0.0; cube];
                let group = self.group_of[i].map(|g| &self.groups[g]);
                for (c, &q) in points.iter().zip(charges) {
                    if group.is_some_and(|g| g.is_far(c)) {
                        continue;
                    }
                    let pc = [prim.center[0] - c[0], prim.center[1] - c[1], prim.center[2] - c[2]];
                    hermite_coulomb(pair.l, prim.p, pc, sc, &mut r);
                    for &(_, _, _, o) in &pair.tuv.entries {
                        acc[o] += q * r[o];
                    }
                }
                if let Some(gi) = self.group_of[i] {
                    let s = 0.5 * (PI / prim.p).sqrt();
                    for (o, og) in self.group_offsets(i, &self.groups[gi]) {
                        acc[o] += s * far[gi][og];
                    }
                }
                acc
            })
            .collect();
        let mut v = DMatrix::zeros(self.n, self.n);
        for (&(ip, k), acc) in self.prims.iter().zip(&sums) {
            let pair = &self.pairs[ip];
            let prim = &pair.prims[k];
            let cube = pair.tuv.dim.pow(3);
            let pref = -2.0 * PI / prim.p;
            let nb = self.nb[ip];
            for c in 0..pair.n_comp {
                let e = &prim.herm[c * cube..(c + 1) * cube];
                let mut s = 0.0;
                for &(_, _, _, o) in &pair.tuv.entries {
                    s += e[o] * acc[o];
                }
                let (i, j) = (self.offsets[pair.a] + c / nb, self.offsets[pair.b] + c % nb);
                v[(i, j)] += pref * s;
            }
        }
        symmetrize_lower(&mut v, &self.pairs, &self.offsets, &self.nb);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("point-charge operator".into()));
        }
        Ok(v)
    }

    /// Electronic potential `-sum_ab D_ab <a| 1/|r - C| |b>` at each point.
    pub fn electronic_potential(&self, density: &DMatrix<f64>, points: &[[f64; 3]]) -> Vec<f64> {
        // contract the density into one Hermite vector per primitive pair
        let weights: Vec<Vec<f64>> = self
            .prims
            .iter()
            .map(|&(ip, k)| {
                let pair = &self.pairs[ip];
                let prim = &pair.prims[k];
                let cube = pair.tuv.dim.pow(3);
                let nb = self.nb[ip];
                let sym = if pair.a == pair.b { 1.0 } else { 2.0 };
                let mut w = vec![0.0; cube];
                for c in 0..pair.n_comp {
                    let (i, j) = (self.offsets[pair.a] + c / nb, self.offsets[pair.b] + c % nb);
                    let d = sym * density[(i, j)];
                    if d == 0.0 {
                        continue;
                    }
                    let e = &prim.herm[c * cube..(c + 1) * cube];
                    for &(_, _, _, o) in &pair.tuv.entries {
                        w[o] += d * e[o];
                    }
                }
                let pref = -2.0 * PI / prim.p;
                w.iter_mut().for_each(|x| *x *= pref);
                w
            })
            .collect();
        // group moments: sum of ½√(π/p) w over the members
        let moments: Vec<Vec<f64>> = self
            .groups
            .iter()
            .map(|g| {
                let mut m = vec![0.0; g.dim().pow(3)];
                for &i in &g.members {
                    let (ip, k) = self.prims[i];
                    let s = 0.5 * (PI / self.pairs[ip].prims[k].p).sqrt();
                    for (o, og) in self.group_offsets(i, g) {
                        m[og] += s * weights[i][o];
                    }
                }
                m
            })
            .collect();
        let group_entries: Vec<_> = self.groups.iter().map(|g| super::hermite::TuvIndex::new(g.l).entries).collect();
        let mut out = vec![0.0; points.len()];
        out.par_chunks_mut(CHUNK)
            .zip(points.par_chunks(CHUNK))
            .for_each_init(CoulombScratch::default, |sc, (vals, pts)| {
                let mut r = vec![0.0; 125];
                let mut far = vec![false; self.groups.len()];
                for (val, c) in vals.iter_mut().zip(pts) {
                    let mut s = 0.0;
                    for (gi, g) in self.groups.iter().enumerate() {
                        far[gi] = g.is_far(c);
                        if far[gi] {
                            let x = [g.center[0] - c[0], g.center[1] - c[1], g.center[2] - c[2]];
                            coulomb_derivatives(g.l, x, sc, &mut r);
                            for &(_, _, _, o) in &group_entries[gi] {
                                s += moments[gi][o] * r[o];
                            }
                        }
                    }
                    for (i, (&(ip, k), w)) in self.prims.iter().zip(&weights).enumerate() {
                        if self.group_of[i].is_some_and(|g| far[g]) {
                            continue;
                        }
                        let pair = &self.pairs[ip];
                        let prim = &pair.prims[k];
                        let pc = [prim.center[0] - c[0], prim.center[1] - c[1], prim.center[2] - c[2]];
                        hermite_coulomb(pair.l, prim.p, pc, sc, &mut r);
                        for &(_, _, _, o) in &pair.tuv.entries {
                            s += w[o] * r[o];
                        }
                    }
                    *val = s;
                }
            });
        out
    }
}

fn symmetrize_lower(v: &mut DMatrix<f64>, pairs: &[ShellPair], off: &[usize], nb: &[usize]) {
    for (ip, pair) in pairs.iter().enumerate() {
        if pair.a == pair.b {
            continue;
        }
        for c in 0..pair.n_comp {
            let (i, j) = (off[pair.a] + c / nb[ip], off[pair.b] + c % nb[ip]);
            v[(j, i)] = v[(i, j)];
        }
    }
    // diagonal shell blocks were filled completely; enforce exact symmetry
    let n = v.nrows();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (v[(i, j)] + v[(j, i)]);
            v[(i, j)] = m;
            v[(j, i)] = m;
        }
    }
}

/// One-electron operator of point charges (bohr, e).
pub fn point_charge_operator(shells: &[Shell], points: &[[f64; 3]], charges: &[f64]) -> Result<DMatrix<f64>> {
    PairExpansion::new(shells).operator(points, charges)
}

/// Nuclear part of the electrostatic potential; `+inf` on a nucleus.
pub fn nuclear_potential(atoms: &[Atom], points: &[[f64; 3]]) -> Vec<f64> {
    points
        .iter()
        .map(|c| {
            let mut s = 0.0;
            for a in atoms {
                let d = crate::model::distance(&a.position, c);
                if d < 1e-12 {
                    return f64::INFINITY;
                }
                s += f64::from(a.z) / d;
            }
            s
        })
        .collect()
}

/// Total solute electrostatic potential (hartree/e) at each point. A point
/// on a nucleus yields `+inf`.
pub fn esp_at_points(shells: &[Shell], atoms: &[Atom], density: &DMatrix<f64>, points: &[[f64; 3]]) -> Vec<f64> {
    let nuc = nuclear_potential(atoms, points);
    let el = PairExpansion::new(shells).electronic_potential(density, points);
    nuc.iter().zip(&el).map(|(a, b)| a + b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::integrals::tests::{gauss_legendre, h2, water};
    use crate::integrals::{attraction_matrix, core_integrals};
    use crate::model::{BasisName, LennardJones};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_point_list_gives_zero() {
        let shells = build_basis(&water(), BasisName::Pople631g).unwrap();
        let v = point_charge_operator(&shells, &[], &[]).unwrap();
        assert_eq!(v.nrows(), 13);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_charges_on_nuclei_reproduce_nuclear_attraction() {
        let atoms = water();
        let shells = build_basis(&atoms, BasisName::Pople631gStar).unwrap();
        let ci = core_integrals(&shells, &atoms).unwrap();
        let pts: Vec<[f64; 3]> = atoms.iter().map(|a| a.position).collect();
        let z: Vec<f64> = atoms.iter().map(|a| f64::from(a.z)).collect();
        let v = point_charge_operator(&shells, &pts, &z).unwrap();
        assert!((&v - &ci.nuclear).amax() < 1e-12, "{}", (&v - &ci.nuclear).amax());
        // single unit charge on the oxygen
        let v_o = point_charge_operator(&shells, &pts[..1], &[1.0]).unwrap();
        let reference = attraction_matrix(&shells, &[(pts[0], 1.0)]);
        assert!((&v_o - &reference).amax() < 1e-12);
    }

    #[test]
    fn mirror_charges_give_antisymmetric_operator() {
        let r = 1.4;
        let atoms = h2(r);
        let shells = build_basis(&atoms, BasisName::Pople631g).unwrap();
        // mirror plane z = r/2 swaps the two atoms' functions
        let pts = [[0.3, -0.7, -0.9], [0.3, -0.7, r + 0.9], [1.1, 0.2, 0.4], [1.1, 0.2, r - 0.4]];
        let q = [0.37, -0.37, -0.8, 0.8];
        let v = point_charge_operator(&shells, &pts, &q).unwrap();
        let perm = [2, 3, 0, 1];
        for i in 0..4 {
            for j in 0..4 {
                assert!((v[(perm[i], perm[j])] + v[(i, j)]).abs() < 1e-13);
            }
        }
        assert!(v.amax() > 1e-3);
    }

    fn h2_density(shells: &[Shell], atoms: &[Atom]) -> DMatrix<f64> {
        let ci = core_integrals(shells, atoms).unwrap();
        let c = 1.0 / (2.0 + 2.0 * ci.overlap[(0, 1)]).sqrt();
        DMatrix::from_element(2, 2, 2.0 * c * c)
    }

    #[test]
    fn zero_density_gives_positive_nuclear_potential() {
        let atoms = water();
        let shells = build_basis(&atoms, BasisName::Sto3g).unwrap();
        let d = DMatrix::zeros(7, 7);
        let pts = [[0.1, 0.2, 0.3], [5.0, -3.0, 1.0], [0.0, 0.0, -20.0]];
        let v = esp_at_points(&shells, &atoms, &d, &pts);
        let nuc = nuclear_potential(&atoms, &pts);
        for (a, b) in v.iter().zip(&nuc) {
            assert!(*a > 0.0);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn point_on_nucleus_is_infinite() {
        let atoms = h2(1.4);
        let shells = build_basis(&atoms, BasisName::Sto3g).unwrap();
        let d = h2_density(&shells, &atoms);
        let v = esp_at_points(&shells, &atoms, &d, &[atoms[1].position, [0.0, 0.0, 0.7]]);
        assert!(v[0].is_infinite() && v[0] > 0.0);
        assert!(v[1].is_finite());
    }

    #[test]
    fn neutral_far_field_decays() {
        let atoms = h2(1.4);
        let shells = build_basis(&atoms, BasisName::Sto3g).unwrap();
        let d = h2_density(&shells, &atoms);
        let far = crate::units::angstrom_to_bohr(20.0);
        let pts = [[far, 0.0, 0.0], [0.0, 0.0, far], [0.0, far * 0.6, far * 0.8]];
        for v in esp_at_points(&shells, &atoms, &d, &pts) {
            assert!(v.abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn esp_and_operator_are_consistent() {
        let atoms = water();
        let shells = build_basis(&atoms, BasisName::Pople631gStar).unwrap();
        let n = n_functions(&shells);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
        let d = &a + a.transpose();
        let pts: Vec<[f64; 3]> = (0..300)
            .map(|_| [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)])
            .collect();
        let q: Vec<f64> = (0..300).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let esp = esp_at_points(&shells, &atoms, &d, &pts);
        let lhs: f64 = esp.iter().zip(&q).map(|(v, q)| v * q).sum();
        let op = point_charge_operator(&shells, &pts, &q).unwrap();
        let nuc: f64 = nuclear_potential(&atoms, &pts).iter().zip(&q).map(|(v, q)| v * q).sum();
        let rhs = d.component_mul(&op).sum() + nuc;
        assert!(((lhs - rhs) / rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn grouped_far_field_matches_pairwise_sum() {
        let atoms = water();
        let shells = build_basis(&atoms, BasisName::Pople631gStar).unwrap();
        let n = n_functions(&shells);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
        let d = &a + a.transpose();
        // radii spanning near, mixed and far regimes
        let pts: Vec<[f64; 3]> = (0..400)
            .map(|i| {
                let r = 0.5 + 0.05 * i as f64;
                let (th, ph) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI));
                [r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos()]
            })
            .collect();
        let q: Vec<f64> = (0..pts.len()).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let grouped = PairExpansion::new(&shells);
        assert!(!grouped.groups.is_empty());
        let mut plain = PairExpansion::new(&shells);
        plain.groups.clear();
        plain.group_of.iter_mut().for_each(|g| *g = None);
        let (e1, e2) = (grouped.electronic_potential(&d, &pts), plain.electronic_potential(&d, &pts));
        for (x, y) in e1.iter().zip(&e2) {
            assert!((x - y).abs() < 1e-12 * y.abs().max(1.0), "{x} vs {y}");
        }
        let (o1, o2) = (grouped.operator(&pts, &q).unwrap(), plain.operator(&pts, &q).unwrap());
        assert!((o1 - o2).amax() < 1e-12);
    }

    /// Attraction integrals against a spherical product quadrature centred on
    /// the charge, which removes the 1/r singularity from the integrand.
    #[test]
    fn operator_against_quadrature() {
        let lj = LennardJones { sigma: 1.0, epsilon: 1.0 };
        let atoms = [
            Atom::new("H", [0.0, 0.0, 0.0], lj).unwrap(),
            Atom::new("H", [0.3, -0.2, 1.1], lj).unwrap(),
        ];
        let shells = vec![
            Shell::new(atoms[0].position, 2, vec![1.3, 0.4], vec![0.6, 0.5], 0),
            Shell::new(atoms[1].position, 1, vec![0.9], vec![1.0], 1),
            Shell::new(atoms[1].position, 0, vec![2.0, 0.5], vec![0.4, 0.7], 1),
        ];
        let c = [0.5, 0.4, 0.6];
        let v = point_charge_operator(&shells, &[c], &[1.0]).unwrap();

        let (gx, gw) = gauss_legendre(16);
        let (panels, rmax) = (30, 15.0);
        let n_ang = 72;
        let (ct, cw) = gauss_legendre(n_ang);
        let n = 10;
        let mut q = DMatrix::<f64>::zeros(n, n);
        let mut vals = vec![0.0; n];
        for p in 0..panels {
            let h = rmax / panels as f64;
            for (x, w) in gx.iter().zip(&gw) {
                let r = (p as f64 + 0.5) * h + 0.5 * h * x;
                let wr = 0.5 * h * w * r; // r^2 / r
                for (cth, wt) in ct.iter().zip(&cw) {
                    let sth = (1.0 - cth * cth).sqrt();
                    for k in 0..n_ang {
                        let phi = 2.0 * PI * k as f64 / n_ang as f64;
                        let wtot = wr * wt * 2.0 * PI / n_ang as f64;
                        let pt = [c[0] + r * sth * phi.cos(), c[1] + r * sth * phi.sin(), c[2] + r * cth];
                        let mut idx = 0;
                        for s in &shells {
                            for comp in 0..s.n_functions() {
                                vals[idx] = s.evaluate(comp, pt);
                                idx += 1;
                            }
                        }
                        for i in 0..n {
                            for j in 0..=i {
                                q[(i, j)] -= wtot * vals[i] * vals[j];
                            }
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..=i {
                assert!((q[(i, j)] - v[(i, j)]).abs() < 1e-6, "({i},{j}) {} vs {}", q[(i, j)], v[(i, j)]);
            }
        }
    }
}
