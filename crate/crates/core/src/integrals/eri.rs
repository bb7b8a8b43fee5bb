//! Two-electron repulsion integrals (chemists' notation) with 8-fold
//! permutational symmetry in packed storage.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::hermite::{hermite_coulomb, CoulombScratch, Hermite1d, TuvIndex};
use crate::basis::{cartesian_components, n_functions, shell_offsets, Shell};

#[inline]
pub fn pair_index(i: usize, j: usize) -> usize {
    if i >= j {
        i * (i + 1) / 2 + j
    } else {
        j * (j + 1) / 2 + i
    }
}

/// Packed (ij|kl) tensor; one stored value per symmetry-unique quartet.
#[derive(Debug, Clone, PartialEq)]
pub struct Eri {
    n: usize,
    data: Vec<f64>,
}

impl Eri {
    pub fn zeros(n: usize) -> Self {
        let np = n * (n + 1) / 2;
        Eri {
            n,
            data: vec![0.0; np * (np + 1) / 2],
        }
    }

    /// Storage size for `n` functions, reported before allocating.
    pub fn storage_len(n: usize) -> usize {
        let np = n * (n + 1) / 2;
        np * (np + 1) / 2
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index(i: usize, j: usize, k: usize, l: usize) -> usize {
        pair_index(pair_index(i, j), pair_index(k, l))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[Self::index(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.data[Self::index(i, j, k, l)] = v;
    }

    /// Dense n^4 copy, index `((i*n + j)*n + k)*n + l`.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n.pow(4)];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[((i * n + j) * n + k) * n + l] = self.get(i, j, k, l);
                    }
                }
            }
        }
        out
    }

    /// Builds from a dense tensor that already has the 8-fold symmetry.
    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        let mut e = Eri::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                for k in 0..n {
                    for l in 0..=k {
                        if pair_index(i, j) >= pair_index(k, l) {
                            e.set(i, j, k, l, dense[((i * n + j) * n + k) * n + l]);
                        }
                    }
                }
            }
        }
        e
    }

    /// Iterates unique quartets `(i>=j, k>=l, ij>=kl)` with their values.
    pub fn for_each_unique(&self, mut f: impl FnMut(usize, usize, usize, usize, f64)) {
        let n = self.n;
        for i in 0..n {
            for j in 0..=i {
                let ij = pair_index(i, j);
                for k in 0..n {
                    for l in 0..=k {
                        let kl = pair_index(k, l);
                        if kl > ij {
                            continue;
                        }
                        f(i, j, k, l, self.data[pair_index(ij, kl)]);
                    }
                }
            }
        }
    }
}

/// Primitive-pair data for one shell pair.
pub(crate) struct PrimitivePair {
    pub p: f64,
    pub center: [f64; 3],
    /// Combined coefficients c_a c_b E^x E^y E^z for each component pair,
    /// laid out `[component pair][cube offset]`.
    pub herm: Vec<f64>,
}

pub(crate) struct ShellPair {
    pub a: usize,
    pub b: usize,
    pub l: usize,
    pub tuv: TuvIndex,
    pub n_comp: usize,
    pub prims: Vec<PrimitivePair>,
}

impl ShellPair {
    pub fn new(shells: &[Shell], a: usize, b: usize, cutoff: f64) -> Self {
        let (sa, sb) = (&shells[a], &shells[b]);
        let l = sa.l + sb.l;
        let tuv = TuvIndex::new(l);
        let cube = tuv.dim.pow(3);
        let ca = cartesian_components(sa.l);
        let cb = cartesian_components(sb.l);
        let xab = [
            sa.center[0] - sb.center[0],
            sa.center[1] - sb.center[1],
            sa.center[2] - sb.center[2],
        ];
        let mut prims = Vec::new();
        for (&ea, &da) in sa.exponents.iter().zip(&sa.coefficients) {
            for (&eb, &db) in sb.exponents.iter().zip(&sb.coefficients) {
                let p = ea + eb;
                let center = [
                    (ea * sa.center[0] + eb * sb.center[0]) / p,
                    (ea * sa.center[1] + eb * sb.center[1]) / p,
                    (ea * sa.center[2] + eb * sb.center[2]) / p,
                ];
                let h = [
                    Hermite1d::new(sa.l, sb.l, ea, eb, xab[0]),
                    Hermite1d::new(sa.l, sb.l, ea, eb, xab[1]),
                    Hermite1d::new(sa.l, sb.l, ea, eb, xab[2]),
                ];
                let mut herm = vec![0.0; ca.len() * cb.len() * cube];
                let mut biggest: f64 = 0.0;
                for (mu, ia) in ca.iter().enumerate() {
                    for (nu, ib) in cb.iter().enumerate() {
                        let f = da * db * Shell::component_scale(*ia) * Shell::component_scale(*ib);
                        let base = (mu * cb.len() + nu) * cube;
                        for &(t, u, v, o) in &tuv.entries {
                            let e = f
                                * h[0].get(ia[0], ib[0], t)
                                * h[1].get(ia[1], ib[1], u)
                                * h[2].get(ia[2], ib[2], v);
                            herm[base + o] = e;
                            biggest = biggest.max(e.abs());
                        }
                    }
                }
                if biggest * (2.0 * PI / p) < cutoff {
                    continue;
                }
                prims.push(PrimitivePair { p, center, herm });
            }
        }
        ShellPair {
            a,
            b,
            l,
            tuv,
            n_comp: ca.len() * cb.len(),
            prims,
        }
    }
}

/// Contracted (ab|cd) block for a shell quartet, laid out
/// `[(mu_a * nb + nu_b) * n_cd + (mu_c * nd + nu_d)]`.
fn quartet(bra: &ShellPair, ket: &ShellPair, scratch: &mut CoulombScratch) -> Vec<f64> {
    let l = bra.l + ket.l;
    let dim = l + 1;
    let cube = dim.pow(3);
    let mut r = vec![0.0; cube];
    let mut out = vec![0.0; bra.n_comp * ket.n_comp];
    let bra_cube = bra.tuv.dim.pow(3);
    let ket_cube = ket.tuv.dim.pow(3);
    let mut g = vec![0.0; ket.n_comp * bra.tuv.len()];
    // sign (-1)^(tau+nu+phi) on the ket expansion
    let ket_sign: Vec<f64> = ket
        .tuv
        .entries
        .iter()
        .map(|&(t, u, v, _)| if (t + u + v) % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    for pb in &bra.prims {
        for pk in &ket.prims {
            let (p, q) = (pb.p, pk.p);
            let alpha = p * q / (p + q);
            let pq = [
                pb.center[0] - pk.center[0],
                pb.center[1] - pk.center[1],
                pb.center[2] - pk.center[2],
            ];
            hermite_coulomb(l, alpha, pq, scratch, &mut r);
            let pref = 2.0 * PI.powf(2.5) / (p * q * (p + q).sqrt());
            // g[cd][tuv] = sum_{tau nu phi} (-1)^.. E^cd R_{t+tau, u+nu, v+phi}
            for cd in 0..ket.n_comp {
                let ek = &pk.herm[cd * ket_cube..(cd + 1) * ket_cube];
                for (ib, &(t, u, v, _)) in bra.tuv.entries.iter().enumerate() {
                    let mut acc = 0.0;
                    for (ik, &(tk, uk, vk, ok)) in ket.tuv.entries.iter().enumerate() {
                        let e = ek[ok];
                        if e != 0.0 {
                            acc += ket_sign[ik] * e * r[((t + tk) * dim + u + uk) * dim + v + vk];
                        }
                    }
                    g[cd * bra.tuv.len() + ib] = acc;
                }
            }
            for ab in 0..bra.n_comp {
                let eb = &pb.herm[ab * bra_cube..(ab + 1) * bra_cube];
                for cd in 0..ket.n_comp {
                    let gg = &g[cd * bra.tuv.len()..(cd + 1) * bra.tuv.len()];
                    let mut acc = 0.0;
                    for (ib, &(_, _, _, o)) in bra.tuv.entries.iter().enumerate() {
                        acc += eb[o] * gg[ib];
                    }
                    out[ab * ket.n_comp + cd] += pref * acc;
                }
            }
        }
    }
    out
}

/// All symmetry-unique (ab|cd) over the basis, with a Schwarz bound skipping
/// quartets below 1e-14.
pub fn electron_repulsion(shells: &[Shell]) -> Eri {
    let n = n_functions(shells);
    log::debug!(
        "ERI tensor: {n} functions, {} unique values ({:.1} MiB)",
        Eri::storage_len(n),
        Eri::storage_len(n) as f64 * 8.0 / (1024.0 * 1024.0)
    );
    let off = shell_offsets(shells);
    let mut pairs = Vec::new();
    for a in 0..shells.len() {
        for b in 0..=a {
            pairs.push(ShellPair::new(shells, a, b, 1e-16));
        }
    }
    // Schwarz factors: max sqrt|(ab|ab)| over the block
    let schwarz: Vec<f64> = pairs
        .par_iter()
        .map_init(CoulombScratch::default, |sc, sp| {
            let block = quartet(sp, sp, sc);
            (0..sp.n_comp)
                .map(|k| block[k * sp.n_comp + k].abs().sqrt())
                .fold(0.0, f64::max)
        })
        .collect();

    let blocks: Vec<Vec<(usize, Vec<f64>)>> = (0..pairs.len())
        .into_par_iter()
        .map_init(CoulombScratch::default, |sc, ip| {
            let mut out = Vec::new();
            for jp in 0..=ip {
                if schwarz[ip] * schwarz[jp] < 1e-14 {
                    continue;
                }
                out.push((jp, quartet(&pairs[ip], &pairs[jp], sc)));
            }
            out
        })
        .collect();

    let mut eri = Eri::zeros(n);
    for (ip, row) in blocks.into_iter().enumerate() {
        let bra = &pairs[ip];
        let nb = shells[bra.b].n_functions();
        for (jp, block) in row {
            let ket = &pairs[jp];
            let nd = shells[ket.b].n_functions();
            for ab in 0..bra.n_comp {
                let (i, j) = (off[bra.a] + ab / nb, off[bra.b] + ab % nb);
                for cd in 0..ket.n_comp {
                    let (k, l) = (off[ket.a] + cd / nd, off[ket.b] + cd % nd);
                    eri.set(i, j, k, l, block[ab * ket.n_comp + cd]);
                }
            }
        }
    }
    eri
}
