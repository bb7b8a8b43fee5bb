//! McMurchie-Davidson building blocks: Hermite expansion coefficients of
//! Gaussian overlap distributions and Hermite Coulomb integrals R_tuv.

use crate::boys;

/// Largest Hermite order handled (ERIs over d shells reach 8).
pub const MAX_L: usize = 8;

const IJ: usize = 5; // i <= 2, j <= 2 + 2 for kinetic
const TT: usize = 9;

/// One-dimensional coefficients E^{ij}_t for a primitive pair.
#[derive(Clone)]
pub struct Hermite1d {
    e: [[[f64; TT]; IJ]; IJ],
}

impl Hermite1d {
    /// `xab = A - B`, exponents `a`, `b`, built up to `i <= imax`, `j <= jmax`.
    pub fn new(imax: usize, jmax: usize, a: f64, b: f64, xab: f64) -> Self {
        debug_assert!(imax < IJ && jmax < IJ);
        let p = a + b;
        let mu = a * b / p;
        let xpa = -b / p * xab;
        let xpb = a / p * xab;
        let inv2p = 0.5 / p;
        let mut e = [[[0.0; TT]; IJ]; IJ];
        e[0][0][0] = (-mu * xab * xab).exp();
        for i in 0..imax {
            for t in 0..=i + 1 {
                let lower = if t > 0 { e[i][0][t - 1] } else { 0.0 };
                let upper = if t + 1 <= i { e[i][0][t + 1] } else { 0.0 };
                e[i + 1][0][t] = inv2p * lower + xpa * e[i][0][t] + (t + 1) as f64 * upper;
            }
        }
        for i in 0..=imax {
            for j in 0..jmax {
                for t in 0..=i + j + 1 {
                    let lower = if t > 0 { e[i][j][t - 1] } else { 0.0 };
                    let upper = if t < i + j { e[i][j][t + 1] } else { 0.0 };
                    let mid = if t <= i + j { e[i][j][t] } else { 0.0 };
                    e[i][j + 1][t] = inv2p * lower + xpb * mid + (t + 1) as f64 * upper;
                }
            }
        }
        Hermite1d { e }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, t: usize) -> f64 {
        if t > i + j {
            0.0
        } else {
            self.e[i][j][t]
        }
    }
}

/// Dense cube layout for Hermite indices with `t + u + v <= l`.
#[derive(Debug, Clone)]
pub struct TuvIndex {
    pub l: usize,
    pub dim: usize,
    /// (t, u, v, cube offset) for every t + u + v <= l
    pub entries: Vec<(usize, usize, usize, usize)>,
}

impl TuvIndex {
    pub fn new(l: usize) -> Self {
        let dim = l + 1;
        let mut entries = Vec::new();
        for t in 0..=l {
            for u in 0..=l - t {
                for v in 0..=l - t - u {
                    entries.push((t, u, v, (t * dim + u) * dim + v));
                }
            }
        }
        TuvIndex { l, dim, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Scratch space for [`hermite_coulomb`].
pub struct CoulombScratch {
    work: Vec<f64>,
    fn_: [f64; boys::MAX_ORDER + 1],
}

impl Default for CoulombScratch {
    fn default() -> Self {
        CoulombScratch {
            work: vec![0.0; (MAX_L + 1).pow(4)],
            fn_: [0.0; boys::MAX_ORDER + 1],
        }
    }
}

/// Hermite Coulomb integrals R_tuv(p, PC) for `t + u + v <= l`, written into
/// `out` as a dense `(l+1)^3` cube (entries beyond the simplex are untouched).
pub fn hermite_coulomb(l: usize, p: f64, pc: [f64; 3], scratch: &mut CoulombScratch, out: &mut [f64]) {
    let r2 = pc[0] * pc[0] + pc[1] * pc[1] + pc[2] * pc[2];
    boys::boys(l, p * r2, &mut scratch.fn_);
    if l == 0 {
        out[0] = scratch.fn_[0];
        return;
    }
    let mut fac = 1.0;
    for n in 0..=l {
        scratch.fn_[n] *= fac;
        fac *= -2.0 * p;
    }
    recur(l, pc, scratch, out);
}

/// Cartesian derivatives ∂_x^t ∂_y^u ∂_z^v (1/|x|) for `t + u + v <= l`, in the
/// same cube layout as [`hermite_coulomb`]. For p|PC|² past the Boys
/// asymptotic switch, R_tuv(p, PC) = ½√(π/p) times these.
pub fn coulomb_derivatives(l: usize, x: [f64; 3], scratch: &mut CoulombScratch, out: &mut [f64]) {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let inv = 1.0 / r2;
    // (-1)^n (2n-1)!! / r^{2n+1}
    let mut a = inv.sqrt();
    for n in 0..=l {
        scratch.fn_[n] = a;
        a *= -((2 * n + 1) as f64) * inv;
    }
    if l == 0 {
        out[0] = scratch.fn_[0];
        return;
    }
    recur(l, x, scratch, out);
}

/// Builds R_tuv from the auxiliary R^n_000 stored in `scratch.fn_`.
fn recur(l: usize, pc: [f64; 3], scratch: &mut CoulombScratch, out: &mut [f64]) {
    let d = l + 1;
    let w = &mut scratch.work;
    let idx = |n: usize, t: usize, u: usize, v: usize| ((n * d + t) * d + u) * d + v;
    for n in 0..=l {
        w[idx(n, 0, 0, 0)] = scratch.fn_[n];
    }
    // build order n = l-1 .. 0, each layer from the one above
    for n in (0..l).rev() {
        let top = l - n;
        for t in 0..=top {
            for u in 0..=top - t {
                for v in 0..=top - t - u {
                    if t + u + v == 0 {
                        continue;
                    }
                    let val = if t > 0 {
                        let a = if t > 1 { (t - 1) as f64 * w[idx(n + 1, t - 2, u, v)] } else { 0.0 };
                        a + pc[0] * w[idx(n + 1, t - 1, u, v)]
                    } else if u > 0 {
                        let a = if u > 1 { (u - 1) as f64 * w[idx(n + 1, t, u - 2, v)] } else { 0.0 };
                        a + pc[1] * w[idx(n + 1, t, u - 1, v)]
                    } else {
                        let a = if v > 1 { (v - 1) as f64 * w[idx(n + 1, t, u, v - 2)] } else { 0.0 };
                        a + pc[2] * w[idx(n + 1, t, u, v - 1)]
                    };
                    w[idx(n, t, u, v)] = val;
                }
            }
        }
    }
    for t in 0..=l {
        for u in 0..=l - t {
            for v in 0..=l - t - u {
                out[(t * d + u) * d + v] = w[idx(0, t, u, v)];
            }
        }
    }
}
