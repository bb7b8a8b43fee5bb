//! Site-site (X)RISM for a neat rigid solvent with the KH closure.
//!
//! The unknown is the short-range indirect correlation γ_s = h − c_s, where
//! c_s = c + β u_L carries no Coulomb tail. The long-range part −β u_L is
//! added back analytically in k-space before the OZ inversion.

use nalgebra::DMatrix;

use super::radial::RadialGrid;
use super::table::SolventSusceptibility;
use crate::mdiis::{rms, Mdiis};
use crate::model::SolventModel;
use crate::potential::{coulomb_long_k, coulomb_short, LjAu, ERF_SPLIT};
use crate::units::{angstrom_to_bohr, BOHR_IN_ANGSTROM};
use crate::{Error, Result};

/// KH closure: e^d − 1 below zero, linear above.
#[inline]
pub fn kh(d: f64) -> f64 {
    if d > 0.0 {
        d
    } else {
        d.exp_m1()
    }
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Intramolecular correlation ω_{vv'}(k) = sin(kL)/(kL) at one |k| (bohr⁻¹).
pub fn omega_matrix(solvent: &SolventModel, k: f64) -> DMatrix<f64> {
    let n = solvent.sites.len();
    DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else {
            sinc(k * angstrom_to_bohr(solvent.site_distance(a, b)))
        }
    })
}

/// ω on every point of a k-grid.
pub fn intramolecular_omega(solvent: &SolventModel, ks: &[f64]) -> Vec<DMatrix<f64>> {
    ks.iter().map(|&k| omega_matrix(solvent, k)).collect()
}

/// Unordered site pairs (a ≤ b) in row-major order.
pub fn site_pairs(n_sites: usize) -> Vec<(usize, usize)> {
    (0..n_sites).flat_map(|a| (a..n_sites).map(move |b| (a, b))).collect()
}

#[derive(Debug, Clone)]
pub struct Rism1dOptions {
    /// RMS residual of γ_s at convergence.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Damped Picard warm-up before MDIIS engages.
    pub picard_steps: usize,
    pub picard_damping: f64,
    pub mdiis_size: usize,
    pub mdiis_mixing: f64,
    /// Coulomb erf split width, bohr. Results do not depend on it.
    pub erf_split: f64,
}

impl Default for Rism1dOptions {
    fn default() -> Self {
        Rism1dOptions {
            tolerance: 1e-8,
            max_iterations: 5000,
            picard_steps: 30,
            picard_damping: 0.2,
            mdiis_size: 10,
            mdiis_mixing: 0.3,
            erf_split: ERF_SPLIT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rism1dSolution {
    pub grid: RadialGrid,
    pub pairs: Vec<(usize, usize)>,
    /// g_{ab}(r) per pair.
    pub g: Vec<Vec<f64>>,
    /// h_{ab}(k) per pair.
    pub h_k: Vec<Vec<f64>>,
    /// RMS residual of every accepted iterate (initial guess first).
    pub residual_history: Vec<f64>,
    /// Index into `residual_history` of the last iterate before MDIIS.
    pub mdiis_start: usize,
    pub susceptibility: SolventSusceptibility,
}

impl Rism1dSolution {
    pub fn pair_index(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.pairs.iter().position(|&p| p == (a, b)).expect("site pair in range")
    }

    /// Position (angstrom) and height of the largest g_ab(r) beyond `r_min` angstrom.
    pub fn peak(&self, a: usize, b: usize, r_min: f64) -> (f64, f64) {
        let g = &self.g[self.pair_index(a, b)];
        let mut best = (0.0, f64::NEG_INFINITY);
        for (j, &v) in g.iter().enumerate() {
            let r = self.grid.r(j) * BOHR_IN_ANGSTROM;
            if r >= r_min && v > best.1 {
                best = (r, v);
            }
        }
        best
    }
}

struct Problem<'a> {
    grid: &'a RadialGrid,
    pairs: Vec<(usize, usize)>,
    n_sites: usize,
    rho: f64,
    /// β u_SR(r) per pair.
    beta_u: Vec<Vec<f64>>,
    /// β u_L(k) per pair.
    beta_ul_k: Vec<Vec<f64>>,
    omega: Vec<DMatrix<f64>>,
}

impl Problem<'_> {
    fn closure(&self, gamma: &[f64], p: usize, j: usize) -> f64 {
        kh(-self.beta_u[p][j] + gamma[p * self.grid.n() + j])
    }

    /// One OZ/closure sweep; returns the new γ_s and h(k).
    fn map(&self, gamma: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.grid.n();
        let np = self.pairs.len();
        let cs_k: Vec<Vec<f64>> = (0..np)
            .map(|p| {
                let c: Vec<f64> = (0..n).map(|j| self.closure(gamma, p, j) - gamma[p * n + j]).collect();
                self.grid.forward(&c)
            })
            .collect();
        let mut h_k = vec![vec![0.0; n]; np];
        let ns = self.n_sites;
        for i in 0..n - 1 {
            let mut c = DMatrix::zeros(ns, ns);
            for (p, &(a, b)) in self.pairs.iter().enumerate() {
                let v = cs_k[p][i] - self.beta_ul_k[p][i];
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
            let w = &self.omega[i];
            let wcw = w * &c * w;
            let m = DMatrix::identity(ns, ns) - w * &c * self.rho;
            let h = m
                .lu()
                .solve(&wcw)
                .ok_or_else(|| Error::Susceptibility("singular OZ matrix: thermodynamically unstable state".into()))?;
            for (p, &(a, b)) in self.pairs.iter().enumerate() {
                h_k[p][i] = 0.5 * (h[(a, b)] + h[(b, a)]);
            }
        }
        let mut out = vec![0.0; np * n];
        for p in 0..np {
            let gk: Vec<f64> = (0..n).map(|i| h_k[p][i] - cs_k[p][i]).collect();
            out[p * n..(p + 1) * n].copy_from_slice(&self.grid.backward(&gk));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Susceptibility("non-finite correlation function: thermodynamically unstable state".into()));
        }
        Ok((out, h_k))
    }

    /// A stable homogeneous fluid has a positive semidefinite ω + ρh at every k.
    fn check_stability(&self, h_k: &[Vec<f64>]) -> Result<()> {
        let n = self.grid.n();
        for i in 0..n - 1 {
            let ns = self.n_sites;
            let mut h = DMatrix::zeros(ns, ns);
            for (p, &(a, b)) in self.pairs.iter().enumerate() {
                h[(a, b)] = h_k[p][i];
                h[(b, a)] = h_k[p][i];
            }
            let s = &self.omega[i] + h * self.rho;
            let (vals, _) = crate::linalg::eigh(&s);
            if vals[0] < -1e-8 * vals[ns - 1].abs().max(1.0) {
                return Err(Error::Susceptibility(format!(
                    "negative structure factor eigenvalue {:.3e} at k = {:.4} 1/bohr: thermodynamically unstable state",
                    vals[0],
                    self.grid.k(i)
                )));
            }
        }
        Ok(())
    }
}

/// Solves the neat-solvent site-site OZ/KH equations and assembles χ = ω + ρh.
pub fn solve_1d_rism(solvent: &SolventModel, grid: &RadialGrid, opts: &Rism1dOptions) -> Result<Rism1dSolution> {
    solvent.validate()?;
    let ns = solvent.sites.len();
    let pairs = site_pairs(ns);
    let n = grid.n();
    let beta = solvent.beta();
    let rho = solvent.density * BOHR_IN_ANGSTROM.powi(3);
    let lj: Vec<LjAu> = solvent.sites.iter().map(|s| LjAu::from(s.lj())).collect();
    let rs = grid.rs();
    let ks = grid.ks();
    let mut beta_u = Vec::new();
    let mut beta_ul_k = Vec::new();
    for &(a, b) in &pairs {
        let p = lj[a].mix(&lj[b]);
        let qq = solvent.sites[a].charge * solvent.sites[b].charge;
        beta_u.push(rs.iter().map(|&r| beta * (p.energy(r) + coulomb_short(qq, r, opts.erf_split))).collect::<Vec<_>>());
        beta_ul_k.push(ks.iter().map(|&k| beta * coulomb_long_k(qq, k, opts.erf_split)).collect::<Vec<_>>());
    }
    let prob = Problem {
        grid,
        pairs: pairs.clone(),
        n_sites: ns,
        rho,
        beta_u,
        beta_ul_k,
        omega: intramolecular_omega(solvent, &ks),
    };

    let mut x = vec![0.0; pairs.len() * n];
    let (fx, mut h_k) = prob.map(&x)?;
    let mut r: Vec<f64> = fx.iter().zip(&x).map(|(a, b)| a - b).collect();
    let mut res = rms(&r);
    let mut history = vec![res];
    let mut mdiis = Mdiis::new(opts.mdiis_size, opts.mdiis_mixing);
    let mut iterations = 0;
    let mut mdiis_start = None;
    let mut stalled = 0;
    while res >= opts.tolerance {
        if iterations >= opts.max_iterations {
            return Err(Error::SolventNotConverged { iterations, residual: res });
        }
        iterations += 1;
        if iterations <= opts.picard_steps {
            let t: Vec<f64> = x.iter().zip(&r).map(|(a, b)| a + opts.picard_damping * b).collect();
            let (f, h) = prob.map(&t)?;
            r = f.iter().zip(&t).map(|(a, b)| a - b).collect();
            x = t;
            h_k = h;
            res = rms(&r);
            history.push(res);
            continue;
        }
        // MDIIS phase: every trial joins the subspace, but only iterates that
        // lower the residual are accepted
        mdiis_start.get_or_insert(history.len() - 1);
        if mdiis.is_empty() {
            mdiis.push(x.clone(), r.clone());
        }
        let t = mdiis.extrapolate();
        match prob.map(&t) {
            Ok((f, h)) => {
                let rt: Vec<f64> = f.iter().zip(&t).map(|(a, b)| a - b).collect();
                let res_t = rms(&rt);
                if !res_t.is_finite() {
                    mdiis.clear();
                    continue;
                }
                mdiis.push(t.clone(), rt.clone());
                if res_t < res {
                    x = t;
                    r = rt;
                    h_k = h;
                    res = res_t;
                    history.push(res);
                    stalled = 0;
                } else {
                    stalled += 1;
                }
            }
            Err(_) => {
                stalled = opts.mdiis_size;
            }
        }
        if stalled >= opts.mdiis_size {
            // restart from the best iterate with a fresh subspace
            mdiis.clear();
            stalled = 0;
        }
    }
    let history_len = history.len() - 1;
    prob.check_stability(&h_k)?;
    let g: Vec<Vec<f64>> = (0..pairs.len())
        .map(|p| (0..n).map(|j| 1.0 + prob.closure(&x, p, j)).collect())
        .collect();
    let susceptibility = SolventSusceptibility::from_h(solvent, grid, &h_k);
    log::info!("1D-RISM converged in {iterations} iterations (residual {res:.2e})");
    Ok(Rism1dSolution {
        grid: grid.clone(),
        pairs,
        g,
        h_k,
        residual_history: history,
        mdiis_start: mdiis_start.unwrap_or(history_len),
        susceptibility,
    })
}
