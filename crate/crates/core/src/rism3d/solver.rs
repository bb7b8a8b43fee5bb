//! 3D-RISM for a solute in a rigid molecular solvent, closed with KH.
//!
//! The unknown is the indirect correlation t_v = h_v − c_v. One map
//! evaluation applies the closure (c from t), convolves c with the solvent
//! susceptibility in k-space (h from c) and returns t' = h − c.

use num_complex::Complex64;
use rayon::prelude::*;

use super::fft::Fft3;
use super::grid::Grid3D;
use crate::mdiis::{dot, Mdiis};
use crate::model::{distance, Atom, SolventModel};
use crate::potential::LjAu;
use crate::solvent::xrism::kh;
use crate::solvent::ChiInterpolator;
use crate::units::BOHR_IN_ANGSTROM;
use crate::{Error, Result};

/// Upper bound on β u; keeps nuclei and LJ cores finite while leaving g
/// numerically zero there.
pub const POTENTIAL_CAP_KT: f64 = 1e3;

/// One distinct solvent site type; identical sites are collapsed.
#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub label: String,
    pub charge: f64,
    pub lj: LjAu,
    pub multiplicity: usize,
    /// Representative site index in the solvent model.
    pub site: usize,
}

pub fn solvent_species(solvent: &SolventModel) -> Vec<Species> {
    solvent
        .species()
        .into_iter()
        .map(|(site, multiplicity)| {
            let s = &solvent.sites[site];
            Species {
                label: s.label.clone(),
                charge: s.charge,
                lj: LjAu::from(s.lj()),
                multiplicity,
                site,
            }
        })
        .collect()
}

/// Species-collapsed susceptibility χ_ab(|k|) on every |m|² of a 3D grid,
/// plus the thermodynamic constants of the solvent.
#[derive(Debug, Clone)]
pub struct SolventKernel {
    pub species: Vec<Species>,
    pub beta: f64,
    /// Molecular number density, bohr⁻³.
    pub rho: f64,
    dk: f64,
    chi: Vec<f64>,
}

impl SolventKernel {
    /// χ_ab = Σ_{α ∈ a} χ_{α, rep(b)} evaluated from a radial table.
    pub fn new(solvent: &SolventModel, interp: &ChiInterpolator, grid: &Grid3D) -> Result<Self> {
        if interp.n_sites() != solvent.sites.len() {
            return Err(Error::Susceptibility(format!(
                "table has {} sites, solvent has {}",
                interp.n_sites(),
                solvent.sites.len()
            )));
        }
        if grid.k_max() > interp.k_max() {
            return Err(Error::Susceptibility(format!(
                "3D grid reaches |k| = {:.4} bohr⁻¹ beyond the table limit {:.4}",
                grid.k_max(),
                interp.k_max()
            )));
        }
        let species = solvent_species(solvent);
        let members: Vec<Vec<usize>> = species
            .iter()
            .map(|s| (0..solvent.sites.len()).filter(|&i| solvent.sites[i].label == s.label).collect())
            .collect();
        let reps: Vec<usize> = species.iter().map(|s| s.site).collect();
        Ok(Self::from_fn(solvent, grid, |a, b, k| {
            members[a].iter().map(|&alpha| interp.value(alpha, reps[b], k)).sum()
        }))
    }

    /// Kernel from an arbitrary species-level χ_ab(k).
    pub fn from_fn(solvent: &SolventModel, grid: &Grid3D, f: impl Fn(usize, usize, f64) -> f64 + Sync) -> Self {
        let species = solvent_species(solvent);
        let ns = species.len();
        let dk = grid.dk();
        let chi: Vec<f64> = (0..=grid.max_m2())
            .into_par_iter()
            .flat_map_iter(|m2| {
                let k = dk * (m2 as f64).sqrt();
                let f = &f;
                (0..ns * ns).map(move |ab| f(ab / ns, ab % ns, k))
            })
            .collect();
        SolventKernel {
            species,
            beta: solvent.beta(),
            rho: solvent.density * BOHR_IN_ANGSTROM.powi(3),
            dk,
            chi,
        }
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    #[inline]
    pub fn chi(&self, m2: usize, a: usize, b: usize) -> f64 {
        let ns = self.species.len();
        self.chi[(m2 * ns + a) * ns + b]
    }

    /// Reciprocal spacing of the grid this kernel was built for.
    pub fn dk(&self) -> f64 {
        self.dk
    }
}

/// Solute-solvent potential u_v(r) (hartree) per species: Lorentz-Berthelot
/// LJ over solute atoms plus q_v times the solute ESP, capped at
/// `POTENTIAL_CAP_KT` k_BT.
pub fn build_potential(atoms: &[Atom], esp: &[f64], solvent: &SolventModel, grid: &Grid3D) -> Result<Vec<Vec<f64>>> {
    if esp.len() != grid.len() {
        return Err(Error::Config(format!(
            "ESP has {} values for a grid of {} points",
            esp.len(),
            grid.len()
        )));
    }
    let cap = POTENTIAL_CAP_KT / solvent.beta();
    Ok(solvent_species(solvent)
        .iter()
        .map(|s| {
            let mixed: Vec<([f64; 3], LjAu)> = atoms
                .iter()
                .map(|a| (a.position, LjAu::from(a.lj).mix(&s.lj)))
                .filter(|(_, p)| p.epsilon != 0.0)
                .collect();
            (0..grid.len())
                .into_par_iter()
                .map(|idx| {
                    let p = grid.point(idx);
                    let mut u = 0.0;
                    for (c, m) in &mixed {
                        let r = distance(&p, c);
                        u += if r < 1e-12 { f64::INFINITY } else { m.energy(r) };
                    }
                    if s.charge != 0.0 {
                        u += s.charge * esp[idx];
                    }
                    if u.is_finite() && u <= cap {
                        u
                    } else {
                        cap
                    }
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct RismOptions {
    /// Max-norm of t' − t at convergence.
    pub tolerance: f64,
    /// Map evaluations, the initial guess included.
    pub max_iterations: usize,
    pub picard_steps: usize,
    pub picard_damping: f64,
    pub mdiis_size: usize,
    pub mdiis_mixing: f64,
    /// Abort after this many consecutive residual increases.
    pub divergence_steps: usize,
}

impl Default for RismOptions {
    fn default() -> Self {
        RismOptions {
            tolerance: 1e-6,
            max_iterations: 5000,
            picard_steps: 10,
            picard_damping: 0.2,
            mdiis_size: 10,
            mdiis_mixing: 0.3,
            divergence_steps: 20,
        }
    }
}

/// Converged fields of one species. `u` is in hartree.
#[derive(Debug, Clone)]
pub struct SiteField {
    pub label: String,
    pub charge: f64,
    pub multiplicity: usize,
    pub u: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RismLogEntry {
    pub iteration: usize,
    pub residual: f64,
    /// Δμ of the evaluated iterate, hartree.
    pub dmu: f64,
}

#[derive(Debug, Clone)]
pub struct RismSolution {
    pub fields: Vec<SiteField>,
    /// Final indirect correlation, species-major; a warm start for the next solve.
    pub t: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub log: Vec<RismLogEntry>,
}

impl RismSolution {
    pub fn field(&self, label: &str) -> Option<&SiteField> {
        self.fields.iter().find(|f| f.label == label)
    }

    pub fn residual_history(&self) -> Vec<f64> {
        self.log.iter().map(|e| e.residual).collect()
    }

    /// `iteration,residual,dmu` per map evaluation.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("iteration,residual,dmu\n");
        for e in &self.log {
            s.push_str(&format!("{},{:e},{:.12e}\n", e.iteration, e.residual, e.dmu));
        }
        s
    }
}

/// Thread-count independent sum.
fn fixed_sum(v: impl IndexedParallelIterator<Item = f64>) -> f64 {
    const CHUNK: usize = 1 << 14;
    let parts: Vec<f64> = v.chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    parts.iter().sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.par_iter().map(|x| x.abs()).reduce(|| 0.0, f64::max)
}

struct Evaluation {
    /// Closure h = g − 1 and c, species-major.
    h: Vec<f64>,
    c: Vec<f64>,
    residual: Vec<f64>,
}

struct Problem<'a> {
    kernel: &'a SolventKernel,
    grid: &'a Grid3D,
    fft: Fft3,
    beta_u: Vec<f64>,
    m2: Vec<u32>,
}

impl Problem<'_> {
    fn evaluate(&self, t: &[f64]) -> Evaluation {
        let (h, c): (Vec<f64>, Vec<f64>) = t
            .par_iter()
            .zip(&self.beta_u)
            .map(|(&t, &bu)| {
                let e = kh(t - bu);
                (e, e - t)
            })
            .unzip();
        let h_oz = convolve_with(&self.fft, &self.m2, &c, self.kernel, self.grid);
        let t_new: Vec<f64> = h_oz.par_iter().zip(&c).map(|(h, c)| h - c).collect();
        let residual = t_new.par_iter().zip(t).map(|(a, b)| a - b).collect();
        Evaluation { h, c, residual }
    }

    fn dmu(&self, ev: &Evaluation) -> f64 {
        let n = self.grid.len();
        let k = self.kernel;
        let mut total = 0.0;
        for (a, s) in k.species.iter().enumerate() {
            let range = a * n..(a + 1) * n;
            let sum = fixed_sum(ev.h[range.clone()].par_iter().zip(&ev.c[range]).map(|(&h, &c)| {
                let hh = if h < 0.0 { 0.5 * h * h } else { 0.0 };
                hh - c - 0.5 * h * c
            }));
            total += s.multiplicity as f64 * sum;
        }
        total * k.rho * self.grid.volume_element() / k.beta
    }
}

fn convolve_with(fft: &Fft3, m2: &[u32], c: &[f64], kernel: &SolventKernel, grid: &Grid3D) -> Vec<f64> {
    let n = grid.len();
    let ns = kernel.n_species();
    let ck: Vec<Vec<Complex64>> = (0..ns).map(|a| fft.forward_real(&c[a * n..(a + 1) * n])).collect();
    let mut out = Vec::with_capacity(ns * n);
    for b in 0..ns {
        let hk: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let m2 = m2[i] as usize;
                (0..ns).map(|a| ck[a][i] * kernel.chi(m2, a, b)).sum()
            })
            .collect();
        out.extend(fft.inverse_real(hk));
    }
    out
}

/// h_b = Σ_a c_a ∗ χ_ab on the periodic grid; `c` is species-major.
pub fn convolve(c: &[f64], kernel: &SolventKernel, grid: &Grid3D) -> Vec<f64> {
    let m2: Vec<u32> = (0..grid.len()).map(|i| grid.m2(i) as u32).collect();
    convolve_with(&Fft3::new(grid.n), &m2, c, kernel, grid)
}

/// Solves the 3D-RISM/KH equations for potentials `u` (hartree, one field
/// per species). `guess` is a previous solution's `t`.
pub fn solve_3drism(
    u: &[Vec<f64>],
    kernel: &SolventKernel,
    grid: &Grid3D,
    opts: &RismOptions,
    guess: Option<&[f64]>,
) -> Result<RismSolution> {
    let n = grid.len();
    let ns = kernel.n_species();
    if u.len() != ns || u.iter().any(|f| f.len() != n) {
        return Err(Error::Config(format!("expected {ns} potential fields of {n} points")));
    }
    if (kernel.dk() - grid.dk()).abs() > 1e-12 * grid.dk() || kernel.chi.len() != (grid.max_m2() + 1) * ns * ns {
        return Err(Error::Susceptibility("solvent kernel was built for a different grid".into()));
    }
    if u.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("solute-solvent potential".into()));
    }
    let beta_u: Vec<f64> = u.iter().flatten().map(|v| kernel.beta * v).collect();
    let prob = Problem {
        kernel,
        grid,
        fft: Fft3::new(grid.n),
        beta_u,
        m2: (0..n).map(|i| grid.m2(i) as u32).collect(),
    };
    let mut x = match guess {
        Some(g) if g.len() == ns * n => g.to_vec(),
        Some(g) => {
            return Err(Error::Config(format!("initial guess has {} values, expected {}", g.len(), ns * n)));
        }
        None => vec![0.0; ns * n],
    };
    let mut ev = prob.evaluate(&x);
    let mut res = max_abs(&ev.residual);
    let mut log = vec![RismLogEntry { iteration: 1, residual: res, dmu: prob.dmu(&ev) }];
    let mut iterations = 1;
    let mut best = (res, x.clone(), ev.residual.clone());
    let mut mdiis = Mdiis::new(opts.mdiis_size, opts.mdiis_mixing);
    let mut picard_until = opts.picard_steps;
    let mut increases = 0;
    while !(res < opts.tolerance) {
        if iterations >= opts.max_iterations {
            return Err(Error::RismFailed {
                reason: "did not converge".into(),
                iterations,
                residual: res,
            });
        }
        let next: Vec<f64> = if iterations <= picard_until {
            x.par_iter().zip(&ev.residual).map(|(a, r)| a + opts.picard_damping * r).collect()
        } else {
            mdiis.push(x.clone(), ev.residual.clone());
            mdiis.extrapolate()
        };
        let trial = prob.evaluate(&next);
        let r_trial = max_abs(&trial.residual);
        iterations += 1;
        if !r_trial.is_finite() || r_trial > 100.0 * best.0 {
            // fall back to the best iterate and re-enter with damped steps
            log::debug!("3D-RISM restart at iteration {iterations} (residual {r_trial:.3e})");
            mdiis.clear();
            x = best.1.clone();
            ev = prob.evaluate(&x);
            res = best.0;
            picard_until = iterations + opts.picard_steps;
            increases = 0;
            log.push(RismLogEntry { iteration: iterations, residual: r_trial, dmu: f64::NAN });
            continue;
        }
        increases = if r_trial > res { increases + 1 } else { 0 };
        x = next;
        ev = trial;
        res = r_trial;
        log.push(RismLogEntry { iteration: iterations, residual: res, dmu: prob.dmu(&ev) });
        if res < best.0 {
            best = (res, x.clone(), ev.residual.clone());
        }
        if increases >= opts.divergence_steps {
            return Err(Error::RismFailed {
                reason: format!("diverged ({increases} consecutive residual increases)"),
                iterations,
                residual: res,
            });
        }
    }
    log::info!("3D-RISM converged in {iterations} iterations (max residual {res:.2e})");
    let fields = kernel
        .species
        .iter()
        .enumerate()
        .map(|(a, s)| {
            let r = a * n..(a + 1) * n;
            SiteField {
                label: s.label.clone(),
                charge: s.charge,
                multiplicity: s.multiplicity,
                u: u[a].clone(),
                g: ev.h[r.clone()].iter().map(|h| 1.0 + h).collect(),
                c: ev.c[r.clone()].to_vec(),
                h: ev.h[r].to_vec(),
            }
        })
        .collect();
    Ok(RismSolution { fields, t: x, iterations, residual: res, log })
}

/// Max-norm residual of `t` re-evaluated from scratch.
pub fn residual_of(u: &[Vec<f64>], kernel: &SolventKernel, grid: &Grid3D, t: &[f64]) -> f64 {
    let prob = Problem {
        kernel,
        grid,
        fft: Fft3::new(grid.n),
        beta_u: u.iter().flatten().map(|v| kernel.beta * v).collect(),
        m2: (0..grid.len()).map(|i| grid.m2(i) as u32).collect(),
    };
    max_abs(&prob.evaluate(t).residual)
}

/// KH excess chemical potential, hartree:
/// β⁻¹ Σ_v ρ_v Σ_r [½ h² Θ(−h) − c − ½ h c] δ³.
pub fn excess_chemical_potential(fields: &[SiteField], kernel: &SolventKernel, grid: &Grid3D) -> f64 {
    let mut total = 0.0;
    for f in fields {
        let sum = fixed_sum(f.h.par_iter().zip(&f.c).map(|(&h, &c)| {
            let hh = if h < 0.0 { 0.5 * h * h } else { 0.0 };
            hh - c - 0.5 * h * c
        }));
        total += f.multiplicity as f64 * sum;
    }
    total * kernel.rho * grid.volume_element() / kernel.beta
}

/// Σ_v ρ_v Σ_r g_v u_v δ³, hartree.
pub fn binding_energy(fields: &[SiteField], kernel: &SolventKernel, grid: &Grid3D) -> f64 {
    let mut total = 0.0;
    for f in fields {
        total += f.multiplicity as f64 * dot(&f.g, &f.u);
    }
    total * kernel.rho * grid.volume_element()
}

/// Solvent point charges on grid points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolventCharges {
    pub positions: Vec<[f64; 3]>,
    pub charges: Vec<f64>,
    /// Sum of the kept charges.
    pub total: f64,
    /// Number of grid points dropped by the threshold.
    pub dropped: usize,
}

impl SolventCharges {
    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }
}

/// q_I = Σ_v ρ_v q_v g_v(r_I) δ³, keeping |q_I| ≥ `threshold`.
///
/// A point on the lower face of the periodic cell is the same point as its
/// image on the upper face; its charge is shared equally between the two so
/// the charge set keeps the symmetry of the cell about its centre.
pub fn solvent_point_charges(fields: &[SiteField], kernel: &SolventKernel, grid: &Grid3D, threshold: f64) -> SolventCharges {
    let w = kernel.rho * grid.volume_element();
    let q: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| fields.iter().map(|f| f.multiplicity as f64 * f.charge * f.g[i]).sum::<f64>() * w)
        .collect();
    let side = grid.n as f64 * grid.spacing;
    let mut out = SolventCharges::default();
    for (i, &qi) in q.iter().enumerate() {
        if qi.abs() < threshold {
            out.dropped += 1;
            continue;
        }
        let p = grid.point(i);
        let faces: Vec<usize> = (0..3).filter(|&d| grid.coords(i)[d] == 0).collect();
        let copies = 1usize << faces.len();
        for m in 0..copies {
            let mut x = p;
            for (b, &d) in faces.iter().enumerate() {
                if m >> b & 1 == 1 {
                    x[d] += side;
                }
            }
            out.positions.push(x);
            out.charges.push(qi / copies as f64);
        }
    }
    out.total = q.iter().filter(|x| x.abs() >= threshold).sum();
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{GridSpec, LennardJones};
    use crate::solvent::{solve_1d_rism, RadialGrid, Rism1dOptions};
    use std::sync::OnceLock;

    /// Water χ from the default radial grid, solved once per test binary.
    pub fn water_interp() -> &'static ChiInterpolator {
        static CELL: OnceLock<ChiInterpolator> = OnceLock::new();
        CELL.get_or_init(|| {
            solve_1d_rism(&SolventModel::tip3p(), &RadialGrid::default_water(), &Rism1dOptions::default())
                .unwrap()
                .susceptibility
                .interpolator()
                .unwrap()
        })
    }

    fn sphere(sigma: f64, epsilon: f64) -> Vec<Atom> {
        vec![Atom::new("C", [0.0; 3], LennardJones { sigma, epsilon }).unwrap()]
    }

    #[test]
    fn zero_potential_is_a_one_step_fixed_point() {
        let solvent = SolventModel::tip3p();
        let grid = Grid3D::centered(&GridSpec { points: 16, spacing: 0.5 }, [0.0; 3]).unwrap();
        let kernel = SolventKernel::new(&solvent, water_interp(), &grid).unwrap();
        let u = vec![vec![0.0; grid.len()]; 2];
        let sol = solve_3drism(&u, &kernel, &grid, &RismOptions::default(), None).unwrap();
        assert_eq!(sol.iterations, 1);
        for f in &sol.fields {
            assert!(f.g.iter().all(|&g| g == 1.0));
            assert!(f.c.iter().all(|&c| c == 0.0));
        }
        assert_eq!(excess_chemical_potential(&sol.fields, &kernel, &grid), 0.0);
        let q = solvent_point_charges(&sol.fields, &kernel, &grid, 1e-7);
        assert!(q.is_empty());
        assert_eq!(q.dropped, grid.len());
    }

    #[test]
    fn potential_uses_mixed_lj_and_charge() {
        let solvent = SolventModel::tip3p();
        let grid = Grid3D::new(8, 0.4, [0.3, -1.1, 0.7]).unwrap();
        let atoms = vec![
            Atom::new("O", [0.0; 3], crate::model::default_lennard_jones("O").unwrap()).unwrap(),
            Atom::new("H", [1.2, 0.9, 0.0], crate::model::default_lennard_jones("H").unwrap()).unwrap(),
        ];
        let esp: Vec<f64> = (0..grid.len()).map(|i| 0.01 * (i as f64).cos()).collect();
        let u = build_potential(&atoms, &esp, &solvent, &grid).unwrap();
        let species = solvent_species(&solvent);
        assert_eq!(species.len(), 2);
        assert_eq!(species[1].multiplicity, 2);
        let cap = POTENTIAL_CAP_KT / solvent.beta();
        let mut checked = 0;
        for idx in 0..grid.len() {
            let p = grid.point(idx);
            for (s, us) in species.iter().zip(&u) {
                // direct evaluation from angstrom and J/mol parameters
                let site = &solvent.sites[s.site];
                let mut e = 0.0;
                for a in &atoms {
                    let sig = 0.5 * (a.lj.sigma + site.sigma);
                    let eps = (a.lj.epsilon * site.epsilon).sqrt() / crate::units::HARTREE_IN_J_PER_MOL;
                    let r = distance(&p, &a.position) * crate::units::BOHR_IN_ANGSTROM;
                    let x = (sig / r).powi(6);
                    e += 4.0 * eps * (x * x - x);
                }
                e += site.charge * esp[idx];
                if e < cap {
                    assert!((us[idx] - e).abs() < 1e-10 * e.abs().max(1e-3), "{} vs {e}", us[idx]);
                    checked += 1;
                } else {
                    assert_eq!(us[idx], cap);
                }
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn nucleus_on_grid_point_is_capped() {
        let solvent = SolventModel::tip3p();
        let grid = Grid3D::centered(&GridSpec { points: 8, spacing: 0.5 }, [0.0; 3]).unwrap();
        let atoms = sphere(3.0, 500.0);
        let mut esp = vec![0.1; grid.len()];
        let c = grid.index(4, 4, 4);
        esp[c] = f64::INFINITY;
        let u = build_potential(&atoms, &esp, &solvent, &grid).unwrap();
        let cap = POTENTIAL_CAP_KT / solvent.beta();
        for f in &u {
            assert_eq!(f[c], cap);
            assert!(f.iter().all(|v| v.is_finite() && *v <= cap));
        }
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let solvent = SolventModel::tip3p();
        let grid = Grid3D::new(16, 0.7, [0.0; 3]).unwrap();
        let chi = |a: usize, b: usize, k: f64| (1.0 + a as f64 + 0.5 * b as f64) * (-0.3 * k * k).exp() + if a == b { 0.1 } else { 0.0 };
        let kernel = SolventKernel::from_fn(&solvent, &grid, chi);
        let n = grid.len();
        let c: Vec<f64> = (0..2 * n).map(|i| ((i * 7919) % 1013) as f64 / 1013.0 - 0.5).collect();
        let fast = convolve(&c, &kernel, &grid);
        // real-space kernel K_ab(r) = (1/N) Σ_k χ_ab(|k|) cos(k·r), then a direct periodic sum
        let nn = grid.n;
        let tau = 2.0 * std::f64::consts::PI / nn as f64;
        let mut kern = vec![vec![0.0; n]; 4];
        for (ab, kr) in kern.iter_mut().enumerate() {
            for (r, v) in kr.iter_mut().enumerate() {
                let rc = grid.coords(r);
                let mut s = 0.0;
                for q in 0..n {
                    let qc = grid.coords(q);
                    let f = [grid.frequency(qc[0]), grid.frequency(qc[1]), grid.frequency(qc[2])];
                    let k = grid.dk() * ((f[0] * f[0] + f[1] * f[1] + f[2] * f[2]) as f64).sqrt();
                    let ph = tau * (f[0] * rc[0] as i64 + f[1] * rc[1] as i64 + f[2] * rc[2] as i64) as f64;
                    s += chi(ab / 2, ab % 2, k) * ph.cos();
                }
                *v = s / n as f64;
            }
        }
        let mut max_rel: f64 = 0.0;
        for b in 0..2 {
            for i in (0..n).step_by(37) {
                let ic = grid.coords(i);
                let mut s = 0.0;
                for a in 0..2 {
                    for j in 0..n {
                        let jc = grid.coords(j);
                        let d = grid.index((ic[0] + nn - jc[0]) % nn, (ic[1] + nn - jc[1]) % nn, (ic[2] + nn - jc[2]) % nn);
                        s += c[a * n + j] * kern[a * 2 + b][d];
                    }
                }
                max_rel = max_rel.max((fast[b * n + i] - s).abs() / s.abs().max(1e-3));
            }
        }
        assert!(max_rel < 1e-10, "relative deviation {max_rel:e}");
    }

    #[test]
    fn repulsive_sphere_in_water() {
        let solvent = SolventModel::tip3p();
        let grid = Grid3D::centered(&GridSpec { points: 32, spacing: 0.5 }, [0.0; 3]).unwrap();
        let kernel = SolventKernel::new(&solvent, water_interp(), &grid).unwrap();
        let atoms = sphere(3.5, 300.0);
        let u = build_potential(&atoms, &vec![0.0; grid.len()], &solvent, &grid).unwrap();
        let opts = RismOptions::default();
        let sol = solve_3drism(&u, &kernel, &grid, &opts, None).unwrap();
        assert!(sol.residual < opts.tolerance);
        assert!(residual_of(&u, &kernel, &grid, &sol.t) < 2.0 * opts.tolerance);
        let core = crate::units::angstrom_to_bohr(1.2);
        for f in &sol.fields {
            assert!(f.g.iter().all(|&g| g >= 0.0));
            for (i, g) in f.g.iter().enumerate() {
                if distance(&grid.point(i), &[0.0; 3]) < core {
                    assert!(*g < 1e-3, "{} g = {g} inside the core", f.label);
                }
            }
        }
        // first shell of oxygen beyond contact
        let o = sol.field("O").unwrap();
        let gmax = o.g.iter().cloned().fold(0.0, f64::max);
        assert!(gmax > 1.2);
        let dmu = excess_chemical_potential(&sol.fields, &kernel, &grid);
        assert!(dmu.is_finite() && dmu > 0.0, "cavity Δμ {dmu}");
        assert_eq!(sol.log.len(), sol.iterations);
        // a warm start at the solution is already converged
        let again = solve_3drism(&u, &kernel, &grid, &opts, Some(&sol.t)).unwrap();
        assert_eq!(again.iterations, 1);
    }

    #[test]
    fn kernel_rejects_grids_beyond_the_table() {
        let solvent = SolventModel::tip3p();
        let grid = Grid3D::new(16, 0.01, [0.0; 3]).unwrap();
        assert!(matches!(
            SolventKernel::new(&solvent, water_interp(), &grid),
            Err(Error::Susceptibility(_))
        ));
    }

    #[test]
    fn threshold_filters_charges() {
        let solvent = SolventModel::tip3p();
        let grid = Grid3D::new(4, 1.0, [0.0; 3]).unwrap();
        let kernel = SolventKernel::from_fn(&solvent, &grid, |_, _, _| 1.0);
        let mk = |label: &str, q: f64, m: usize, g: f64| SiteField {
            label: label.into(),
            charge: q,
            multiplicity: m,
            u: vec![0.0; 64],
            g: vec![g; 64],
            c: vec![0.0; 64],
            h: vec![g - 1.0; 64],
        };
        let fields = vec![mk("O", -0.834, 1, 1.5), mk("H", 0.417, 2, 1.0)];
        let q = solvent_point_charges(&fields, &kernel, &grid, 0.0);
        let expect = kernel.rho * (-0.834 * 1.5 + 0.834);
        // the corner point is shared by eight images, face points by two
        assert_eq!(q.len(), 5usize.pow(3));
        assert!((q.charges[0] - expect / 8.0).abs() < 1e-15);
        assert!((q.charges.iter().sum::<f64>() - 64.0 * expect).abs() < 1e-12);
        assert!((q.total - 64.0 * expect).abs() < 1e-12);
        assert!(solvent_point_charges(&fields, &kernel, &grid, f64::INFINITY).is_empty());
    }

    #[test]
    fn face_charges_keep_the_cell_mirror_symmetric() {
        let solvent = SolventModel::tip3p();
        let grid = Grid3D::centered(&GridSpec { points: 6, spacing: 0.5 }, [0.3, -0.2, 0.1]).unwrap();
        let kernel = SolventKernel::from_fn(&solvent, &grid, |_, _, _| 1.0);
        let c = grid.point(grid.index(3, 3, 3));
        // g even under y -> -y about the centre, in the periodic sense
        let g: Vec<f64> = (0..grid.len())
            .map(|i| {
                let [a, b, k] = grid.coords(i);
                let y = (b as i64 - 3).unsigned_abs() as f64;
                1.0 + 0.1 * a as f64 + 0.3 * y * y + 0.05 * k as f64
            })
            .collect();
        let field = SiteField {
            label: "O".into(),
            charge: -0.834,
            multiplicity: 1,
            u: vec![0.0; grid.len()],
            h: g.iter().map(|x| x - 1.0).collect(),
            g,
            c: vec![0.0; grid.len()],
        };
        let q = solvent_point_charges(&[field], &kernel, &grid, 0.0);
        let key = |p: [f64; 3]| p.map(|x| (x * 1e9).round() as i64);
        let map: std::collections::HashMap<_, f64> = q.positions.iter().zip(&q.charges).map(|(p, &v)| (key(*p), v)).collect();
        for (p, v) in q.positions.iter().zip(&q.charges) {
            let m = map[&key([p[0], 2.0 * c[1] - p[1], p[2]])];
            assert!((m - v).abs() < 1e-15);
        }
    }
}
