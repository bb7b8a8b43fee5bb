//! Self-consistent coupling of the electronic solver with 3D-RISM.
//!
//! Each macro-cycle builds the solvated one-electron operator from the
//! current solvent charges, solves the electronic problem, evaluates the
//! solute ESP on the solvent grid, solves 3D-RISM and derives new charges.

use nalgebra::{DMatrix, DVector};

use crate::basis::{build_basis, Shell};
use crate::hamiltonian::{ao_density, build_active_hamiltonian, OrbitalPartition};
use crate::integrals::points::nuclear_potential;
use crate::integrals::{IntegralTensors, PairExpansion};
use crate::linalg::{align_shells, degenerate_shells, rms_diff};
use crate::model::{ActiveSpaceSpec, ElectronicSolver, OrbitalSelection, RunConfig};
use crate::pauli::{jordan_wigner, PauliHamiltonian};
use crate::rism3d::{
    binding_energy, build_potential, excess_chemical_potential, solve_3drism, solvent_point_charges, Grid3D,
    RismOptions, RismSolution, SolventCharges, SolventKernel,
};
use crate::scf::{mp2_natural_orbitals, run_rhf_with, DenseEri, RhfOptions, RhfResult};
use crate::solvent::{solve_1d_rism, RadialGrid, Rism1dOptions, SolventSusceptibility};
use crate::vqe::{exact_ground_state, optimize_with, SectorEngine, SectorOperator, UccsdAnsatz, VqeOptions};
use crate::{Error, Result};

/// Loads the configured susceptibility table, or solves the neat solvent on
/// the default radial grid.
pub fn susceptibility_for(cfg: &RunConfig) -> Result<SolventSusceptibility> {
    match &cfg.susceptibility {
        Some(p) => SolventSusceptibility::load_for(p, &cfg.solvent),
        None => Ok(solve_1d_rism(&cfg.solvent, &RadialGrid::default_water(), &Rism1dOptions::default())?.susceptibility),
    }
}

#[derive(Debug, Clone, Default)]
pub struct DriverOptions {
    /// Skip the solvent entirely.
    pub gas: bool,
    pub rhf: RhfOptions,
    /// Overrides the RISM controls derived from the run configuration.
    pub rism: Option<RismOptions>,
}

/// One macro-cycle. Energies in hartree.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    /// A = ⟨H_iso⟩ + Δμ.
    pub helmholtz: f64,
    /// ⟨H_iso⟩ over the solvated state.
    pub e_solute: f64,
    pub dmu: f64,
    /// ⟨H_solv⟩.
    pub e_solvated: f64,
    /// ⟨V_solv⟩ = ⟨H_solv⟩ − ⟨H_iso⟩.
    pub v_solvent: f64,
    pub e_bind: f64,
    /// ⟨H_iso⟩ + E_bind.
    pub e_potential: f64,
    pub rism_residual: f64,
    pub rism_iterations: usize,
    /// Max-norm VQE gradient; zero for RHF and exact solvers.
    pub vqe_gradient: f64,
    /// RMS change of the AO density from the previous cycle.
    pub density_rms: f64,
    pub n_charges: usize,
    pub total_charge: f64,
}

/// State carried between related runs (points of a scan). Without it the
/// first cycle is a gas-phase solve.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub density: Option<DMatrix<f64>>,
    pub theta: Option<Vec<f64>>,
    pub rism_t: Option<Vec<f64>>,
    /// Solvent charges applied in the first cycle.
    pub charges: Option<SolventCharges>,
}

#[derive(Debug, Clone)]
pub struct ScfOutcome {
    pub history: Vec<CycleRecord>,
    pub converged: bool,
    /// Final AO density.
    pub density: DMatrix<f64>,
    /// Orbitals of the final cycle (canonical or natural).
    pub orbitals: DMatrix<f64>,
    pub partition: Option<OrbitalPartition>,
    pub rdm1: Option<DMatrix<f64>>,
    pub theta: Option<Vec<f64>>,
    /// Charges produced by the final RISM solve.
    pub charges: SolventCharges,
    pub grid: Option<Grid3D>,
    pub rism: Option<RismSolution>,
    /// Active-space Pauli Hamiltonians of the final cycle, gas and solvated.
    pub pauli_gas: Option<PauliHamiltonian>,
    pub pauli_solvated: Option<PauliHamiltonian>,
}

impl ScfOutcome {
    pub fn last(&self) -> &CycleRecord {
        self.history.last().expect("at least one cycle")
    }

    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            density: Some(self.density.clone()),
            theta: self.theta.clone(),
            rism_t: self.rism.as_ref().map(|r| r.t.clone()),
            charges: self.rism.as_ref().map(|_| self.charges.clone()),
        }
    }

    pub const CSV_HEADER: &'static str =
        "cycle,A,E_solute,dmu,H_solv,V_solv,rism_residual,vqe_gradient,E_bind,E_pot,density_rms,n_charges,total_charge";

    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.history {
            s.push_str(&format!(
                "{},{:.12},{:.12},{:.12},{:.12},{:.12},{:.3e},{:.3e},{:.12},{:.12},{:.3e},{},{:.8}\n",
                r.cycle,
                r.helmholtz,
                r.e_solute,
                r.dmu,
                r.e_solvated,
                r.v_solvent,
                r.rism_residual,
                r.vqe_gradient,
                r.e_bind,
                r.e_potential,
                r.density_rms,
                r.n_charges,
                r.total_charge
            ));
        }
        s
    }

    /// Four-decimal row of A, ⟨H_iso⟩, Δμ, ⟨H_solv⟩.
    pub fn summary(&self) -> String {
        let r = self.last();
        format!(
            "{:>12} {:>12} {:>12} {:>12}\n{:>12.4} {:>12.4} {:>12.4} {:>12.4}\n",
            "A", "<H_iso>", "dmu", "<H_solv>", r.helmholtz, r.e_solute, r.dmu, r.e_solvated
        )
    }
}

/// |ΔA| below this multiple of the tolerance counts as near convergence.
const STALL_WINDOW: f64 = 100.0;

/// Tightest 3D-RISM tolerance used when the macro loop stalls.
const RISM_FLOOR: f64 = 1e-9;

/// Flips MO signs so each column overlaps positively with the previous
/// cycle's orbital of the same index.
fn align_phases(c: &mut DMatrix<f64>, prev: &DMatrix<f64>, s: &DMatrix<f64>) {
    let ov = prev.transpose() * s * &*c;
    for j in 0..c.ncols() {
        if ov[(j, j)] < 0.0 {
            c.column_mut(j).neg_mut();
        }
    }
}

struct Electronic {
    density: DMatrix<f64>,
    e_solute: f64,
    e_solvated: f64,
    gradient: f64,
    theta: Option<Vec<f64>>,
    rdm1: Option<DMatrix<f64>>,
    pauli: Option<(PauliHamiltonian, PauliHamiltonian)>,
}

/// Everything fixed for one geometry.
pub struct System {
    pub shells: Vec<Shell>,
    pub ints: IntegralTensors,
    pub eri: DenseEri,
    pub pairs: PairExpansion,
    pub n_electrons: usize,
}

impl System {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let shells = build_basis(&cfg.atoms, cfg.basis)?;
        let ints = IntegralTensors::compute(&shells, &cfg.atoms)?;
        let eri = DenseEri::new(&ints);
        let pairs = PairExpansion::new(&shells);
        Ok(System {
            shells,
            ints,
            eri,
            pairs,
            n_electrons: cfg.n_electrons(),
        })
    }

    /// RHF in the field of point charges; an empty set means gas phase.
    pub fn rhf(&self, charges: &SolventCharges, guess: Option<&DMatrix<f64>>, opts: &RhfOptions) -> Result<(RhfResult, Option<DMatrix<f64>>)> {
        let v = if charges.is_empty() {
            None
        } else {
            Some(self.pairs.operator(&charges.positions, &charges.charges)?)
        };
        let r = run_rhf_with(&self.ints, &self.eri, self.n_electrons, v.as_ref(), guess, opts)?;
        if !r.converged {
            return Err(Error::RhfNotConverged {
                iterations: r.iterations,
                energy: r.total_energy,
                commutator: r.commutator_norm,
            });
        }
        Ok((r, v))
    }

    /// Solute ESP (nuclei + electrons) at `points`.
    pub fn esp(&self, atoms: &[crate::model::Atom], density: &DMatrix<f64>, points: &[[f64; 3]]) -> Vec<f64> {
        let nuc = nuclear_potential(atoms, points);
        let el = self.pairs.electronic_potential(density, points);
        nuc.iter().zip(&el).map(|(a, b)| a + b).collect()
    }

    /// Active-space Hamiltonians (gas, solvated) in orbitals `c`.
    pub fn active_pauli(
        &self,
        c: &DMatrix<f64>,
        v: Option<&DMatrix<f64>>,
        partition: &OrbitalPartition,
        electrons: usize,
    ) -> Result<(PauliHamiltonian, PauliHamiltonian)> {
        let gas = build_active_hamiltonian(c, &self.ints, &self.eri, None, partition, electrons)?;
        let sol = match v {
            Some(v) => build_active_hamiltonian(c, &self.ints, &self.eri, Some(v), partition, electrons)?,
            None => gas.clone(),
        };
        Ok((jordan_wigner(&gas), jordan_wigner(&sol)))
    }
}

/// Orbitals the active space is drawn from.
/// Orbitals for the active space with their orbital energies or occupations.
fn working_orbitals(sys: &System, rhf: &RhfResult, spec: &ActiveSpaceSpec) -> Result<(DMatrix<f64>, DVector<f64>)> {
    match spec.selection {
        OrbitalSelection::NaturalOccupancy => {
            let no = mp2_natural_orbitals(rhf, &sys.eri)?;
            Ok((no.coefficients, no.occupations))
        }
        _ => Ok((rhf.coefficients.clone(), rhf.orbital_energies.clone())),
    }
}

struct Loop<'a> {
    cfg: &'a RunConfig,
    sys: &'a System,
    opts: &'a DriverOptions,
    partition: Option<OrbitalPartition>,
    prev_orbitals: Option<DMatrix<f64>>,
    /// Degenerate shells of the working orbitals of the free molecule.
    shells: Option<Vec<std::ops::Range<usize>>>,
    theta: Option<Vec<f64>>,
    density: Option<DMatrix<f64>>,
}

impl Loop<'_> {
    fn electronic(&mut self, charges: &SolventCharges) -> Result<(Electronic, DMatrix<f64>)> {
        let (rhf, v) = self.sys.rhf(charges, self.density.as_ref(), &self.opts.rhf)?;
        let spec = match &self.cfg.solver {
            ElectronicSolver::Rhf => {
                let vd = v.as_ref().map_or(0.0, |v| rhf.density.component_mul(v).sum());
                return Ok((
                    Electronic {
                        density: rhf.density.clone(),
                        e_solute: rhf.total_energy - vd,
                        e_solvated: rhf.total_energy,
                        gradient: 0.0,
                        theta: None,
                        rdm1: None,
                        pauli: None,
                    },
                    rhf.coefficients,
                ));
            }
            ElectronicSolver::Vqe(s) | ElectronicSolver::Exact(s) => s.clone(),
        };
        let mut c = working_orbitals(self.sys, &rhf, &spec)?.0;
        if self.shells.is_none() {
            let gas = if charges.is_empty() {
                working_orbitals(self.sys, &rhf, &spec)?
            } else {
                let (g, _) = self.sys.rhf(&SolventCharges::default(), None, &self.opts.rhf)?;
                working_orbitals(self.sys, &g, &spec)?
            };
            self.shells = Some(degenerate_shells(&gas.1));
        }
        if let Some(prev) = &self.prev_orbitals {
            // shells of the free molecule would otherwise turn freely from cycle to cycle
            c = align_shells(&c, self.shells.as_deref().unwrap_or(&[]), prev, &self.sys.ints.overlap);
            align_phases(&mut c, prev, &self.sys.ints.overlap);
        }
        let partition = match &self.partition {
            Some(p) => p.clone(),
            None => {
                let p = OrbitalPartition::from_spec(&spec, self.sys.n_electrons, c.ncols())?;
                self.partition = Some(p.clone());
                p
            }
        };
        let (gas, sol) = self.sys.active_pauli(&c, v.as_ref(), &partition, spec.electrons)?;
        let n_act = partition.active.len();
        let (psi, e_solvated, gradient, theta, rdm1, sector) = match &self.cfg.solver {
            ElectronicSolver::Vqe(_) => {
                let ansatz = UccsdAnsatz::new(n_act, spec.electrons)?;
                let engine = SectorEngine::new(&sol, &ansatz)?;
                let vopts = VqeOptions {
                    gradient_tolerance: self.cfg.convergence.vqe_gradient,
                    ..VqeOptions::default()
                };
                let r = optimize_with(&engine, self.theta.as_deref(), &vopts)?;
                let psi = engine.state(&r.theta);
                (psi, r.energy, r.gradient_norm, Some(r.theta), r.rdm1, engine.sector)
            }
            _ => {
                let gs = exact_ground_state(&sol, n_act, spec.electrons)?;
                let sector = crate::vqe::closed_shell_sector(n_act, spec.electrons)?;
                (gs.vector, gs.energy, 0.0, None, gs.rdm1, sector)
            }
        };
        let e_solute = SectorOperator::new(&gas, &sector)?.expectation(&psi);
        let density = ao_density(&c, &partition, &rdm1);
        Ok((
            Electronic {
                density,
                e_solute,
                e_solvated,
                gradient,
                theta,
                rdm1: Some(rdm1),
                pauli: Some((gas, sol)),
            },
            c,
        ))
    }
}

/// Runs the macro-loop for `cfg` with a prepared susceptibility table.
pub fn run_scf(cfg: &RunConfig, chi: Option<&SolventSusceptibility>, opts: &DriverOptions) -> Result<ScfOutcome> {
    let sys = System::new(cfg)?;
    run_scf_with(cfg, &sys, chi, opts, &WarmStart::default())
}

pub fn run_scf_with(
    cfg: &RunConfig,
    sys: &System,
    chi: Option<&SolventSusceptibility>,
    opts: &DriverOptions,
    warm: &WarmStart,
) -> Result<ScfOutcome> {
    let conv = &cfg.convergence;
    let mut lp = Loop {
        cfg,
        sys,
        opts,
        partition: None,
        prev_orbitals: None,
        shells: None,
        theta: warm.theta.clone(),
        density: warm.density.clone(),
    };
    let solvent = if opts.gas {
        None
    } else {
        let chi = chi.ok_or_else(|| Error::Susceptibility("a solvated run needs a susceptibility table".into()))?;
        chi.check_compatible(&cfg.solvent)?;
        let grid = Grid3D::centered(&cfg.grid, cfg.center())?;
        let kernel = SolventKernel::new(&cfg.solvent, &chi.interpolator()?, &grid)?;
        for w in cfg.warnings() {
            log::warn!("{w}");
        }
        let points = grid.points();
        Some((grid, kernel, points))
    };
    let mut rism_opts = opts.rism.clone().unwrap_or(RismOptions {
        tolerance: conv.rism_residual,
        max_iterations: conv.rism_max_iterations,
        ..RismOptions::default()
    });

    let mut charges = match (&solvent, &warm.charges) {
        (Some(_), Some(q)) => q.clone(),
        _ => SolventCharges::default(),
    };
    let mut history: Vec<CycleRecord> = Vec::new();
    let mut rism_t = warm.rism_t.clone();
    let mut last_rism: Option<RismSolution> = None;
    let mut growing = 0;
    loop {
        let cycle = history.len() + 1;
        let wrap = |e: Error| Error::Cycle { cycle, source: Box::new(e) };
        let (el, orbitals) = lp.electronic(&charges).map_err(wrap)?;
        let density_rms = lp.density.as_ref().map_or(f64::INFINITY, |d| rms_diff(d, &el.density));

        let (dmu, e_bind, rism_residual, rism_iterations, new_charges) = match &solvent {
            None => (0.0, 0.0, 0.0, 0, SolventCharges::default()),
            Some((grid, kernel, points)) => {
                let esp = sys.esp(&cfg.atoms, &el.density, points);
                let u = build_potential(&cfg.atoms, &esp, &cfg.solvent, grid).map_err(wrap)?;
                let sol = solve_3drism(&u, kernel, grid, &rism_opts, rism_t.as_deref()).map_err(wrap)?;
                let dmu = excess_chemical_potential(&sol.fields, kernel, grid);
                let e_bind = binding_energy(&sol.fields, kernel, grid);
                let q = solvent_point_charges(&sol.fields, kernel, grid, conv.charge_threshold);
                let out = (dmu, e_bind, sol.residual, sol.iterations, q);
                rism_t = Some(sol.t.clone());
                last_rism = Some(sol);
                out
            }
        };
        let record = CycleRecord {
            cycle,
            helmholtz: el.e_solute + dmu,
            e_solute: el.e_solute,
            dmu,
            e_solvated: el.e_solvated,
            v_solvent: el.e_solvated - el.e_solute,
            e_bind,
            e_potential: el.e_solute + e_bind,
            rism_residual,
            rism_iterations,
            vqe_gradient: el.gradient,
            density_rms,
            n_charges: new_charges.len(),
            total_charge: new_charges.total,
        };
        log::info!(
            "cycle {cycle}: A = {:.10} dmu = {:.6} |dA| = {:.2e}",
            record.helmholtz,
            dmu,
            history.last().map_or(f64::NAN, |p: &CycleRecord| (record.helmholtz - p.helmholtz).abs())
        );
        let delta = history.last().map(|p| (record.helmholtz - p.helmholtz).abs());
        let prev_delta = history
            .len()
            .checked_sub(2)
            .map(|i| (history[i + 1].helmholtz - history[i].helmholtz).abs());
        // the next cycle would see exactly the same operator
        let fixed_point =
            opts.gas || (new_charges.charges == charges.charges && new_charges.positions == charges.positions);
        let converged = fixed_point
            || matches!((delta, prev_delta), (Some(d), Some(p)) if d < conv.helmholtz && p < conv.helmholtz)
                && density_rms < conv.density_rms;
        if let (Some(d), Some(p)) = (delta, prev_delta) {
            growing = if d >= p { growing + 1 } else { 0 };
            // near convergence A can stall at the noise left by the RISM tolerance
            if !converged && d >= 0.5 * p && d < STALL_WINDOW * conv.helmholtz && rism_opts.tolerance > RISM_FLOOR {
                rism_opts.tolerance = (0.1 * rism_opts.tolerance).max(RISM_FLOOR);
                log::debug!("|dA| stalled at {d:.2e}; 3D-RISM tolerance now {:.0e}", rism_opts.tolerance);
            }
        }
        history.push(record);
        lp.density = Some(el.density.clone());
        lp.theta = el.theta.clone().or(lp.theta.take());
        lp.prev_orbitals = Some(orbitals.clone());
        let (pauli_gas, pauli_solvated) = match el.pauli {
            Some((g, s)) => (Some(g), Some(s)),
            None => (None, None),
        };
        if converged {
            return Ok(ScfOutcome {
                history,
                converged: true,
                density: el.density,
                orbitals,
                partition: lp.partition.clone(),
                rdm1: el.rdm1,
                theta: el.theta,
                charges: new_charges,
                grid: solvent.map(|s| s.0),
                rism: last_rism,
                pauli_gas,
                pauli_solvated,
            });
        }
        if growing >= 10 || cycle >= conv.max_cycles {
            return Err(Error::MacroLoop {
                cycles: cycle,
                delta_a: delta.unwrap_or(f64::NAN),
                density_rms,
                rism_residual,
            });
        }
        charges = new_charges;
    }
}
