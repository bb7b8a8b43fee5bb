//! L1 norms of the full-space qubit Hamiltonian with and without solvent.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::driver::{run_scf_with, DriverOptions, System, WarmStart};
use crate::hamiltonian::{build_active_hamiltonian, OrbitalPartition};
use crate::linalg::{align_shells, degenerate_shells};
use crate::model::{ActiveSpaceSpec, ElectronicSolver, RunConfig};
use crate::pauli::jordan_wigner;
use crate::rism3d::SolventCharges;
use crate::solvent::SolventSusceptibility;
use crate::Result;

/// λ of the Jordan-Wigner Hamiltonian over every MO in orbitals `c`, with
/// the one-electron solvent operator `v` when given.
pub fn full_space_lambda(sys: &System, c: &DMatrix<f64>, v: Option<&DMatrix<f64>>) -> Result<f64> {
    let h = build_active_hamiltonian(c, &sys.ints, &sys.eri, v, &OrbitalPartition::full(c.ncols()), sys.n_electrons)?;
    Ok(jordan_wigner(&h).l1_norm())
}

/// λ with the orbitals it was taken in.
#[derive(Debug, Clone)]
pub struct CanonicalLambda {
    pub lambda: f64,
    pub orbitals: DMatrix<f64>,
    /// Degenerate shells of the gas-phase orbitals.
    pub shells: Vec<Range<usize>>,
}

/// λ in canonical RHF orbitals, solvated by `charges` (empty: gas phase).
///
/// λ is not invariant under rotations inside a degenerate shell. With a
/// `reference`, the orbitals of each of its shells are rotated onto the
/// reference orbitals they overlap most, so both values share one gauge.
pub fn canonical_lambda(
    sys: &System,
    charges: &SolventCharges,
    reference: Option<&CanonicalLambda>,
    opts: &DriverOptions,
) -> Result<CanonicalLambda> {
    let (rhf, v) = sys.rhf(charges, None, &opts.rhf)?;
    let (orbitals, shells) = match reference {
        Some(r) => (align_shells(&rhf.coefficients, &r.shells, &r.orbitals, &sys.ints.overlap), r.shells.clone()),
        None => {
            let shells = degenerate_shells(&rhf.orbital_energies);
            (rhf.coefficients, shells)
        }
    };
    Ok(CanonicalLambda {
        lambda: full_space_lambda(sys, &orbitals, v.as_ref())?,
        orbitals,
        shells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    pub electrons: usize,
    pub orbitals: usize,
    pub lambda_gas: f64,
    pub lambda_solvated: f64,
    /// Final Helmholtz energy of the solvated run.
    pub helmholtz: f64,
}

impl NormRow {
    /// Solution over gas, percent.
    pub fn ratio(&self) -> f64 {
        100.0 * self.lambda_solvated / self.lambda_gas
    }
}

/// Formats to `digits` significant figures without an exponent.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    let scale = 10f64.powi(mag - digits as i32 + 1);
    let rounded = (x / scale).round() * scale;
    format!("{rounded:.decimals$}")
}

pub fn report_table(rows: &[NormRow]) -> String {
    let mut s = format!("{:>10} {:>12} {:>12} {:>8}\n", "space", "lambda_g", "lambda_s", "s/g");
    for r in rows {
        s.push_str(&format!(
            "{:>10} {:>12} {:>12} {:>7.1}%\n",
            format!("({}e,{}o)", r.electrons, r.orbitals),
            significant(r.lambda_gas, 4),
            significant(r.lambda_solvated, 4),
            r.ratio()
        ));
    }
    s
}

pub fn report_csv(rows: &[NormRow]) -> String {
    let mut s = String::from("electrons,orbitals,lambda_gas,lambda_solv,ratio_percent,A\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.10},{:.10},{:.4},{:.12}\n",
            r.electrons,
            r.orbitals,
            r.lambda_gas,
            r.lambda_solvated,
            r.ratio(),
            r.helmholtz
        ));
    }
    s
}

/// One solvated VQE run per active space (each warm-started from the
/// previous), then λ in canonical orbitals of the gas and of the final
/// solvent charges, degenerate shells of the latter aligned to the former.
pub fn norm_report(
    cfg: &RunConfig,
    spaces: &[(usize, usize)],
    chi: Option<&SolventSusceptibility>,
    opts: &DriverOptions,
) -> Result<Vec<NormRow>> {
    let sys = System::new(cfg)?;
    let gas = canonical_lambda(&sys, &SolventCharges::default(), None, opts)?;
    let mut warm = WarmStart::default();
    let mut rows = Vec::with_capacity(spaces.len());
    for &(e, o) in spaces {
        let run_cfg = cfg.with_solver(ElectronicSolver::Vqe(ActiveSpaceSpec::new(e, o)));
        let out = run_scf_with(&run_cfg, &sys, chi, opts, &warm)?;
        let lambda_solvated = canonical_lambda(&sys, &out.charges, Some(&gas), opts)?.lambda;
        rows.push(NormRow {
            electrons: e,
            orbitals: o,
            lambda_gas: gas.lambda,
            lambda_solvated,
            helmholtz: out.last().helmholtz,
        });
        warm = WarmStart {
            theta: None,
            ..out.warm_start()
        };
    }
    Ok(rows)
}
