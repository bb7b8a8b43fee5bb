//! Distance scans: the macro-loop repeated along an interatomic distance.

use rayon::prelude::*;

use crate::driver::{run_scf_with, DriverOptions, System, WarmStart};
use crate::model::RunConfig;
use crate::solvent::SolventSusceptibility;
use crate::units::{angstrom_to_bohr, bohr_to_angstrom};
use crate::{Error, Result};

/// Distances start..=stop in angstrom between atoms `pair` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub pair: (usize, usize),
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ScanSpec {
    pub fn validate(&self, n_atoms: usize) -> Result<()> {
        let (a, b) = self.pair;
        if a == b || a >= n_atoms || b >= n_atoms {
            return Err(Error::Config(format!(
                "scan pair ({a}, {b}) must name two distinct atoms out of {n_atoms}"
            )));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Config("scan step must be positive".into()));
        }
        if !(self.start < self.stop) || !(self.start > 0.0) || !self.stop.is_finite() {
            return Err(Error::Config(format!(
                "scan needs 0 < start < stop (got {} .. {})",
                self.start, self.stop
            )));
        }
        Ok(())
    }

    /// Both endpoints included; a stop that falls between steps is dropped.
    pub fn distances(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Copy of `cfg` with the pair moved symmetrically about its midpoint along
/// its current axis to separation `r` (angstrom).
pub fn geometry_at(cfg: &RunConfig, pair: (usize, usize), r: f64) -> Result<RunConfig> {
    let (a, b) = pair;
    let (pa, pb) = (cfg.atoms[a].position, cfg.atoms[b].position);
    let d = crate::model::distance(&pa, &pb);
    if d < 1e-8 {
        return Err(Error::Geometry("scan atoms coincide, no axis to move along".into()));
    }
    let half = 0.5 * angstrom_to_bohr(r);
    let mut out = cfg.clone();
    for k in 0..3 {
        let mid = 0.5 * (pa[k] + pb[k]);
        let e = (pb[k] - pa[k]) / d;
        out.atoms[a].position[k] = mid - half * e;
        out.atoms[b].position[k] = mid + half * e;
    }
    crate::model::nuclear_repulsion(&out.atoms)?;
    Ok(out)
}

/// Final energies at one scan distance (hartree).
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub r: f64,
    pub e_potential: f64,
    pub helmholtz: f64,
    pub dmu: f64,
    pub e_solute: f64,
    pub cycles: usize,
}

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub r: f64,
    pub result: std::result::Result<ScanRow, String>,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
}

impl ScanResult {
    pub const CSV_HEADER: &'static str = "R_angstrom,E_pot,A,dmu,H_iso,cycles,status";

    pub fn n_failed(&self) -> usize {
        self.points.iter().filter(|p| p.result.is_err()).count()
    }

    pub fn rows(&self) -> impl Iterator<Item = &ScanRow> {
        self.points.iter().filter_map(|p| p.result.as_ref().ok())
    }

    /// Failed points keep their distance with NaN energies and the error text.
    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for p in &self.points {
            match &p.result {
                Ok(r) => s.push_str(&format!(
                    "{:.4},{:.12},{:.12},{:.12},{:.12},{},ok\n",
                    r.r, r.e_potential, r.helmholtz, r.dmu, r.e_solute, r.cycles
                )),
                Err(e) => s.push_str(&format!(
                    "{:.4},NaN,NaN,NaN,NaN,0,\"{}\"\n",
                    p.r,
                    e.replace('"', "'")
                )),
            }
        }
        s
    }
}

fn run_point(
    cfg: &RunConfig,
    spec: &ScanSpec,
    r: f64,
    chi: Option<&SolventSusceptibility>,
    opts: &DriverOptions,
    warm: &WarmStart,
) -> Result<(ScanRow, WarmStart)> {
    let point = geometry_at(cfg, spec.pair, r)?;
    let sys = System::new(&point)?;
    let out = run_scf_with(&point, &sys, chi, opts, warm)?;
    let last = out.last();
    let (a, b) = spec.pair;
    let row = ScanRow {
        r: bohr_to_angstrom(point.atoms[a].distance(&point.atoms[b])),
        e_potential: last.e_potential,
        helmholtz: last.helmholtz,
        dmu: last.dmu,
        e_solute: last.e_solute,
        cycles: out.history.len(),
    };
    Ok((row, out.warm_start()))
}

/// Runs every distance. With `warm` each point starts from the previous
/// converged one and the scan is sequential; otherwise points run in
/// parallel from cold starts. Failures are recorded per point.
pub fn run_scan(
    cfg: &RunConfig,
    spec: &ScanSpec,
    chi: Option<&SolventSusceptibility>,
    opts: &DriverOptions,
    warm: bool,
) -> Result<ScanResult> {
    spec.validate(cfg.atoms.len())?;
    let rs = spec.distances();
    let points = if warm {
        let mut state = WarmStart::default();
        let mut out = Vec::with_capacity(rs.len());
        for &r in &rs {
            let result = match run_point(cfg, spec, r, chi, opts, &state) {
                Ok((row, next)) => {
                    state = next;
                    Ok(row)
                }
                Err(e) => {
                    log::warn!("scan point {r:.4} A failed: {e}");
                    Err(e.to_string())
                }
            };
            out.push(ScanPoint { r, result });
        }
        out
    } else {
        rs.par_iter()
            .map(|&r| ScanPoint {
                r,
                result: run_point(cfg, spec, r, chi, opts, &WarmStart::default())
                    .map(|(row, _)| row)
                    .map_err(|e| e.to_string()),
            })
            .collect()
    };
    Ok(ScanResult { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_config;

    fn nacl() -> RunConfig {
        validate_config(
            "basis = \"STO-3G\"\n[geometry]\natoms = \"\"\"\nNa 0 0 -1.4\nCl 0 0 1.4\n\"\"\"\n",
            None,
        )
        .unwrap()
    }

    #[test]
    fn endpoints_are_inclusive() {
        let s = ScanSpec { pair: (0, 1), start: 1.0, stop: 2.0, step: 0.5 };
        assert_eq!(s.distances(), vec![1.0, 1.5, 2.0]);
        let s = ScanSpec { pair: (0, 1), start: 2.0, stop: 7.0, step: 0.25 };
        assert_eq!(s.distances().len(), 21);
        assert!((s.distances()[20] - 7.0).abs() < 1e-12);
        let s = ScanSpec { pair: (0, 1), start: 1.0, stop: 1.9, step: 0.5 };
        assert_eq!(s.distances(), vec![1.0, 1.5]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let ok = ScanSpec { pair: (0, 1), start: 1.0, stop: 2.0, step: 0.5 };
        assert!(ok.validate(2).is_ok());
        assert!(ScanSpec { step: 0.0, ..ok.clone() }.validate(2).is_err());
        assert!(ScanSpec { start: 2.0, ..ok.clone() }.validate(2).is_err());
        assert!(ScanSpec { pair: (1, 1), ..ok.clone() }.validate(2).is_err());
        assert!(ScanSpec { pair: (0, 2), ..ok }.validate(2).is_err());
    }

    #[test]
    fn pair_moves_symmetrically() {
        let cfg = nacl();
        let moved = geometry_at(&cfg, (0, 1), 3.1).unwrap();
        let d = bohr_to_angstrom(moved.atoms[0].distance(&moved.atoms[1]));
        assert!((d - 3.1).abs() < 1e-12);
        for k in 0..3 {
            let m0 = cfg.atoms[0].position[k] + cfg.atoms[1].position[k];
            let m1 = moved.atoms[0].position[k] + moved.atoms[1].position[k];
            assert!((m0 - m1).abs() < 1e-12);
        }
        assert!(moved.atoms[0].position[2] < moved.atoms[1].position[2]);
    }
}
