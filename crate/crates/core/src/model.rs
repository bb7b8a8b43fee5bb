//! Domain types shared by every stage of a run: solute atoms, the solvent
//! model, the active-space request and the validated run configuration.
//!
//! Configuration files are TOML. Geometry records are XYZ-style lines
//! (`El x y z [sigma epsilon]`), in angstrom unless `units = "bohr"`.
//! Internally atom positions are stored in bohr; Lennard-Jones parameters keep
//! their input units (angstrom, J/mol) because they only enter the solvent grid.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::basis;
use crate::error::{Error, Result};
use crate::units;

const ELEMENTS: [&str; 18] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar",
];

const BUNDLED_TIP3P: &str = include_str!("../data/solvent/tip3p.toml");
const BUNDLED_LJ: &str = include_str!("../data/lj_defaults.toml");

/// Nuclear charge for an element symbol (case-insensitive), H through Ar.
pub fn atomic_number(symbol: &str) -> Option<u32> {
    ELEMENTS
        .iter()
        .position(|s| s.eq_ignore_ascii_case(symbol))
        .map(|i| i as u32 + 1)
}

pub fn element_symbol(z: u32) -> Option<&'static str> {
    ELEMENTS.get((z as usize).checked_sub(1)?).copied()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LennardJones {
    /// Angstrom.
    pub sigma: f64,
    /// J/mol.
    pub epsilon: f64,
}

impl LennardJones {
    /// Lorentz-Berthelot mixing.
    pub fn mix(&self, other: &LennardJones) -> LennardJones {
        LennardJones {
            sigma: 0.5 * (self.sigma + other.sigma),
            epsilon: (self.epsilon * other.epsilon).sqrt(),
        }
    }
}

/// Default solute LJ parameters for an element, if bundled.
pub fn default_lennard_jones(symbol: &str) -> Option<LennardJones> {
    let table: BTreeMap<String, LennardJones> =
        toml::from_str(BUNDLED_LJ).expect("bundled LJ table parses");
    table
        .into_iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(symbol))
        .map(|(_, v)| v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: String,
    pub z: u32,
    /// Bohr.
    pub position: [f64; 3],
    pub lj: LennardJones,
}

impl Atom {
    pub fn new(element: &str, position_bohr: [f64; 3], lj: LennardJones) -> Result<Self> {
        let z = atomic_number(element)
            .ok_or_else(|| Error::Config(format!("unknown element '{element}'")))?;
        let atom = Atom {
            element: element_symbol(z).unwrap().to_string(),
            z,
            position: position_bohr,
            lj,
        };
        atom.check()?;
        Ok(atom)
    }

    /// Atom with the bundled LJ parameters, position in angstrom.
    pub fn from_angstrom(element: &str, position: [f64; 3]) -> Result<Self> {
        let lj = default_lennard_jones(element).ok_or_else(|| {
            Error::Config(format!("no default Lennard-Jones parameters for '{element}'"))
        })?;
        Atom::new(element, position.map(units::angstrom_to_bohr), lj)
    }

    fn check(&self) -> Result<()> {
        if !(self.lj.sigma > 0.0) || !(self.lj.epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "atom {}: need sigma > 0 and epsilon >= 0 (got {}, {})",
                self.element, self.lj.sigma, self.lj.epsilon
            )));
        }
        if self.position.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("atom {}: non-finite position", self.element)));
        }
        Ok(())
    }

    pub fn distance(&self, other: &Atom) -> f64 {
        distance(&self.position, &other.position)
    }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Nuclear repulsion energy in hartree. Coincident nuclei are an error.
pub fn nuclear_repulsion(atoms: &[Atom]) -> Result<f64> {
    let mut e = 0.0;
    for (i, a) in atoms.iter().enumerate() {
        for b in &atoms[..i] {
            let r = a.distance(b);
            if r < 1e-8 {
                return Err(Error::Geometry(format!(
                    "coincident nuclei {} and {}",
                    a.element, b.element
                )));
            }
            e += f64::from(a.z * b.z) / r;
        }
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolventSite {
    pub label: String,
    pub sigma: f64,
    pub epsilon: f64,
    pub charge: f64,
    /// Rigid-frame coordinates in angstrom.
    pub position: [f64; 3],
}

impl SolventSite {
    pub fn lj(&self) -> LennardJones {
        LennardJones {
            sigma: self.sigma,
            epsilon: self.epsilon,
        }
    }
}

/// A rigid single-species solvent. Sites sharing a label are the same species
/// and must carry identical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolventModel {
    pub name: String,
    /// Molecular number density, 1/A^3; every site has this density.
    pub density: f64,
    /// Kelvin.
    pub temperature: f64,
    #[serde(rename = "site")]
    pub sites: Vec<SolventSite>,
}

impl SolventModel {
    /// The bundled TIP3P water model.
    pub fn tip3p() -> Self {
        let m: SolventModel = toml::from_str(BUNDLED_TIP3P).expect("bundled solvent parses");
        m.validate().expect("bundled solvent is valid");
        m
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: SolventModel =
            toml::from_str(text).map_err(|e| Error::Config(format!("solvent model: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::Config("solvent model has no sites".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config("solvent temperature must be positive".into()));
        }
        if !(self.density > 0.0) {
            return Err(Error::Config("solvent density must be positive".into()));
        }
        let total: f64 = self.sites.iter().map(|s| s.charge).sum();
        if total.abs() > 1e-8 {
            return Err(Error::Config(format!(
                "solvent model carries net charge {total}"
            )));
        }
        for s in &self.sites {
            if s.sigma < 0.0 || s.epsilon < 0.0 {
                return Err(Error::Config(format!("site {}: negative LJ parameter", s.label)));
            }
            for t in &self.sites {
                if s.label == t.label
                    && (s.sigma != t.sigma || s.epsilon != t.epsilon || s.charge != t.charge)
                {
                    return Err(Error::Config(format!(
                        "sites labelled {} have different parameters",
                        s.label
                    )));
                }
            }
        }
        Ok(())
    }

    /// beta = 1/(k_B T) in 1/hartree.
    pub fn beta(&self) -> f64 {
        1.0 / units::thermal_energy(self.temperature)
    }

    /// Distinct site species in first-appearance order, with multiplicities.
    pub fn species(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (i, s) in self.sites.iter().enumerate() {
            match out.iter_mut().find(|(r, _)| self.sites[*r].label == s.label) {
                Some(entry) => entry.1 += 1,
                None => out.push((i, 1)),
            }
        }
        out
    }

    pub fn site_distance(&self, a: usize, b: usize) -> f64 {
        distance(&self.sites[a].position, &self.sites[b].position)
    }

    /// Same model with every charge and LJ well depth zeroed (ideal solvent).
    pub fn decoupled(&self) -> Self {
        let mut m = self.clone();
        for s in &mut m.sites {
            s.charge = 0.0;
            s.epsilon = 0.0;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrbitalSelection {
    /// Lowest frozen core followed by the next `orbitals` canonical MOs.
    Canonical,
    /// Explicit 0-based MO indices; they must lie above the frozen core.
    Indices(Vec<usize>),
    /// MP2 natural orbitals, window by descending occupation.
    NaturalOccupancy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSpaceSpec {
    pub electrons: usize,
    pub orbitals: usize,
    pub selection: OrbitalSelection,
}

impl ActiveSpaceSpec {
    pub fn new(electrons: usize, orbitals: usize) -> Self {
        ActiveSpaceSpec {
            electrons,
            orbitals,
            selection: OrbitalSelection::Canonical,
        }
    }

    /// Number of doubly occupied frozen orbitals for a closed-shell system.
    pub fn frozen_core(&self, n_electrons: usize) -> Result<usize> {
        if self.electrons == 0 || self.electrons > 2 * self.orbitals {
            return Err(Error::ActiveSpace(format!(
                "({}e, {}o) needs 0 < electrons <= 2 x orbitals",
                self.electrons, self.orbitals
            )));
        }
        if self.electrons > n_electrons {
            return Err(Error::ActiveSpace(format!(
                "{} active electrons requested but the solute has {n_electrons}",
                self.electrons
            )));
        }
        let core = n_electrons - self.electrons;
        if core % 2 != 0 {
            return Err(Error::ActiveSpace(format!(
                "({}e, {}o) leaves an odd number ({core}) of frozen-core electrons",
                self.electrons, self.orbitals
            )));
        }
        Ok(core / 2)
    }

    /// Checks the request against the electron count and basis size.
    pub fn check(&self, n_electrons: usize, n_basis: usize) -> Result<()> {
        let n_core = self.frozen_core(n_electrons)?;
        if n_core + self.orbitals > n_basis {
            return Err(Error::ActiveSpace(format!(
                "{n_core} core + {} active orbitals exceed the {n_basis} basis functions",
                self.orbitals
            )));
        }
        if let OrbitalSelection::Indices(ix) = &self.selection {
            if ix.len() != self.orbitals {
                return Err(Error::ActiveSpace(format!(
                    "{} indices given for {} active orbitals",
                    ix.len(),
                    self.orbitals
                )));
            }
            let mut sorted = ix.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != ix.len() || sorted.last().is_some_and(|&m| m >= n_basis) {
                return Err(Error::ActiveSpace(
                    "active indices must be distinct and below the basis size".into(),
                ));
            }
            if sorted.first().is_some_and(|&m| m < n_core) {
                return Err(Error::ActiveSpace(format!(
                    "active orbitals {ix:?} overlap the {n_core} frozen-core orbitals"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElectronicSolver {
    Rhf,
    Vqe(ActiveSpaceSpec),
    /// Exact diagonalization in the active space, used as an optimizer check.
    Exact(ActiveSpaceSpec),
}

impl ElectronicSolver {
    pub fn active_space(&self) -> Option<&ActiveSpaceSpec> {
        match self {
            ElectronicSolver::Rhf => None,
            ElectronicSolver::Vqe(s) | ElectronicSolver::Exact(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisName {
    Sto3g,
    Pople631g,
    Pople631gStar,
}

impl BasisName {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasisName::Sto3g => "STO-3G",
            BasisName::Pople631g => "6-31G",
            BasisName::Pople631gStar => "6-31G*",
        }
    }
}

impl fmt::Display for BasisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BasisName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "STO-3G" | "STO3G" => Ok(BasisName::Sto3g),
            "6-31G" => Ok(BasisName::Pople631g),
            "6-31G*" | "6-31G(D)" => Ok(BasisName::Pople631gStar),
            _ => Err(Error::Config(format!("unknown basis set '{s}'"))),
        }
    }
}

/// Cubic solvent grid: `points` per axis with spacing in angstrom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub spacing: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 128,
            spacing: 0.25,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 || self.points % 2 != 0 {
            return Err(Error::Config(format!(
                "grid needs an even number of points per axis (got {})",
                self.points
            )));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        Ok(())
    }

    /// Box edge in angstrom.
    pub fn edge(&self) -> f64 {
        self.points as f64 * self.spacing
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    /// |dA| threshold on two consecutive macro-cycles, hartree.
    pub helmholtz: f64,
    /// RMS change of the AO density matrix between macro-cycles.
    pub density_rms: f64,
    pub max_cycles: usize,
    /// 3D-RISM max-norm residual.
    pub rism_residual: f64,
    pub rism_max_iterations: usize,
    /// Solvent charges below this magnitude (e) are dropped.
    pub charge_threshold: f64,
    /// VQE gradient infinity-norm, hartree.
    pub vqe_gradient: f64,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            helmholtz: 1e-7,
            density_rms: 1e-6,
            max_cycles: 50,
            rism_residual: 1e-6,
            rism_max_iterations: 5000,
            charge_threshold: 1e-7,
            vqe_gradient: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub title: String,
    pub atoms: Vec<Atom>,
    pub charge: i32,
    pub multiplicity: u32,
    pub basis: BasisName,
    pub solvent: SolventModel,
    pub grid: GridSpec,
    pub solver: ElectronicSolver,
    pub convergence: Convergence,
    /// Precomputed solvent susceptibility table, if any.
    pub susceptibility: Option<PathBuf>,
    /// Number of contracted basis functions, resolved at validation.
    pub n_basis: usize,
}

impl RunConfig {
    pub fn n_electrons(&self) -> usize {
        let z: i64 = self.atoms.iter().map(|a| i64::from(a.z)).sum();
        (z - i64::from(self.charge)) as usize
    }

    /// Geometric center of the solute, bohr.
    pub fn center(&self) -> [f64; 3] {
        let n = self.atoms.len() as f64;
        let mut c = [0.0; 3];
        for a in &self.atoms {
            for k in 0..3 {
                c[k] += a.position[k] / n;
            }
        }
        c
    }

    /// Non-fatal issues, e.g. a box margin below 10 A.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let c = self.center();
        let half = 0.5 * self.grid.edge();
        let extent = self
            .atoms
            .iter()
            .flat_map(|a| (0..3).map(move |k| (a.position[k] - c[k]).abs()))
            .fold(0.0, f64::max);
        let margin = half - units::bohr_to_angstrom(extent);
        if margin < 10.0 {
            out.push(format!(
                "solvent box margin is {margin:.2} A (< 10 A) around the solute"
            ));
        }
        out
    }

    pub fn with_solver(&self, solver: ElectronicSolver) -> Self {
        RunConfig {
            solver,
            ..self.clone()
        }
    }

    /// Serializes to the configuration format with bohr coordinates and the
    /// solvent inlined, so that re-parsing reproduces this value exactly.
    pub fn to_toml_string(&self) -> String {
        let mut atoms = String::new();
        for a in &self.atoms {
            atoms.push_str(&format!(
                "{} {:?} {:?} {:?} {:?} {:?}\n",
                a.element, a.position[0], a.position[1], a.position[2], a.lj.sigma, a.lj.epsilon
            ));
        }
        let (method, active) = match &self.solver {
            ElectronicSolver::Rhf => ("rhf", None),
            ElectronicSolver::Vqe(s) => ("vqe", Some(s)),
            ElectronicSolver::Exact(s) => ("exact", Some(s)),
        };
        let solver = RawSolver {
            method: method.to_string(),
            electrons: active.map(|s| s.electrons),
            orbitals: active.map(|s| s.orbitals),
            orbitals_from: active.and_then(|s| match s.selection {
                OrbitalSelection::Canonical => Some("canonical".to_string()),
                OrbitalSelection::NaturalOccupancy => Some("natural".to_string()),
                OrbitalSelection::Indices(_) => None,
            }),
            indices: active.and_then(|s| match &s.selection {
                OrbitalSelection::Indices(ix) => Some(ix.clone()),
                _ => None,
            }),
        };
        let raw = RawConfig {
            title: self.title.clone(),
            basis: self.basis.as_str().to_string(),
            charge: self.charge,
            multiplicity: self.multiplicity,
            geometry: RawGeometry {
                units: "bohr".into(),
                atoms,
            },
            lennard_jones: BTreeMap::new(),
            solver,
            solvent: RawSolvent {
                model: None,
                file: None,
                name: Some(self.solvent.name.clone()),
                site: Some(self.solvent.sites.clone()),
                temperature: Some(self.solvent.temperature),
                density: Some(self.solvent.density),
                susceptibility: self
                    .susceptibility
                    .as_ref()
                    .map(|p| p.display().to_string()),
            },
            grid: RawGrid {
                points: self.grid.points,
                spacing: self.grid.spacing,
            },
            convergence: RawConvergence::from(&self.convergence),
        };
        toml::to_string(&raw).expect("configuration serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    title: String,
    basis: String,
    #[serde(default)]
    charge: i32,
    #[serde(default = "default_multiplicity")]
    multiplicity: u32,
    geometry: RawGeometry,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    lennard_jones: BTreeMap<String, LennardJones>,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    solvent: RawSolvent,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    convergence: RawConvergence,
}

fn default_multiplicity() -> u32 {
    1
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    #[serde(default = "default_units")]
    units: String,
    atoms: String,
}

fn default_units() -> String {
    "angstrom".into()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    electrons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    orbitals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    orbitals_from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    indices: Option<Vec<usize>>,
}

impl Default for RawSolver {
    fn default() -> Self {
        RawSolver {
            method: "rhf".into(),
            electrons: None,
            orbitals: None,
            orbitals_from: None,
            indices: None,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolvent {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    susceptibility: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    site: Option<Vec<SolventSite>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    points: usize,
    spacing: f64,
}

impl Default for RawGrid {
    fn default() -> Self {
        let g = GridSpec::default();
        RawGrid {
            points: g.points,
            spacing: g.spacing,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConvergence {
    helmholtz: f64,
    density_rms: f64,
    max_cycles: usize,
    rism_residual: f64,
    rism_max_iterations: usize,
    charge_threshold: f64,
    vqe_gradient: f64,
}

impl Default for RawConvergence {
    fn default() -> Self {
        RawConvergence::from(&Convergence::default())
    }
}

impl From<&Convergence> for RawConvergence {
    fn from(c: &Convergence) -> Self {
        RawConvergence {
            helmholtz: c.helmholtz,
            density_rms: c.density_rms,
            max_cycles: c.max_cycles,
            rism_residual: c.rism_residual,
            rism_max_iterations: c.rism_max_iterations,
            charge_threshold: c.charge_threshold,
            vqe_gradient: c.vqe_gradient,
        }
    }
}

/// Parses XYZ-style records `El x y z [sigma epsilon]`.
fn parse_atoms(
    text: &str,
    to_bohr: f64,
    overrides: &BTreeMap<String, LennardJones>,
) -> Result<Vec<Atom>> {
    let mut atoms = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 && fields.len() != 6 {
            return Err(Error::Config(format!(
                "geometry line {}: expected 'El x y z [sigma epsilon]'",
                lineno + 1
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::Config(format!("geometry line {}: bad number '{s}'", lineno + 1))
            })
        };
        let el = fields[0];
        let pos = [
            num(fields[1])? * to_bohr,
            num(fields[2])? * to_bohr,
            num(fields[3])? * to_bohr,
        ];
        let lj = if fields.len() == 6 {
            LennardJones {
                sigma: num(fields[4])?,
                epsilon: num(fields[5])?,
            }
        } else if let Some(lj) = overrides
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(el))
            .map(|(_, v)| *v)
        {
            lj
        } else {
            default_lennard_jones(el).ok_or_else(|| {
                Error::Config(format!("no Lennard-Jones parameters for element '{el}'"))
            })?
        };
        atoms.push(Atom::new(el, pos, lj)?);
    }
    if atoms.is_empty() {
        return Err(Error::Config("geometry has no atoms".into()));
    }
    Ok(atoms)
}

fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    match base {
        Some(b) if path.is_relative() => b.join(path),
        _ => path,
    }
}

/// Parses and validates a configuration document. Relative file references
/// resolve against `base_dir`.
pub fn validate_config(text: &str, base_dir: Option<&Path>) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    let basis: BasisName = raw.basis.parse()?;
    let to_bohr = match raw.geometry.units.to_ascii_lowercase().as_str() {
        "angstrom" | "a" => units::ANGSTROM_IN_BOHR,
        "bohr" | "au" => 1.0,
        u => return Err(Error::Config(format!("unknown geometry units '{u}'"))),
    };
    let atoms = parse_atoms(&raw.geometry.atoms, to_bohr, &raw.lennard_jones)?;
    nuclear_repulsion(&atoms)?;

    let mut solvent = match (&raw.solvent.site, &raw.solvent.file, &raw.solvent.model) {
        (Some(sites), None, None) => SolventModel {
            name: raw.solvent.name.clone().unwrap_or_else(|| "custom".into()),
            density: raw.solvent.density.unwrap_or(0.0),
            temperature: raw.solvent.temperature.unwrap_or(0.0),
            sites: sites.clone(),
        },
        (None, Some(file), None) => {
            let path = resolve(base_dir, file);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            SolventModel::from_toml(&text)?
        }
        (None, None, Some(m)) if m.eq_ignore_ascii_case("tip3p") => SolventModel::tip3p(),
        (None, None, None) => SolventModel::tip3p(),
        (None, None, Some(m)) => {
            return Err(Error::Config(format!("unknown bundled solvent model '{m}'")))
        }
        _ => {
            return Err(Error::Config(
                "give at most one of solvent.model, solvent.file, solvent.site".into(),
            ))
        }
    };
    if let Some(t) = raw.solvent.temperature {
        solvent.temperature = t;
    }
    if let Some(d) = raw.solvent.density {
        solvent.density = d;
    }
    solvent.validate()?;

    let susceptibility = match &raw.solvent.susceptibility {
        Some(p) => {
            let path = resolve(base_dir, p);
            if !path.exists() {
                return Err(Error::Config(format!(
                    "susceptibility file {} does not exist",
                    path.display()
                )));
            }
            Some(path)
        }
        None => None,
    };

    let grid = GridSpec {
        points: raw.grid.points,
        spacing: raw.grid.spacing,
    };
    grid.validate()?;

    let active = |raw: &RawSolver| -> Result<ActiveSpaceSpec> {
        let (Some(electrons), Some(orbitals)) = (raw.electrons, raw.orbitals) else {
            return Err(Error::Config(
                "solver needs 'electrons' and 'orbitals' for an active space".into(),
            ));
        };
        let selection = match (&raw.indices, raw.orbitals_from.as_deref()) {
            (Some(ix), None) => OrbitalSelection::Indices(ix.clone()),
            (None, None) | (None, Some("canonical")) => OrbitalSelection::Canonical,
            (None, Some("natural")) => OrbitalSelection::NaturalOccupancy,
            (None, Some(other)) => {
                return Err(Error::Config(format!("unknown orbital selection '{other}'")))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either 'indices' or 'orbitals_from', not both".into(),
                ))
            }
        };
        Ok(ActiveSpaceSpec {
            electrons,
            orbitals,
            selection,
        })
    };
    let solver = match raw.solver.method.to_ascii_lowercase().as_str() {
        "rhf" => ElectronicSolver::Rhf,
        "vqe" => ElectronicSolver::Vqe(active(&raw.solver)?),
        "exact" | "fci" => ElectronicSolver::Exact(active(&raw.solver)?),
        m => return Err(Error::Config(format!("unknown electronic solver '{m}'"))),
    };

    let c = &raw.convergence;
    let convergence = Convergence {
        helmholtz: c.helmholtz,
        density_rms: c.density_rms,
        max_cycles: c.max_cycles,
        rism_residual: c.rism_residual,
        rism_max_iterations: c.rism_max_iterations,
        charge_threshold: c.charge_threshold,
        vqe_gradient: c.vqe_gradient,
    };
    if convergence.max_cycles == 0 || !(convergence.helmholtz > 0.0) {
        return Err(Error::Config("convergence thresholds must be positive".into()));
    }

    let shells = basis::build_basis(&atoms, basis)?;
    let n_basis = basis::n_functions(&shells);

    let cfg = RunConfig {
        title: raw.title,
        atoms,
        charge: raw.charge,
        multiplicity: raw.multiplicity,
        basis,
        solvent,
        grid,
        solver,
        convergence,
        susceptibility,
        n_basis,
    };

    let z: i64 = cfg.atoms.iter().map(|a| i64::from(a.z)).sum();
    let ne = z - i64::from(cfg.charge);
    if ne <= 0 || ne % 2 != 0 {
        return Err(Error::Config(format!(
            "closed-shell RHF needs a positive even electron count (got {ne})"
        )));
    }
    if cfg.multiplicity != 1 {
        return Err(Error::Config(format!(
            "only singlet references are supported (multiplicity {})",
            cfg.multiplicity
        )));
    }
    if ne as usize > 2 * n_basis {
        return Err(Error::Config("more electrons than the basis can hold".into()));
    }
    if let Some(spec) = cfg.solver.active_space() {
        spec.check(ne as usize, n_basis)?;
    }
    Ok(cfg)
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    validate_config(&text, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const WATER: &str = r#"
title = "water"
basis = "STO-3G"

[geometry]
atoms = """
O  0.000000  0.000000  0.117300
H  0.000000  0.757200 -0.469200
H  0.000000 -0.757200 -0.469200
"""

[solver]
method = "vqe"
electrons = 2
orbitals = 2
"#;

    #[test]
    fn water_sto3g_two_in_two() {
        let cfg = validate_config(WATER, None).unwrap();
        assert_eq!(cfg.n_basis, 7);
        assert_eq!(cfg.n_electrons(), 10);
        let spec = cfg.solver.active_space().unwrap();
        assert_eq!(spec.frozen_core(cfg.n_electrons()).unwrap() * 2, 8);
        assert_eq!(cfg.grid, GridSpec::default());
        assert!((cfg.grid.edge() - 32.0).abs() < 1e-12);
        assert!(cfg.warnings().is_empty());
    }

    #[test]
    fn odd_frozen_core_is_rejected() {
        let text = WATER.replace("electrons = 2", "electrons = 3");
        let err = validate_config(&text, None).unwrap_err();
        assert!(matches!(err, Error::ActiveSpace(_)), "{err}");
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let e = validate_config(&WATER.replace("STO-3G", "cc-pVQZ"), None).unwrap_err();
        assert!(e.to_string().contains("unknown basis"));
        let e = validate_config(&format!("{WATER}\n[grid]\npoints = 127\nspacing = 0.25\n"), None)
            .unwrap_err();
        assert!(e.to_string().contains("even"));
        let e = validate_config(&WATER.replace("orbitals = 2", "orbitals = 9"), None).unwrap_err();
        assert!(matches!(e, Error::ActiveSpace(_)));
        let e = validate_config(&WATER.replace("title", "titel"), None).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn small_box_warns() {
        let text = format!("{WATER}\n[grid]\npoints = 64\nspacing = 0.25\n");
        let cfg = validate_config(&text, None).unwrap();
        assert_eq!(cfg.warnings().len(), 1);
    }

    #[test]
    fn serialization_round_trips() {
        let text = WATER.replace("method = \"vqe\"", "method = \"vqe\"\norbitals_from = \"natural\"");
        let cfg = validate_config(&text, None).unwrap();
        let again = validate_config(&cfg.to_toml_string(), None).unwrap();
        assert_eq!(cfg, again);
        // normalizing an already normalized config changes nothing
        let third = validate_config(&again.to_toml_string(), None).unwrap();
        assert_eq!(again.to_toml_string(), third.to_toml_string());
    }

    #[test]
    fn explicit_indices_overlapping_core() {
        let text = WATER.replace("orbitals = 2", "orbitals = 2\nindices = [3, 5]");
        let e = validate_config(&text, None).unwrap_err();
        assert!(e.to_string().contains("overlap"), "{e}");
        let text = WATER.replace("orbitals = 2", "orbitals = 2\nindices = [4, 6]");
        assert!(validate_config(&text, None).is_ok());
    }

    #[test]
    fn tip3p_is_neutral_with_two_species() {
        let m = SolventModel::tip3p();
        assert_eq!(m.species(), vec![(0, 1), (1, 2)]);
        assert!((m.site_distance(0, 1) - 0.9572).abs() < 1e-6);
        assert!((m.sites[1].epsilon - 192.5).abs() < 1e-12);
        assert!((m.sites[1].sigma - 0.4).abs() < 1e-12);
    }

    #[test]
    fn nuclear_repulsion_h2() {
        let lj = default_lennard_jones("H").unwrap();
        let atoms = vec![
            Atom::new("H", [0.0, 0.0, 0.0], lj).unwrap(),
            Atom::new("H", [0.0, 0.0, 1.4], lj).unwrap(),
        ];
        assert!((nuclear_repulsion(&atoms).unwrap() - 1.0 / 1.4).abs() < 1e-15);
        let clash = vec![atoms[0].clone(), atoms[0].clone()];
        assert!(nuclear_repulsion(&clash).is_err());
    }
}
