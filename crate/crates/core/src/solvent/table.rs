//! Tabulated solvent susceptibility χ_{vv'}(k), its file format and
//! evaluation at arbitrary |k|.
//!
//! File layout (plain text, every float in shortest round-trip form):
//!
//! ```text
//! # rismvqe susceptibility 1
//! solvent_hash <16 hex digits>
//! temperature <K>
//! density <1/A^3>
//! n_points <n>
//! dr <bohr>
//! dk <1/bohr>
//! sites <label> ...
//! positions <x y z per site, angstrom>
//! k chi_0_0 chi_0_1 ... (one row per k point, pairs a <= b row-major)
//! ```

use std::path::Path;

use super::radial::RadialGrid;
use super::xrism::{omega_matrix, site_pairs};
use crate::model::SolventModel;
use crate::units::{angstrom_to_bohr, BOHR_IN_ANGSTROM};
use crate::{Error, Result};

const MAGIC: &str = "# rismvqe susceptibility 1";

/// FNV-1a over the site parameters and rigid geometry.
pub fn solvent_hash(solvent: &SolventModel) -> u64 {
    let mut text = String::new();
    for s in &solvent.sites {
        text.push_str(&format!(
            "{}:{:e}:{:e}:{:e}:{:e},{:e},{:e};",
            s.label, s.sigma, s.epsilon, s.charge, s.position[0], s.position[1], s.position[2]
        ));
    }
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolventSusceptibility {
    pub solvent_hash: u64,
    pub temperature: f64,
    /// Molecular density, 1/A^3.
    pub density: f64,
    pub n_points: usize,
    pub dr: f64,
    pub dk: f64,
    pub labels: Vec<String>,
    /// Rigid site coordinates, angstrom.
    pub positions: Vec<[f64; 3]>,
    /// Row-major [k index][site pair], pairs a <= b.
    pub chi: Vec<f64>,
}

impl SolventSusceptibility {
    /// χ = ω + ρh from per-pair h(k) on `grid`.
    pub fn from_h(solvent: &SolventModel, grid: &RadialGrid, h_k: &[Vec<f64>]) -> Self {
        let ns = solvent.sites.len();
        let pairs = site_pairs(ns);
        let rho = solvent.density * BOHR_IN_ANGSTROM.powi(3);
        let mut chi = Vec::with_capacity(grid.n() * pairs.len());
        for i in 0..grid.n() {
            let w = omega_matrix(solvent, grid.k(i));
            for (p, &(a, b)) in pairs.iter().enumerate() {
                chi.push(w[(a, b)] + rho * h_k[p][i]);
            }
        }
        SolventSusceptibility {
            solvent_hash: solvent_hash(solvent),
            temperature: solvent.temperature,
            density: solvent.density,
            n_points: grid.n(),
            dr: grid.dr(),
            dk: grid.dk(),
            labels: solvent.sites.iter().map(|s| s.label.clone()).collect(),
            positions: solvent.sites.iter().map(|s| s.position).collect(),
            chi,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.labels.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.n_sites() * (self.n_sites() + 1) / 2
    }

    fn pair_index(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let n = self.n_sites();
        a * n - a * a.saturating_sub(1) / 2 + (b - a)
    }

    pub fn k(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dk
    }

    /// Table value at grid index `i`.
    pub fn chi(&self, i: usize, a: usize, b: usize) -> f64 {
        self.chi[i * self.n_pairs() + self.pair_index(a, b)]
    }

    fn site_distance_bohr(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.positions[a], self.positions[b]);
        angstrom_to_bohr(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
    }

    fn omega(&self, a: usize, b: usize, k: f64) -> f64 {
        if a == b {
            return 1.0;
        }
        let x = k * self.site_distance_bohr(a, b);
        if x.abs() < 1e-6 {
            1.0 - x * x / 6.0
        } else {
            x.sin() / x
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        s.push_str(&format!("solvent_hash {:016x}\n", self.solvent_hash));
        s.push_str(&format!("temperature {:e}\n", self.temperature));
        s.push_str(&format!("density {:e}\n", self.density));
        s.push_str(&format!("n_points {}\n", self.n_points));
        s.push_str(&format!("dr {:e}\n", self.dr));
        s.push_str(&format!("dk {:e}\n", self.dk));
        s.push_str(&format!("sites {}\n", self.labels.join(" ")));
        let pos: Vec<String> = self.positions.iter().flatten().map(|v| format!("{v:e}")).collect();
        s.push_str(&format!("positions {}\n", pos.join(" ")));
        let np = self.n_pairs();
        for i in 0..self.n_points {
            s.push_str(&format!("{:e}", self.k(i)));
            for v in &self.chi[i * np..(i + 1) * np] {
                s.push_str(&format!(" {v:e}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Susceptibility(m.to_string());
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(bad("missing header line"));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing '{name}'")))?;
            let rest = line
                .strip_prefix(name)
                .ok_or_else(|| bad(&format!("expected '{name}', found '{line}'")))?;
            Ok(rest.trim().to_string())
        };
        let num = |s: String, name: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| bad(&format!("bad {name} '{s}'")))
        };
        let hash = field("solvent_hash")?;
        let solvent_hash = u64::from_str_radix(&hash, 16).map_err(|_| bad("bad solvent_hash"))?;
        let temperature = num(field("temperature")?, "temperature")?;
        let density = num(field("density")?, "density")?;
        let n_points: usize = field("n_points")?.parse().map_err(|_| bad("bad n_points"))?;
        let dr = num(field("dr")?, "dr")?;
        let dk = num(field("dk")?, "dk")?;
        let labels: Vec<String> = field("sites")?.split_whitespace().map(String::from).collect();
        let coords: Vec<f64> = field("positions")?
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| bad("bad position")))
            .collect::<Result<_>>()?;
        if labels.is_empty() || coords.len() != 3 * labels.len() {
            return Err(bad("site list and positions disagree"));
        }
        let positions: Vec<[f64; 3]> = coords.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        let np = labels.len() * (labels.len() + 1) / 2;
        let mut chi = Vec::with_capacity(n_points * np);
        let mut rows = 0;
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| bad(&format!("bad value in row {rows}"))))
                .collect::<Result<_>>()?;
            if vals.len() != np + 1 {
                return Err(bad(&format!("row {rows} has {} columns, expected {}", vals.len(), np + 1)));
            }
            let k = (rows + 1) as f64 * dk;
            if (vals[0] - k).abs() > 1e-9 * k {
                return Err(bad(&format!("row {rows}: k = {} does not match the grid", vals[0])));
            }
            chi.extend_from_slice(&vals[1..]);
            rows += 1;
        }
        if rows != n_points {
            return Err(bad(&format!("{rows} rows for {n_points} grid points")));
        }
        if chi.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite table entry"));
        }
        Ok(SolventSusceptibility {
            solvent_hash,
            temperature,
            density,
            n_points,
            dr,
            dk,
            labels,
            positions,
            chi,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())
            .map_err(|e| Error::Susceptibility(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Susceptibility(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Loads a table and rejects it unless it was built for `solvent`.
    pub fn load_for(path: &Path, solvent: &SolventModel) -> Result<Self> {
        let t = Self::load(path)?;
        t.check_compatible(solvent)?;
        Ok(t)
    }

    /// The solvent model, temperature and density must match exactly.
    pub fn check_compatible(&self, solvent: &SolventModel) -> Result<()> {
        if self.solvent_hash != solvent_hash(solvent) {
            return Err(Error::Susceptibility(format!(
                "table was built for a different solvent model (hash {:016x}, run {:016x})",
                self.solvent_hash,
                solvent_hash(solvent)
            )));
        }
        if (self.temperature - solvent.temperature).abs() > 1e-9 * solvent.temperature {
            return Err(Error::Susceptibility(format!(
                "table temperature {} K differs from the run's {} K",
                self.temperature, solvent.temperature
            )));
        }
        if (self.density - solvent.density).abs() > 1e-12 * solvent.density {
            return Err(Error::Susceptibility(format!(
                "table density {} differs from the run's {}",
                self.density, solvent.density
            )));
        }
        Ok(())
    }

    /// The radial grid must match exactly; tables are never resampled.
    pub fn check_grid(&self, grid: &RadialGrid) -> Result<()> {
        if self.n_points != grid.n() || self.dr != grid.dr() {
            return Err(Error::Susceptibility(format!(
                "table grid ({} points, dr {}) differs from the run's ({} points, dr {})",
                self.n_points,
                self.dr,
                grid.n(),
                grid.dr()
            )));
        }
        Ok(())
    }

    /// Builds an evaluator for χ_ab(k) at arbitrary |k|.
    pub fn interpolator(&self) -> Result<ChiInterpolator> {
        let grid = RadialGrid::new(self.n_points, self.dr)?;
        let rho = self.density * BOHR_IN_ANGSTROM.powi(3);
        let np = self.n_pairs();
        let weights = (0..np)
            .map(|p| {
                let (a, b) = site_pairs(self.n_sites())[p];
                let h_k: Vec<f64> = (0..self.n_points)
                    .map(|i| (self.chi[i * np + p] - self.omega(a, b, self.k(i))) / rho)
                    .collect();
                let h_r = grid.backward(&h_k);
                // ρ h(k) = (1/k) Σ_j w_j sin(k r_j)
                h_r.iter()
                    .enumerate()
                    .map(|(j, h)| 4.0 * std::f64::consts::PI * self.dr * rho * grid.r(j) * h)
                    .collect()
            })
            .collect();
        Ok(ChiInterpolator {
            table: self.clone(),
            weights,
        })
    }
}

/// Evaluates χ at any |k| from a table. ω is exact; ρh is the radial
/// transform of the table's own h(r), so grid values are reproduced and the
/// result is the band-limited continuation consistent with the finite box.
#[derive(Debug, Clone)]
pub struct ChiInterpolator {
    table: SolventSusceptibility,
    weights: Vec<Vec<f64>>,
}

impl ChiInterpolator {
    pub fn n_sites(&self) -> usize {
        self.table.n_sites()
    }

    /// Largest tabulated |k|, bohr⁻¹.
    pub fn k_max(&self) -> f64 {
        self.table.k(self.table.n_points - 1)
    }

    pub fn value(&self, a: usize, b: usize, k: f64) -> f64 {
        let w = &self.weights[self.table.pair_index(a, b)];
        let dr = self.table.dr;
        let smooth = if k < 1e-10 {
            w.iter().enumerate().map(|(j, wj)| wj * (j + 1) as f64 * dr).sum()
        } else {
            // sin((j+1)x) by the Chebyshev recurrence
            let x = k * dr;
            let c2 = 2.0 * x.cos();
            let (mut s_prev, mut s) = (0.0, x.sin());
            let mut acc = 0.0;
            for wj in w {
                acc += wj * s;
                let next = c2 * s - s_prev;
                s_prev = s;
                s = next;
            }
            acc / k
        };
        self.table.omega(a, b, k) + smooth
    }
}
