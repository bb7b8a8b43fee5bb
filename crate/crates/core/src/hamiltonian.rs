//! Active-space second-quantized Hamiltonian with frozen-core folding and an
//! optional solvent one-electron operator.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrals::IntegralTensors;
use crate::model::{ActiveSpaceSpec, OrbitalSelection};
use crate::scf::{mo_eri, DenseEri};

/// Spatial-orbital Hamiltonian
/// `E0 + sum h_pq E_pq + 1/2 sum (pq|rs) (E_pq E_rs - delta_qr E_ps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSpaceHamiltonian {
    pub constant: f64,
    pub one_body: DMatrix<f64>,
    /// Chemists' notation, index `((p*n + q)*n + r)*n + s`.
    pub two_body: Vec<f64>,
    pub n_orbitals: usize,
    pub n_electrons: usize,
}

impl ActiveSpaceHamiltonian {
    #[inline]
    pub fn g(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let n = self.n_orbitals;
        self.two_body[((p * n + q) * n + r) * n + s]
    }

    /// Energy of a closed-shell determinant occupying the first
    /// `n_electrons / 2` orbitals.
    pub fn reference_energy(&self) -> f64 {
        let k = self.n_electrons / 2;
        let mut e = self.constant;
        for i in 0..k {
            e += 2.0 * self.one_body[(i, i)];
            for j in 0..k {
                e += 2.0 * self.g(i, i, j, j) - self.g(i, j, j, i);
            }
        }
        e
    }

    /// FCIDUMP text: namelist header then `value i j k l` records with
    /// 1-based indices, one-body records with k = l = 0 and the constant last.
    pub fn to_fcidump(&self) -> String {
        let n = self.n_orbitals;
        let mut s = String::new();
        let _ = writeln!(s, " &FCI NORB={n},NELEC={},MS2=0,", self.n_electrons);
        let _ = writeln!(s, "  ORBSYM={}", vec!["1"; n].join(","));
        let _ = writeln!(s, "  ISYM=1,");
        let _ = writeln!(s, " &END");
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for t in 0..=r {
                        if p * (p + 1) / 2 + q < r * (r + 1) / 2 + t {
                            continue;
                        }
                        let v = self.g(p, q, r, t);
                        if v.abs() > 1e-14 {
                            let _ = writeln!(s, "{v:24.16e} {} {} {} {}", p + 1, q + 1, r + 1, t + 1);
                        }
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..=p {
                let v = self.one_body[(p, q)];
                if v.abs() > 1e-14 {
                    let _ = writeln!(s, "{v:24.16e} {} {} 0 0", p + 1, q + 1);
                }
            }
        }
        let _ = writeln!(s, "{:24.16e} 0 0 0 0", self.constant);
        s
    }

    pub fn write_fcidump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_fcidump()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_fcidump(text: &str) -> Result<Self> {
        let upper = text.to_ascii_uppercase();
        let end = upper
            .find("&END")
            .or_else(|| upper.find('/'))
            .ok_or_else(|| Error::Parse("FCIDUMP header has no &END".into()))?;
        let header = &upper[..end];
        let field = |key: &str| -> Result<usize> {
            let i = header
                .find(&format!("{key}="))
                .ok_or_else(|| Error::Parse(format!("FCIDUMP header lacks {key}")))?;
            let rest = &header[i + key.len() + 1..];
            let num: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
            num.parse().map_err(|_| Error::Parse(format!("bad {key} in FCIDUMP")))
        };
        let n = field("NORB")?;
        let ne = field("NELEC")?;
        let mut h = ActiveSpaceHamiltonian {
            constant: 0.0,
            one_body: DMatrix::zeros(n, n),
            two_body: vec![0.0; n.pow(4)],
            n_orbitals: n,
            n_electrons: ne,
        };
        let body = &text[end + 4..];
        for line in body.lines() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 5 {
                return Err(Error::Parse(format!("bad FCIDUMP record '{line}'")));
            }
            let v: f64 = f[0]
                .replace(['D', 'd'], "E")
                .parse()
                .map_err(|_| Error::Parse(format!("bad value in '{line}'")))?;
            let ix: Vec<usize> = f[1..]
                .iter()
                .map(|x| x.parse::<usize>().map_err(|_| Error::Parse(format!("bad index in '{line}'"))))
                .collect::<Result<_>>()?;
            if ix.iter().any(|&i| i > n) {
                return Err(Error::Parse(format!("index out of range in '{line}'")));
            }
            match (ix[0], ix[1], ix[2], ix[3]) {
                (0, 0, 0, 0) => h.constant = v,
                (p, q, 0, 0) => {
                    h.one_body[(p - 1, q - 1)] = v;
                    h.one_body[(q - 1, p - 1)] = v;
                }
                (p, q, r, s) => {
                    let (p, q, r, s) = (p - 1, q - 1, r - 1, s - 1);
                    for (a, b, c, d) in [
                        (p, q, r, s),
                        (q, p, r, s),
                        (p, q, s, r),
                        (q, p, s, r),
                        (r, s, p, q),
                        (s, r, p, q),
                        (r, s, q, p),
                        (s, r, q, p),
                    ] {
                        h.two_body[((a * n + b) * n + c) * n + d] = v;
                    }
                }
            }
        }
        Ok(h)
    }
}

/// Core and active orbital indices into a coefficient matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitalPartition {
    pub core: Vec<usize>,
    pub active: Vec<usize>,
}

impl OrbitalPartition {
    /// Partition for a spec over orbitals already ordered so that the frozen
    /// core comes first (canonical by energy, or natural by occupation).
    pub fn from_spec(spec: &ActiveSpaceSpec, n_electrons: usize, n_orbitals: usize) -> Result<Self> {
        spec.check(n_electrons, n_orbitals)?;
        let n_core = spec.frozen_core(n_electrons)?;
        let core: Vec<usize> = (0..n_core).collect();
        let active = match &spec.selection {
            OrbitalSelection::Indices(ix) => ix.clone(),
            OrbitalSelection::Canonical | OrbitalSelection::NaturalOccupancy => {
                (n_core..n_core + spec.orbitals).collect()
            }
        };
        Ok(OrbitalPartition { core, active })
    }

    /// Every orbital active, no core.
    pub fn full(n_orbitals: usize) -> Self {
        OrbitalPartition {
            core: Vec::new(),
            active: (0..n_orbitals).collect(),
        }
    }
}

/// Folds the frozen core into the active-space integrals. `solvent` is added
/// to the AO core Hamiltonian before the transformation, so its core
/// expectation lands in the constant and its active projection in `h_pq`.
pub fn build_active_hamiltonian(
    c: &DMatrix<f64>,
    ints: &IntegralTensors,
    eri: &DenseEri,
    solvent: Option<&DMatrix<f64>>,
    partition: &OrbitalPartition,
    n_active_electrons: usize,
) -> Result<ActiveSpaceHamiltonian> {
    let n_mo = c.ncols();
    for &i in partition.core.iter().chain(&partition.active) {
        if i >= n_mo {
            return Err(Error::ActiveSpace(format!("orbital index {i} out of range ({n_mo} MOs)")));
        }
    }
    if partition.active.iter().any(|a| partition.core.contains(a)) {
        return Err(Error::ActiveSpace("active window overlaps the frozen core".into()));
    }
    let ctsc = c.transpose() * &ints.overlap * c;
    let dev = (ctsc - DMatrix::identity(n_mo, n_mo)).amax();
    if dev > 1e-6 {
        return Err(Error::ActiveSpace(format!(
            "orbitals are not orthonormal (max deviation {dev:.2e})"
        )));
    }
    if n_active_electrons > 2 * partition.active.len() {
        return Err(Error::ActiveSpace("too many active electrons".into()));
    }
    let mut h_ao = ints.core_hamiltonian();
    if let Some(v) = solvent {
        h_ao += v;
    }
    let nc = partition.core.len();
    let na = partition.active.len();
    let cc = DMatrix::from_fn(c.nrows(), nc, |i, k| c[(i, partition.core[k])]);
    let ca = DMatrix::from_fn(c.nrows(), na, |i, k| c[(i, partition.active[k])]);

    // core density and its Fock contribution in the AO basis
    let d_core = 2.0 * &cc * cc.transpose();
    let g_core = eri.fock_2e(&d_core);
    let e_core = 0.5 * d_core.component_mul(&(&h_ao + &h_ao + &g_core)).sum();
    let h_eff = ca.transpose() * (&h_ao + &g_core) * &ca;
    let two_body = mo_eri(eri, &ca);
    Ok(ActiveSpaceHamiltonian {
        constant: ints.nuclear_repulsion + e_core,
        one_body: 0.5 * (&h_eff + h_eff.transpose()),
        two_body,
        n_orbitals: na,
        n_electrons: n_active_electrons,
    })
}

/// Spin-summed AO density from core orbitals (occupation 2) and an active
/// 1-RDM.
pub fn ao_density(c: &DMatrix<f64>, partition: &OrbitalPartition, gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    let cc = DMatrix::from_fn(n, partition.core.len(), |i, k| c[(i, partition.core[k])]);
    let ca = DMatrix::from_fn(n, partition.active.len(), |i, k| c[(i, partition.active[k])]);
    2.0 * &cc * cc.transpose() + &ca * gamma * ca.transpose()
}
