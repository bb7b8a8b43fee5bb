//! Contracted Cartesian Gaussian shells.
//!
//! Basis data files use NWChem-style records: an `El  S|P|D|SP` header line
//! followed by rows of `exponent coefficient [p-coefficient]`. Lines starting
//! with `#`, `BASIS` or `END` are ignored. SP shells are split into an S and a
//! P shell sharing exponents.
//!
//! Functions are ordered atom-major, shells in file order, and Cartesian
//! components within a shell as
//! `s`; `x y z`; `xx xy xz yy yz zz`. The d shells keep all six Cartesian
//! components, so 6-31G* counts six functions per d shell.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{Atom, BasisName};

/// Cartesian exponents `(i, j, k)` of each component of a shell with angular
/// momentum `l`, in the documented order.
pub fn cartesian_components(l: usize) -> &'static [[usize; 3]] {
    const S: [[usize; 3]; 1] = [[0, 0, 0]];
    const P: [[usize; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    const D: [[usize; 3]; 6] = [
        [2, 0, 0],
        [1, 1, 0],
        [1, 0, 1],
        [0, 2, 0],
        [0, 1, 1],
        [0, 0, 2],
    ];
    match l {
        0 => &S,
        1 => &P,
        2 => &D,
        _ => panic!("angular momentum {l} is not supported"),
    }
}

pub fn n_cartesian(l: usize) -> usize {
    (l + 1) * (l + 2) / 2
}

fn double_factorial(n: i64) -> f64 {
    let mut out = 1.0;
    let mut k = n;
    while k > 1 {
        out *= k as f64;
        k -= 2;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    /// Bohr.
    pub center: [f64; 3],
    pub l: usize,
    pub exponents: Vec<f64>,
    /// Contraction coefficients with primitive normalization folded in, for
    /// the `x^l` component. Other components are rescaled by
    /// [`Shell::component_scale`].
    pub coefficients: Vec<f64>,
    pub atom: usize,
}

impl Shell {
    /// Builds a shell from raw (unnormalized-primitive) contraction
    /// coefficients and normalizes the contracted function.
    pub fn new(center: [f64; 3], l: usize, exponents: Vec<f64>, raw: Vec<f64>, atom: usize) -> Self {
        assert_eq!(exponents.len(), raw.len());
        assert!(l <= 2, "only s, p and d shells are supported");
        let lf = l as f64;
        let mut coefficients: Vec<f64> = exponents
            .iter()
            .zip(&raw)
            .map(|(&a, &c)| c * (2.0 * a / PI).powf(0.75) * (4.0 * a).powf(0.5 * lf))
            .collect();
        // self-overlap of the x^l component with these coefficients
        let df = double_factorial(2 * l as i64 - 1);
        let mut s = 0.0;
        for (a, ca) in exponents.iter().zip(&coefficients) {
            for (b, cb) in exponents.iter().zip(&coefficients) {
                s += ca * cb * df * PI.powf(1.5) / (2f64.powi(l as i32) * (a + b).powf(lf + 1.5));
            }
        }
        let scale = 1.0 / (s / df).sqrt();
        for c in &mut coefficients {
            *c *= scale;
        }
        Shell {
            center,
            l,
            exponents,
            coefficients,
            atom,
        }
    }

    pub fn n_functions(&self) -> usize {
        n_cartesian(self.l)
    }

    /// Factor making component `(i, j, k)` unit-normalized.
    pub fn component_scale(ijk: [usize; 3]) -> f64 {
        1.0 / (double_factorial(2 * ijk[0] as i64 - 1)
            * double_factorial(2 * ijk[1] as i64 - 1)
            * double_factorial(2 * ijk[2] as i64 - 1))
        .sqrt()
    }

    /// Value of component `c` at a point (bohr). Used by quadrature checks.
    pub fn evaluate(&self, c: usize, r: [f64; 3]) -> f64 {
        let ijk = cartesian_components(self.l)[c];
        let d = [
            r[0] - self.center[0],
            r[1] - self.center[1],
            r[2] - self.center[2],
        ];
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let ang = d[0].powi(ijk[0] as i32) * d[1].powi(ijk[1] as i32) * d[2].powi(ijk[2] as i32);
        let radial: f64 = self
            .exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(a, c)| c * (-a * r2).exp())
            .sum();
        Self::component_scale(ijk) * ang * radial
    }
}

pub fn n_functions(shells: &[Shell]) -> usize {
    shells.iter().map(Shell::n_functions).sum()
}

/// First basis-function index of each shell.
pub fn shell_offsets(shells: &[Shell]) -> Vec<usize> {
    let mut out = Vec::with_capacity(shells.len());
    let mut acc = 0;
    for s in shells {
        out.push(acc);
        acc += s.n_functions();
    }
    out
}

/// Shell template for one element: angular momentum, exponents, raw coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellTemplate {
    pub l: usize,
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
}

pub type BasisLibrary = HashMap<String, Vec<ShellTemplate>>;

fn parse_number(s: &str) -> Result<f64> {
    s.replace(['D', 'd'], "E")
        .parse::<f64>()
        .map_err(|_| Error::Basis(format!("bad number '{s}'")))
}

/// Parses an NWChem-style basis file into per-element shell templates.
pub fn parse_basis(text: &str) -> Result<BasisLibrary> {
    let mut lib: BasisLibrary = HashMap::new();
    // (element, shell kinds, exponents, coefficient columns)
    let mut current: Option<(String, Vec<usize>, Vec<f64>, Vec<Vec<f64>>)> = None;

    fn flush(lib: &mut BasisLibrary, cur: Option<(String, Vec<usize>, Vec<f64>, Vec<Vec<f64>>)>) {
        if let Some((el, ls, exps, cols)) = cur {
            let entry = lib.entry(el).or_default();
            for (l, col) in ls.into_iter().zip(cols) {
                entry.push(ShellTemplate {
                    l,
                    exponents: exps.clone(),
                    coefficients: col,
                });
            }
        }
    }

    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("BASIS") || t.starts_with("END") {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let is_header = fields.len() == 2 && fields[0].chars().all(|c| c.is_ascii_alphabetic());
        if is_header {
            flush(&mut lib, current.take());
            let ls = match fields[1].to_ascii_uppercase().as_str() {
                "S" => vec![0],
                "P" => vec![1],
                "D" => vec![2],
                "SP" | "L" => vec![0, 1],
                k => return Err(Error::Basis(format!("unsupported shell type '{k}'"))),
            };
            let n = ls.len();
            current = Some((fields[0].to_string(), ls, Vec::new(), vec![Vec::new(); n]));
        } else {
            let Some((_, ls, exps, cols)) = current.as_mut() else {
                return Err(Error::Basis(format!("data line outside a shell: '{t}'")));
            };
            if fields.len() != 1 + ls.len() {
                return Err(Error::Basis(format!("malformed primitive line '{t}'")));
            }
            exps.push(parse_number(fields[0])?);
            for (col, f) in cols.iter_mut().zip(&fields[1..]) {
                col.push(parse_number(f)?);
            }
        }
    }
    flush(&mut lib, current);
    for (el, shells) in &lib {
        for s in shells {
            if s.exponents.iter().any(|&a| !(a > 0.0)) {
                return Err(Error::Basis(format!("{el}: non-positive exponent")));
            }
        }
    }
    Ok(lib)
}

fn bundled(name: BasisName) -> &'static BasisLibrary {
    static STO3G: OnceLock<BasisLibrary> = OnceLock::new();
    static P631G: OnceLock<BasisLibrary> = OnceLock::new();
    static P631GS: OnceLock<BasisLibrary> = OnceLock::new();
    let (cell, text) = match name {
        BasisName::Sto3g => (&STO3G, include_str!("../data/basis/sto-3g.nw")),
        BasisName::Pople631g => (&P631G, include_str!("../data/basis/6-31g.nw")),
        BasisName::Pople631gStar => (&P631GS, include_str!("../data/basis/6-31g_star.nw")),
    };
    cell.get_or_init(|| parse_basis(text).expect("bundled basis parses"))
}

/// Builds the shells of `atoms` from a bundled basis.
pub fn build_basis(atoms: &[Atom], name: BasisName) -> Result<Vec<Shell>> {
    build_basis_from(atoms, bundled(name), name.as_str())
}

pub fn build_basis_from(atoms: &[Atom], lib: &BasisLibrary, label: &str) -> Result<Vec<Shell>> {
    let mut shells = Vec::new();
    for (ia, atom) in atoms.iter().enumerate() {
        let templates = lib
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(&atom.element))
            .map(|(_, v)| v)
            .ok_or_else(|| {
                Error::Basis(format!("{label} has no parameters for {}", atom.element))
            })?;
        for t in templates {
            shells.push(Shell::new(
                atom.position,
                t.l,
                t.exponents.clone(),
                t.coefficients.clone(),
                ia,
            ));
        }
    }
    Ok(shells)
}
