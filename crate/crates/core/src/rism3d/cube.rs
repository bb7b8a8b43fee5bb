//! Gaussian cube volumetric files: two comment lines, atom count and origin,
//! three axis records, atom records, then values with z fastest, six per
//! line and a line break after every z-run. Lengths are in bohr.

use std::path::Path;

use super::grid::Grid3D;
use crate::model::Atom;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CubeAtom {
    pub z: u32,
    pub charge: f64,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub comments: [String; 2],
    pub origin: [f64; 3],
    pub counts: [usize; 3],
    pub axes: [[f64; 3]; 3],
    pub atoms: Vec<CubeAtom>,
    pub values: Vec<f64>,
}

/// `%13.5E` with a signed two-digit exponent.
fn sci(v: f64) -> String {
    let s = format!("{v:.5E}");
    let (mant, exp) = s.split_once('E').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    let sign = if e < 0 { '-' } else { '+' };
    format!("{:>13}", format!("{mant}E{sign}{:02}", e.abs()))
}

fn parse_err(line: usize, what: &str) -> Error {
    Error::Parse(format!("cube line {line}: {what}"))
}

impl Cube {
    pub fn from_grid(title: &str, field: &[f64], grid: &Grid3D, atoms: &[Atom]) -> Result<Self> {
        if field.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values for a grid of {} points",
                field.len(),
                grid.len()
            )));
        }
        let d = grid.spacing;
        Ok(Cube {
            comments: [title.to_string(), "z fastest, bohr".to_string()],
            origin: grid.origin,
            counts: [grid.n; 3],
            axes: [[d, 0.0, 0.0], [0.0, d, 0.0], [0.0, 0.0, d]],
            atoms: atoms
                .iter()
                .map(|a| CubeAtom {
                    z: a.z,
                    charge: f64::from(a.z),
                    position: a.position,
                })
                .collect(),
            values: field.to_vec(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            s.push_str(c.lines().next().unwrap_or(""));
            s.push('\n');
        }
        let o = self.origin;
        s.push_str(&format!("{:5}{:12.6}{:12.6}{:12.6}\n", self.atoms.len(), o[0], o[1], o[2]));
        for (n, a) in self.counts.iter().zip(&self.axes) {
            s.push_str(&format!("{:5}{:12.6}{:12.6}{:12.6}\n", n, a[0], a[1], a[2]));
        }
        for a in &self.atoms {
            let p = a.position;
            s.push_str(&format!("{:5}{:12.6}{:12.6}{:12.6}{:12.6}\n", a.z, a.charge, p[0], p[1], p[2]));
        }
        let nz = self.counts[2];
        for run in self.values.chunks(nz) {
            for line in run.chunks(6) {
                for v in line {
                    s.push_str(&sci(*v));
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("cube: missing {what}")));
        let c0 = next("comment")?.1.to_string();
        let c1 = next("comment")?.1.to_string();
        let nums = |(i, l): (usize, &str), k: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| parse_err(i + 1, &format!("bad number '{t}'"))))
                .collect::<Result<_>>()?;
            if v.len() < k {
                return Err(parse_err(i + 1, &format!("expected {k} fields")));
            }
            Ok(v)
        };
        let head = nums(next("atom count")?, 4)?;
        if head[0] < 0.0 {
            return Err(Error::Parse("cube files with orbital records are not supported".into()));
        }
        let natoms = head[0] as usize;
        let mut counts = [0usize; 3];
        let mut axes = [[0.0; 3]; 3];
        for a in 0..3 {
            let v = nums(next("axis record")?, 4)?;
            if v[0] < 1.0 {
                return Err(Error::Parse("cube axis counts must be positive".into()));
            }
            counts[a] = v[0] as usize;
            axes[a] = [v[1], v[2], v[3]];
        }
        let mut atoms = Vec::with_capacity(natoms);
        for _ in 0..natoms {
            let v = nums(next("atom record")?, 5)?;
            atoms.push(CubeAtom {
                z: v[0] as u32,
                charge: v[1],
                position: [v[2], v[3], v[4]],
            });
        }
        let total = counts.iter().product();
        let mut values = Vec::with_capacity(total);
        for (i, l) in lines {
            for t in l.split_whitespace() {
                values.push(t.parse::<f64>().map_err(|_| parse_err(i + 1, &format!("bad value '{t}'")))?);
            }
        }
        if values.len() != total {
            return Err(Error::Parse(format!("cube has {} values, expected {total}", values.len())));
        }
        Ok(Cube {
            comments: [c0, c1],
            origin: [head[1], head[2], head[3]],
            counts,
            axes,
            atoms,
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
