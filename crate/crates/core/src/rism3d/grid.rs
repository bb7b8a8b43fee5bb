//! Uniform cubic grid and its FFT reciprocal lattice.

use crate::model::GridSpec;
use crate::units::angstrom_to_bohr;
use crate::{Error, Result};

/// `n³` points `origin + (i, j, k)·spacing`, flattened with z fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3D {
    pub n: usize,
    /// Bohr.
    pub spacing: f64,
    /// Bohr.
    pub origin: [f64; 3],
}

impl Grid3D {
    pub fn new(n: usize, spacing: f64, origin: [f64; 3]) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::Config(format!("3D grid needs an even point count, got {n}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Config(format!("3D grid spacing {spacing} must be positive")));
        }
        Ok(Grid3D { n, spacing, origin })
    }

    /// Grid from a spec in angstrom whose point `(n/2, n/2, n/2)` sits on
    /// `center` (bohr).
    pub fn centered(spec: &GridSpec, center: [f64; 3]) -> Result<Self> {
        spec.validate()?;
        let d = angstrom_to_bohr(spec.spacing);
        let half = (spec.points / 2) as f64 * d;
        Self::new(spec.points, d, [center[0] - half, center[1] - half, center[2] - half])
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        [
            self.origin[0] + c[0] as f64 * self.spacing,
            self.origin[1] + c[1] as f64 * self.spacing,
            self.origin[2] + c[2] as f64 * self.spacing,
        ]
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// δ³, bohr³.
    pub fn volume_element(&self) -> f64 {
        self.spacing.powi(3)
    }

    /// Reciprocal lattice spacing 2π/(nδ).
    pub fn dk(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n as f64 * self.spacing)
    }

    /// Signed FFT frequency of index `m`.
    #[inline]
    pub fn frequency(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    /// Integer |m|² of the reciprocal point at flat index `idx`.
    #[inline]
    pub fn m2(&self, idx: usize) -> usize {
        self.coords(idx)
            .iter()
            .map(|&c| {
                let f = self.frequency(c);
                (f * f) as usize
            })
            .sum()
    }

    /// Largest |m|² on the lattice.
    pub fn max_m2(&self) -> usize {
        3 * (self.n / 2) * (self.n / 2)
    }

    /// Largest |k| on the lattice, bohr⁻¹.
    pub fn k_max(&self) -> f64 {
        self.dk() * (self.max_m2() as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_is_a_grid_point() {
        let g = Grid3D::centered(&GridSpec { points: 8, spacing: 0.5 }, [1.0, -2.0, 0.25]).unwrap();
        let p = g.point(g.index(4, 4, 4));
        for (a, b) in p.iter().zip([1.0, -2.0, 0.25]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(g.coords(g.index(3, 5, 7)), [3, 5, 7]);
    }

    #[test]
    fn frequencies_wrap() {
        let g = Grid3D::new(8, 1.0, [0.0; 3]).unwrap();
        let f: Vec<i64> = (0..8).map(|m| g.frequency(m)).collect();
        assert_eq!(f, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.m2(g.index(4, 7, 1)), 16 + 1 + 1);
        assert_eq!(g.max_m2(), 48);
    }

    #[test]
    fn rejects_odd_sizes() {
        assert!(Grid3D::new(7, 1.0, [0.0; 3]).is_err());
        assert!(Grid3D::new(8, -1.0, [0.0; 3]).is_err());
    }
}
