//! Radial (ℓ = 0 Fourier–Bessel) transforms via a DST-I.
//!
//! Grid convention: r_j = (j+1)·dr and k_i = (i+1)·dk for j, i < n, with
//! dk = π/(n·dr). The outermost point j = n−1 sits on the boundary
//! R = n·dr where every transformed function vanishes, so the sine transform
//! acts on the n−1 interior points and its FFT has length 2n.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

#[derive(Clone)]
pub struct RadialGrid {
    n: usize,
    dr: f64,
    plan: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialGrid").field("n", &self.n).field("dr", &self.dr).finish()
    }
}

impl PartialEq for RadialGrid {
    fn eq(&self, o: &Self) -> bool {
        self.n == o.n && self.dr == o.dr
    }
}

impl RadialGrid {
    /// `n` points (a power of two) spaced `dr` bohr apart.
    pub fn new(n: usize, dr: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!("radial grid size {n} must be a power of two >= 8")));
        }
        if !(dr > 0.0 && dr.is_finite()) {
            return Err(Error::Config(format!("radial spacing {dr} must be positive")));
        }
        let plan = FftPlanner::new().plan_fft_forward(2 * n);
        Ok(RadialGrid { n, dr, plan })
    }

    pub fn from_angstrom(n: usize, dr_angstrom: f64) -> Result<Self> {
        Self::new(n, crate::units::angstrom_to_bohr(dr_angstrom))
    }

    /// 4096 points at 0.02 angstrom.
    pub fn default_water() -> Self {
        Self::from_angstrom(4096, 0.02).expect("valid default grid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn dk(&self) -> f64 {
        std::f64::consts::PI / (self.n as f64 * self.dr)
    }

    pub fn r(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.dr
    }

    pub fn k(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dk()
    }

    pub fn rs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.r(j)).collect()
    }

    pub fn ks(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.k(i)).collect()
    }

    /// S_i = Σ_j x_j sin(π(i+1)(j+1)/n) over the interior points.
    fn dst(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(x.len(), n, "radial function length");
        let mut y = vec![Complex64::new(0.0, 0.0); 2 * n];
        for j in 0..n - 1 {
            y[j + 1] = Complex64::new(x[j], 0.0);
            y[2 * n - j - 1] = Complex64::new(-x[j], 0.0);
        }
        self.plan.process(&mut y);
        let mut out: Vec<f64> = (0..n).map(|i| -0.5 * y[i + 1].im).collect();
        out[n - 1] = 0.0;
        out
    }

    /// f(k) = (4π/k) ∫ r f(r) sin(kr) dr.
    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = f.iter().enumerate().map(|(j, v)| self.r(j) * v).collect();
        let s = self.dst(&x);
        let c = 4.0 * std::f64::consts::PI * self.dr;
        s.iter().enumerate().map(|(i, v)| c * v / self.k(i)).collect()
    }

    /// f(r) = (1/(2π² r)) ∫ k f(k) sin(kr) dk.
    pub fn backward(&self, f: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = f.iter().enumerate().map(|(i, v)| self.k(i) * v).collect();
        let s = self.dst(&x);
        let c = self.dk() / (2.0 * std::f64::consts::PI * std::f64::consts::PI);
        s.iter().enumerate().map(|(j, v)| c * v / self.r(j)).collect()
    }
}
