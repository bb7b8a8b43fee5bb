//! Complex 3D FFT on a cubic grid built from 1D transforms along each axis.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// `dst[c·rows + r] = src[r·cols + c]`.
fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::new(0.0, 0.0); src.len()];
    dst.par_chunks_mut(rows).enumerate().for_each(|(c, line)| {
        for (r, v) in line.iter_mut().enumerate() {
            *v = src[r * cols + c];
        }
    });
    dst
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn lines(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.n;
        data.par_chunks_mut(n * n).for_each(|plane| plan.process(plane));
    }

    /// Unnormalised transform, sign −1 forward and +1 inverse.
    pub fn process(&self, data: &mut Vec<Complex64>, inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "3D FFT buffer size");
        // z
        self.lines(data, inverse);
        // y, plane by plane
        let plan = if inverse { &self.inverse } else { &self.forward };
        data.par_chunks_mut(n * n).for_each(|plane| {
            let mut t = transpose(plane, n, n);
            plan.process(&mut t);
            plane.copy_from_slice(&transpose(&t, n, n));
        });
        // x
        let mut t = transpose(data, n, n * n);
        self.lines(&mut t, inverse);
        *data = transpose(&t, n * n, n);
    }

    pub fn forward_real(&self, f: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.process(&mut buf, false);
        buf
    }

    /// Real part of the normalised inverse transform.
    pub fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.process(&mut buf, true);
        let s = 1.0 / buf.len() as f64;
        buf.iter().map(|v| v.re * s).collect()
    }
}
