//! Modified DIIS for integral-equation fixed points x = x + R(x).

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::linalg::diis_weights;

/// Chunked dot product; the chunking is fixed so results do not depend on
/// the number of threads.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 1 << 14;
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum())
        .collect();
    parts.iter().sum()
}

pub fn rms(r: &[f64]) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    (dot(r, r) / r.len() as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct Mdiis {
    capacity: usize,
    /// Fraction of the extrapolated residual added to the new iterate.
    pub mixing: f64,
    xs: VecDeque<Vec<f64>>,
    rs: VecDeque<Vec<f64>>,
    overlaps: VecDeque<Vec<f64>>,
}

impl Mdiis {
    pub fn new(capacity: usize, mixing: f64) -> Self {
        Mdiis {
            capacity: capacity.max(1),
            mixing,
            xs: VecDeque::new(),
            rs: VecDeque::new(),
            overlaps: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn clear(&mut self) {
        self.xs.clear();
        self.rs.clear();
        self.overlaps.clear();
    }

    pub fn push(&mut self, x: Vec<f64>, r: Vec<f64>) {
        if self.xs.len() == self.capacity {
            self.xs.pop_front();
            self.rs.pop_front();
            self.overlaps.pop_front();
            for row in &mut self.overlaps {
                row.remove(0);
            }
        }
        let row: Vec<f64> = self.rs.iter().map(|o| dot(o, &r)).chain([dot(&r, &r)]).collect();
        for (i, v) in row.iter().take(self.rs.len()).enumerate() {
            self.overlaps[i].push(*v);
        }
        self.overlaps.push_back(row);
        self.xs.push_back(x);
        self.rs.push_back(r);
    }

    /// Σ c_i (x_i + η r_i) with Σ c_i = 1 minimizing |Σ c_i r_i|.
    pub fn extrapolate(&self) -> Vec<f64> {
        let m = self.len();
        assert!(m > 0, "empty MDIIS subspace");
        let b = DMatrix::from_fn(m, m, |i, j| self.overlaps[i][j]);
        let c = diis_weights(&b).unwrap_or_else(|| {
            let mut c = vec![0.0; m];
            c[m - 1] = 1.0;
            c
        });
        let n = self.xs[0].len();
        let eta = self.mixing;
        let mut out = vec![0.0; n];
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            let mut acc = 0.0;
            for i in 0..m {
                acc += c[i] * (self.xs[i][k] + eta * self.rs[i][k]);
            }
            *o = acc;
        });
        out
    }
}
