//! Small dense helpers on top of nalgebra.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

/// Symmetric eigendecomposition with eigenvalues ascending. Each eigenvector
/// is sign-fixed so that its largest-magnitude component is positive, which
/// keeps downstream results reproducible.
/// Largest dimension that gets the Jacobi clean-up.
const POLISH_MAX: usize = 300;

pub fn eigh(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.clone().symmetric_eigen();
    let mut u = eig.eigenvectors;
    let evals: Vec<f64> = if n <= POLISH_MAX {
        // the QR result can leave off-diagonal residue far above round-off
        let mut a = u.transpose() * &sym * &u;
        jacobi_polish(&mut a, &mut u);
        (0..n).map(|i| a[(i, i)]).collect()
    } else {
        eig.eigenvalues.iter().copied().collect()
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| evals[a].total_cmp(&evals[b]).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, order.iter().map(|&k| evals[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = u.column(src).clone_owned();
        let mut big = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > big + 1e-12 {
                big = x.abs();
                sign = x.signum();
            }
        }
        col *= sign;
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Cyclic Jacobi sweeps on a nearly diagonal symmetric `a`, accumulating the
/// rotations into the columns of `u`.
fn jacobi_polish(a: &mut DMatrix<f64>, u: &mut DMatrix<f64>) {
    let n = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for _ in 0..30 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= 1e-15 * scale {
            return;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (ukp, ukq) = (u[(k, p)], u[(k, q)]);
                    u[(k, p)] = c * ukp - s * ukq;
                    u[(k, q)] = s * ukp + c * ukq;
                }
            }
        }
    }
}

/// S^{-1/2} and the condition number of S.
pub fn inverse_sqrt(s: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let (vals, vecs) = eigh(s);
    let cond = vals[vals.len() - 1] / vals[0];
    let d = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v.sqrt()));
    (&vecs * d * vecs.transpose(), cond)
}

/// Root-mean-square of the entries of `a - b`.
pub fn rms_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.len().max(1) as f64;
    ((a - b).map(|x| x * x).sum() / n).sqrt()
}

/// Solves the bordered DIIS system for extrapolation weights. Returns `None`
/// if the system is singular.
pub fn diis_weights(b: &DMatrix<f64>) -> Option<Vec<f64>> {
    let m = b.nrows();
    let mut a = DMatrix::zeros(m + 1, m + 1);
    // scale for conditioning
    let scale = (0..m).map(|i| b[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = b[(i, j)] / scale;
        }
        a[(i, m)] = -1.0;
        a[(m, i)] = -1.0;
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = -1.0;
    let sol = a.lu().solve(&rhs)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(sol.iter().take(m).copied().collect())
}

/// Eigenvalues closer than this form one degenerate shell.
const DEGENERATE: f64 = 1e-6;

/// Index ranges of the degenerate shells (two or more members) in sorted
/// `values`.
pub fn degenerate_shells(values: &DVector<f64>) -> Vec<Range<usize>> {
    let n = values.len();
    let mut shells = Vec::new();
    let mut start = 0;
    for end in 1..=n {
        if end < n && (values[end] - values[end - 1]).abs() <= DEGENERATE {
            continue;
        }
        if end - start > 1 {
            shells.push(start..end);
        }
        start = end;
    }
    shells
}

/// Rotates the columns of `c` in each shell to maximise their overlap under
/// `s` with the best-matching columns of `reference` (orthogonal Procrustes).
pub fn align_shells(c: &DMatrix<f64>, shells: &[Range<usize>], reference: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = c.clone();
    for shell in shells {
        let (start, m) = (shell.start, shell.len());
        let p = c.columns(start, m).transpose() * s * reference;
        let mut cols: Vec<usize> = (0..reference.ncols()).collect();
        cols.sort_by(|&a, &b| p.column(b).norm_squared().total_cmp(&p.column(a).norm_squared()));
        let mut cols = cols[..m].to_vec();
        cols.sort_unstable();
        let overlap = DMatrix::from_fn(m, m, |i, k| p[(i, cols[k])]);
        let svd = overlap.svd(true, true);
        let rot = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
        let block = c.columns(start, m) * rot;
        out.columns_mut(start, m).copy_from(&block);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let (v, u) = eigh(&m);
        assert!(v[0] <= v[1] && v[1] <= v[2]);
        let back = &u * DMatrix::from_diagonal(&v) * u.transpose();
        assert!((back - m).amax() < 1e-13);
    }

    #[test]
    fn eigh_vectors_diagonalise_to_round_off() {
        // widely spread spectrum with small couplings
        let n = 12;
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -20.0 + 3.0 * i as f64
            } else {
                1e-2 / (1.0 + (i + j) as f64)
            }
        });
        let (v, u) = eigh(&m);
        let d = u.transpose() * &m * &u;
        for i in 0..n {
            assert!((d[(i, i)] - v[i]).abs() < 1e-13);
            for j in 0..n {
                if i != j {
                    assert!(d[(i, j)].abs() < 1e-13, "{i},{j}: {}", d[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn inverse_sqrt_whitens() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let (x, cond) = inverse_sqrt(&s);
        let id = x.transpose() * &s * &x;
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!((cond - 1.4 / 0.6).abs() < 1e-12);
    }

    #[test]
    fn degenerate_shells_rotate_back_onto_the_reference() {
        let n = 5;
        let reference = DMatrix::<f64>::identity(n, n);
        let e = DVector::from_vec(vec![-1.0, 0.5, 0.5, 0.5, 2.0]);
        let (a, b) = (0.7f64, -1.3f64);
        let mut rot = DMatrix::<f64>::identity(n, n);
        // two rotations inside the threefold shell
        let g1 = DMatrix::from_row_slice(3, 3, &[a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0]);
        let g2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, b.cos(), -b.sin(), 0.0, b.sin(), b.cos()]);
        rot.view_mut((1, 1), (3, 3)).copy_from(&(g1 * g2));
        let shells = degenerate_shells(&e);
        assert_eq!(shells, vec![1..4]);
        let aligned = align_shells(&rot, &shells, &reference, &DMatrix::identity(n, n));
        assert!((aligned - &reference).amax() < 1e-12);
        // non-degenerate columns are left alone, sign included
        let mut flipped = reference.clone();
        flipped.column_mut(4).neg_mut();
        assert_eq!(align_shells(&flipped, &shells, &reference, &DMatrix::identity(n, n)), flipped);
    }
}
