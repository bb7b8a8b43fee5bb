//! Boys function F_n(T) = int_0^1 t^(2n) exp(-T t^2) dt.
//!
//! Below `TABLE_MAX` the highest requested order comes from a seventh-order
//! Taylor expansion around tabulated nodes (themselves generated by the
//! convergent series) and lower orders follow by downward recursion. Above it
//! the asymptotic form with upward recursion is exact to double precision.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Highest order callers may request.
pub const MAX_ORDER: usize = 16;

const STEP: f64 = 0.05;
const TABLE_MAX: f64 = 40.0;
const TAYLOR: usize = 7;
const ORDERS: usize = MAX_ORDER + TAYLOR + 1;

struct Table {
    /// values[node * ORDERS + n]
    values: Vec<f64>,
}

fn series_top(n: usize, t: f64) -> f64 {
    // F_n(T) = exp(-T) * sum_k (2T)^k / ((2n+1)(2n+3)...(2n+2k+1))
    let mut term = 1.0 / (2 * n + 1) as f64;
    let mut sum = term;
    let mut k = 1;
    loop {
        term *= 2.0 * t / (2 * n + 2 * k + 1) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1;
    }
    (-t).exp() * sum
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let nodes = (TABLE_MAX / STEP).round() as usize + 2;
        let mut values = vec![0.0; nodes * ORDERS];
        for i in 0..nodes {
            let t = i as f64 * STEP;
            let row = &mut values[i * ORDERS..(i + 1) * ORDERS];
            row[ORDERS - 1] = series_top(ORDERS - 1, t);
            let e = (-t).exp();
            for n in (0..ORDERS - 1).rev() {
                row[n] = (2.0 * t * row[n + 1] + e) / (2 * n + 1) as f64;
            }
        }
        Table { values }
    })
}

/// Fills `out[0..=nmax]` with F_0(T) .. F_nmax(T).
pub fn boys(nmax: usize, t: f64, out: &mut [f64]) {
    debug_assert!(nmax <= MAX_ORDER);
    debug_assert!(t >= 0.0);
    if t < TABLE_MAX {
        let tab = table();
        let node = (t / STEP + 0.5) as usize;
        let dt = node as f64 * STEP - t;
        let row = &tab.values[node * ORDERS..(node + 1) * ORDERS];
        // F_n(T) = sum_k F_{n+k}(T0) (T0 - T)^k / k!
        let mut acc = row[nmax + TAYLOR];
        for k in (0..TAYLOR).rev() {
            acc = row[nmax + k] + acc * dt / (k + 1) as f64;
        }
        out[nmax] = acc;
        if nmax > 0 {
            let e = (-t).exp();
            for n in (0..nmax).rev() {
                out[n] = (2.0 * t * out[n + 1] + e) / (2 * n + 1) as f64;
            }
        }
    } else {
        let e = (-t).exp();
        out[0] = 0.5 * (PI / t).sqrt();
        let inv2t = 0.5 / t;
        for n in 0..nmax {
            out[n + 1] = ((2 * n + 1) as f64 * out[n] - e) * inv2t;
        }
    }
}

/// Single-order convenience wrapper.
pub fn boys_single(n: usize, t: f64) -> f64 {
    let mut buf = [0.0; MAX_ORDER + 1];
    boys(n, t, &mut buf);
    buf[n]
}
