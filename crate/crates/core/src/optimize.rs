//! BFGS with a strong-Wolfe line search.

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    /// Converged when the gradient infinity norm drops below this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Scale of the one-off perturbation applied when progress stalls.
    pub restart_perturbation: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            gradient_tolerance: 1e-6,
            max_iterations: 10_000,
            restart_perturbation: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub restarted: bool,
    /// Function value after each accepted step (starting point first).
    pub history: Vec<f64>,
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct LinePoint {
    alpha: f64,
    f: f64,
    dphi: f64,
    g: Vec<f64>,
}

/// Minimizer of the cubic interpolating two points with derivatives, or the
/// bisection point when the cubic is ill-behaved.
fn cubic_min(a: &LinePoint, b: &LinePoint) -> f64 {
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dphi * b.dphi;
    let lo = a.alpha.min(b.alpha);
    let hi = a.alpha.max(b.alpha);
    let mid = 0.5 * (a.alpha + b.alpha);
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    // stay clear of the interval ends
    let margin = 0.1 * (hi - lo);
    if !t.is_finite() || t < lo + margin || t > hi - margin {
        mid
    } else {
        t
    }
}

/// Strong-Wolfe line search (Nocedal & Wright, algorithms 3.5 and 3.6).
fn line_search<F>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    gx: &[f64],
    p: &[f64],
    evals: &mut usize,
) -> Option<(Vec<f64>, LinePoint)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let dphi0 = dot(gx, p);
    if !(dphi0 < 0.0) {
        return None;
    }
    let mut eval = |alpha: f64, evals: &mut usize| {
        let xt: Vec<f64> = x.iter().zip(p).map(|(a, b)| a + alpha * b).collect();
        let (ft, gt) = f(&xt);
        *evals += 1;
        let dphi = dot(&gt, p);
        (xt, LinePoint { alpha, f: ft, dphi, g: gt })
    };
    let zero = LinePoint {
        alpha: 0.0,
        f: fx,
        dphi: dphi0,
        g: gx.to_vec(),
    };
    let mut prev = zero;
    let mut alpha = 1.0;
    for i in 0..30 {
        let (xt, cur) = eval(alpha, evals);
        if !cur.f.is_finite() {
            alpha *= 0.1;
            continue;
        }
        if cur.f > fx + C1 * alpha * dphi0 || (i > 0 && cur.f >= prev.f) {
            return zoom(&mut eval, fx, dphi0, prev, cur, evals);
        }
        if cur.dphi.abs() <= -C2 * dphi0 {
            return Some((xt, cur));
        }
        if cur.dphi >= 0.0 {
            return zoom(&mut eval, fx, dphi0, cur, prev, evals);
        }
        prev = cur;
        alpha *= 2.0;
    }
    None
}

fn zoom<E>(
    eval: &mut E,
    fx: f64,
    dphi0: f64,
    mut lo: LinePoint,
    mut hi: LinePoint,
    evals: &mut usize,
) -> Option<(Vec<f64>, LinePoint)>
where
    E: FnMut(f64, &mut usize) -> (Vec<f64>, LinePoint),
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    for _ in 0..40 {
        let alpha = cubic_min(&lo, &hi);
        if (hi.alpha - lo.alpha).abs() < 1e-14 * lo.alpha.abs().max(1.0) {
            break;
        }
        let (xt, cur) = eval(alpha, evals);
        if cur.f > fx + C1 * alpha * dphi0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.dphi.abs() <= -C2 * dphi0 {
                return Some((xt, cur));
            }
            if cur.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // accept the best sufficient-decrease point if Wolfe curvature is unreachable
    if lo.alpha > 0.0 && lo.f < fx {
        let alpha = lo.alpha;
        let (xt, cur) = eval(alpha, evals);
        return Some((xt, cur));
    }
    None
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn bfgs<F>(x0: &[f64], mut f: F, opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut evals = 1;
    let mut history = vec![fx];
    let mut hinv = identity(n);
    let mut first_step = true;
    let mut restarted = false;
    let mut iterations = 0;
    let mut best = (x.clone(), fx, g.clone());
    while iterations < opts.max_iterations {
        if n == 0 || inf_norm(&g) < opts.gradient_tolerance {
            return BfgsOutcome {
                x,
                value: fx,
                gradient: g,
                iterations,
                evaluations: evals,
                converged: true,
                restarted,
                history,
            };
        }
        iterations += 1;
        let mut p = matvec(&hinv, &g);
        p.iter_mut().for_each(|v| *v = -*v);
        if first_step {
            // keep the very first trial step modest
            let scale = 0.1 / inf_norm(&p).max(0.1);
            p.iter_mut().for_each(|v| *v *= scale);
        }
        match line_search(&mut f, &x, fx, &g, &p, &mut evals) {
            Some((xn, pt)) => {
                let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = pt.g.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                    if first_step {
                        let gamma = sy / dot(&y, &y);
                        hinv = identity(n);
                        hinv.iter_mut().for_each(|v| *v *= gamma);
                        first_step = false;
                    }
                    bfgs_update(&mut hinv, &s, &y, sy);
                }
                x = xn;
                fx = pt.f;
                g = pt.g;
                history.push(fx);
                if fx < best.1 {
                    best = (x.clone(), fx, g.clone());
                }
            }
            None => {
                if restarted {
                    break;
                }
                // stagnation: perturb deterministically and drop curvature
                restarted = true;
                first_step = true;
                hinv = identity(n);
                for (i, v) in x.iter_mut().enumerate() {
                    let t = ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5;
                    *v += opts.restart_perturbation * t;
                }
                let (f2, g2) = f(&x);
                evals += 1;
                fx = f2;
                g = g2;
                history.push(fx);
                if fx < best.1 {
                    best = (x.clone(), fx, g.clone());
                }
            }
        }
    }
    let converged = inf_norm(&best.2) < opts.gradient_tolerance;
    BfgsOutcome {
        x: best.0,
        value: best.1,
        gradient: best.2,
        iterations,
        evaluations: evals,
        converged,
        restarted,
        history,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn matvec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = matvec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
