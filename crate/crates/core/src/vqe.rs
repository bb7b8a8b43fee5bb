//! Statevector emulation of the disentangled UCCSD ansatz.
//!
//! Two representations are kept. [`Statevector`] is the full 2^Q complex
//! register used for the public state/expectation/RDM operations. The
//! optimizer runs on [`SectorEngine`], which stores only determinants with the
//! reference particle number and S_z; UCCSD exponentials never leave that
//! sector and the generators are real, so amplitudes are real there.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::optimize::{bfgs, BfgsOptions};
use crate::pauli::PauliHamiltonian;
use crate::{Error, Result};

/// Largest sector the engine agrees to enumerate.
const MAX_SECTOR: usize = 20_000_000;
/// Sectors up to this size are diagonalized densely.
const DENSE_LIMIT: usize = 1500;

#[inline]
fn parity_below(b: u128, p: usize) -> f64 {
    if (b & ((1u128 << p) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// a_p on a determinant.
#[inline]
fn annihilate(b: u128, p: usize) -> Option<(u128, f64)> {
    if b >> p & 1 == 0 {
        None
    } else {
        Some((b ^ (1u128 << p), parity_below(b, p)))
    }
}

/// a†_p on a determinant.
#[inline]
fn create(b: u128, p: usize) -> Option<(u128, f64)> {
    if b >> p & 1 == 1 {
        None
    } else {
        Some((b | (1u128 << p), parity_below(b, p)))
    }
}

/// a†_p a_q on a determinant.
#[inline]
fn hop(b: u128, p: usize, q: usize) -> Option<(u128, f64)> {
    let (b1, s1) = annihilate(b, q)?;
    let (b2, s2) = create(b1, p)?;
    Some((b2, s1 * s2))
}

/// Excitation operator T = a†_{c0} a†_{c1} … a_{a1} a_{a0} on spin-orbital
/// (qubit) labels. The generator of the ansatz factor is T − T†.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Excitation {
    pub annihilate: Vec<usize>,
    pub create: Vec<usize>,
}

impl Excitation {
    fn masks(&self) -> (u128, u128) {
        let a = self.annihilate.iter().fold(0u128, |m, &p| m | 1u128 << p);
        let c = self.create.iter().fold(0u128, |m, &p| m | 1u128 << p);
        (a, c)
    }

    /// T|b⟩ as (b', sign), or None when T annihilates the determinant.
    pub fn apply(&self, b: u128) -> Option<(u128, f64)> {
        let mut state = b;
        let mut sign = 1.0;
        for &p in &self.annihilate {
            let (s, f) = annihilate(state, p)?;
            state = s;
            sign *= f;
        }
        for &p in self.create.iter().rev() {
            let (s, f) = create(state, p)?;
            state = s;
            sign *= f;
        }
        Some((state, sign))
    }

    pub fn is_double(&self) -> bool {
        self.annihilate.len() == 2
    }
}

/// Disentangled UCCSD ansatz over `n_orbitals` spatial orbitals.
#[derive(Debug, Clone)]
pub struct UccsdAnsatz {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    /// Hartree–Fock determinant: qubits 0..n_electrons occupied.
    pub reference: u128,
    pub excitations: Vec<Excitation>,
}

impl UccsdAnsatz {
    /// All S_z-conserving doubles (i<j occupied, a<b virtual) followed by all
    /// same-spin singles, each block in lexicographic order.
    pub fn new(n_orbitals: usize, n_electrons: usize) -> Result<Self> {
        let nq = 2 * n_orbitals;
        if nq > 128 {
            return Err(Error::ActiveSpace(format!("{n_orbitals} orbitals exceed the 64-orbital register")));
        }
        if n_electrons % 2 != 0 || n_electrons > nq {
            return Err(Error::ActiveSpace(format!(
                "{n_electrons} electrons cannot form a closed-shell reference in {n_orbitals} orbitals"
            )));
        }
        let occ: Vec<usize> = (0..n_electrons).collect();
        let virt: Vec<usize> = (n_electrons..nq).collect();
        let spin = |p: usize| p % 2;
        let mut excitations = Vec::new();
        for (x, &i) in occ.iter().enumerate() {
            for &j in &occ[x + 1..] {
                for (y, &a) in virt.iter().enumerate() {
                    for &b in &virt[y + 1..] {
                        if spin(i) + spin(j) == spin(a) + spin(b) {
                            excitations.push(Excitation {
                                annihilate: vec![i, j],
                                create: vec![a, b],
                            });
                        }
                    }
                }
            }
        }
        for &i in &occ {
            for &a in &virt {
                if spin(i) == spin(a) {
                    excitations.push(Excitation {
                        annihilate: vec![i],
                        create: vec![a],
                    });
                }
            }
        }
        let reference = if n_electrons == 128 { u128::MAX } else { (1u128 << n_electrons) - 1 };
        Ok(UccsdAnsatz {
            n_orbitals,
            n_electrons,
            reference,
            excitations,
        })
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_orbitals
    }

    pub fn n_parameters(&self) -> usize {
        self.excitations.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    pub n_qubits: usize,
    pub amplitudes: Vec<Complex64>,
}

impl Statevector {
    pub fn basis_state(n_qubits: usize, bits: u128) -> Self {
        assert!(n_qubits < usize::BITS as usize - 1, "register too large for a dense statevector");
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1usize << n_qubits];
        amplitudes[bits as usize] = Complex64::new(1.0, 0.0);
        Statevector { n_qubits, amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn with_global_phase(&self, phi: f64) -> Self {
        let ph = Complex64::from_polar(1.0, phi);
        Statevector {
            n_qubits: self.n_qubits,
            amplitudes: self.amplitudes.iter().map(|a| a * ph).collect(),
        }
    }

    /// Applies exp(θ (T − T†)) in place.
    pub fn apply_excitation(&mut self, ex: &Excitation, theta: f64) {
        let (am, cm) = ex.masks();
        let (s, c) = theta.sin_cos();
        for b in 0..self.amplitudes.len() {
            let bb = b as u128;
            if bb & am != am || bb & cm != 0 {
                continue;
            }
            if let Some((d, sign)) = ex.apply(bb) {
                let d = d as usize;
                let (x, y) = (self.amplitudes[b], self.amplitudes[d]);
                self.amplitudes[b] = x * c - y * (sign * s);
                self.amplitudes[d] = x * (sign * s) + y * c;
            }
        }
    }
}

/// |ψ(θ)⟩ = Π_k exp(θ_k (T_k − T_k†)) |HF⟩, first excitation applied first.
pub fn prepare_state(ansatz: &UccsdAnsatz, theta: &[f64]) -> Statevector {
    assert_eq!(theta.len(), ansatz.n_parameters(), "parameter count mismatch");
    let mut psi = Statevector::basis_state(ansatz.n_qubits(), ansatz.reference);
    for (ex, &t) in ansatz.excitations.iter().zip(theta) {
        if t != 0.0 {
            psi.apply_excitation(ex, t);
        }
    }
    psi
}

/// Exact ⟨ψ|H|ψ⟩ on the full register.
pub fn expectation(h: &PauliHamiltonian, psi: &Statevector) -> Result<f64> {
    if h.n_qubits != psi.n_qubits {
        return Err(Error::Config(format!(
            "Hamiltonian acts on {} qubits, state has {}",
            h.n_qubits, psi.n_qubits
        )));
    }
    let amps = &psi.amplitudes;
    let parts: Vec<Complex64> = h
        .terms
        .par_iter()
        .map(|t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (b, a) in amps.iter().enumerate() {
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let (d, ph) = t.word.apply(b as u128);
                acc += amps[d as usize].conj() * ph * a;
            }
            acc * t.coefficient
        })
        .collect();
    let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let total = parts.iter().fold(Complex64::new(h.identity * norm2, 0.0), |s, v| s + v);
    if total.im.abs() > 1e-10 {
        return Err(Error::NonHermitian(total.im));
    }
    Ok(total.re)
}

/// Spin-summed γ_pq = Σ_σ ⟨a†_{pσ} a_{qσ}⟩ over `n_orbitals` active orbitals.
/// The imaginary part, zero for the real ansatz up to a global phase, is dropped.
pub fn measure_1rdm(psi: &Statevector, n_orbitals: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n_orbitals, n_orbitals);
    for p in 0..n_orbitals {
        for q in 0..n_orbitals {
            let mut acc = Complex64::new(0.0, 0.0);
            for sigma in 0..2 {
                let (pp, qq) = (2 * p + sigma, 2 * q + sigma);
                for (b, a) in psi.amplitudes.iter().enumerate() {
                    if let Some((d, s)) = hop(b as u128, pp, qq) {
                        acc += psi.amplitudes[d as usize].conj() * a * s;
                    }
                }
            }
            g[(p, q)] = acc.re;
        }
    }
    g
}

/// Determinants with a fixed number of α and β electrons, sorted.
#[derive(Debug, Clone)]
pub struct Sector {
    pub n_qubits: usize,
    pub dets: Vec<u128>,
}

fn combinations(n: usize, k: usize) -> Vec<u64> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut v: u64 = (1u64 << k) - 1;
    let limit: u128 = 1u128 << n;
    while (v as u128) < limit {
        out.push(v);
        // Gosper's hack
        let c = v & v.wrapping_neg();
        let r = v + c;
        if r == 0 {
            break;
        }
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

fn interleave(alpha: u64, beta: u64) -> u128 {
    let mut b = 0u128;
    for p in 0..64 {
        b |= ((alpha >> p & 1) as u128) << (2 * p);
        b |= ((beta >> p & 1) as u128) << (2 * p + 1);
    }
    b
}

impl Sector {
    pub fn new(n_orbitals: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_orbitals > 64 {
            return Err(Error::ActiveSpace("more than 64 active orbitals".into()));
        }
        let a = combinations(n_orbitals, n_alpha);
        let b = combinations(n_orbitals, n_beta);
        if a.len().saturating_mul(b.len()) > MAX_SECTOR {
            return Err(Error::ActiveSpace(format!(
                "determinant space of {} exceeds the emulator limit",
                a.len() as u128 * b.len() as u128
            )));
        }
        let mut dets: Vec<u128> = a.iter().flat_map(|&x| b.iter().map(move |&y| interleave(x, y))).collect();
        dets.sort_unstable();
        Ok(Sector {
            n_qubits: 2 * n_orbitals,
            dets,
        })
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn index(&self, det: u128) -> Option<usize> {
        self.dets.binary_search(&det).ok()
    }

    /// Embeds sector amplitudes into the full register.
    pub fn to_statevector(&self, psi: &[f64]) -> Statevector {
        let mut sv = Statevector {
            n_qubits: self.n_qubits,
            amplitudes: vec![Complex64::new(0.0, 0.0); 1usize << self.n_qubits],
        };
        for (&d, &a) in self.dets.iter().zip(psi) {
            sv.amplitudes[d as usize] = Complex64::new(a, 0.0);
        }
        sv
    }

    /// Spin-summed 1-RDM of a real sector state.
    pub fn rdm1(&self, psi: &[f64], n_orbitals: usize) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(n_orbitals, n_orbitals);
        for (i, &d) in self.dets.iter().enumerate() {
            let a = psi[i];
            if a == 0.0 {
                continue;
            }
            for p in 0..n_orbitals {
                for q in 0..n_orbitals {
                    for sigma in 0..2 {
                        if let Some((e, s)) = hop(d, 2 * p + sigma, 2 * q + sigma) {
                            if let Some(j) = self.index(e) {
                                g[(p, q)] += psi[j] * a * s;
                            }
                        }
                    }
                }
            }
        }
        g
    }
}

/// Real symmetric Hamiltonian restricted to a sector, in CSR form.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub constant: f64,
    indptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SectorOperator {
    pub fn new(h: &PauliHamiltonian, sector: &Sector) -> Result<Self> {
        if h.n_qubits != sector.n_qubits {
            return Err(Error::Config(format!(
                "Hamiltonian acts on {} qubits, sector on {}",
                h.n_qubits, sector.n_qubits
            )));
        }
        // terms sharing an X mask map a determinant to the same partner
        let mut groups: BTreeMap<u128, Vec<(u128, Complex64)>> = BTreeMap::new();
        for t in &h.terms {
            let w = t.word;
            let ph = match (w.x & w.z).count_ones() % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            };
            groups.entry(w.x).or_default().push((w.z, ph * t.coefficient));
        }
        let groups: Vec<(u128, Vec<(u128, Complex64)>)> = groups.into_iter().collect();
        let rows: Vec<Result<Vec<(u32, f64)>>> = sector
            .dets
            .par_iter()
            .map(|&b| {
                let mut row = Vec::new();
                for (x, terms) in &groups {
                    let Some(j) = sector.index(b ^ x) else { continue };
                    let mut v = Complex64::new(0.0, 0.0);
                    for (z, c) in terms {
                        if (z & b).count_ones() % 2 == 0 {
                            v += c;
                        } else {
                            v -= c;
                        }
                    }
                    if v.im.abs() > 1e-10 {
                        return Err(Error::NonHermitian(v.im));
                    }
                    if v.re != 0.0 {
                        // element <b^x|H|b>; H is symmetric so it also sits in row b
                        row.push((j as u32, v.re));
                    }
                }
                row.sort_unstable_by_key(|e| e.0);
                Ok(row)
            })
            .collect();
        let mut indptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in rows {
            for (c, v) in r? {
                cols.push(c);
                vals.push(v);
            }
            indptr.push(cols.len());
        }
        Ok(SectorOperator {
            constant: h.identity,
            indptr,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.indptr.len() - 1
    }

    /// y = (H − constant) x.
    pub fn apply_traceless(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = acc;
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_traceless(x, &mut y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += self.constant * xi;
        }
        y
    }

    pub fn expectation(&self, x: &[f64]) -> f64 {
        let hx = self.apply(x);
        dot(x, &hx) / dot(x, x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::identity(n, n) * self.constant;
        for i in 0..n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.cols[k] as usize)] += self.vals[k];
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Closed-shell sector with n/2 electrons of each spin.
pub fn closed_shell_sector(n_orbitals: usize, n_electrons: usize) -> Result<Sector> {
    if n_electrons % 2 != 0 {
        return Err(Error::ActiveSpace(format!("odd active electron count {n_electrons}")));
    }
    Sector::new(n_orbitals, n_electrons / 2, n_electrons / 2)
}

/// Real-arithmetic UCCSD evaluator on the closed-shell sector.
pub struct SectorEngine {
    pub sector: Sector,
    pub operator: SectorOperator,
    reference: usize,
    n_orbitals: usize,
    /// Per excitation: (index of D, index of T·D, sign).
    pairs: Vec<Vec<(u32, u32, f64)>>,
}

impl SectorEngine {
    pub fn new(h: &PauliHamiltonian, ansatz: &UccsdAnsatz) -> Result<Self> {
        if h.n_qubits != ansatz.n_qubits() {
            return Err(Error::Config(format!(
                "Hamiltonian acts on {} qubits, ansatz on {}",
                h.n_qubits,
                ansatz.n_qubits()
            )));
        }
        let sector = closed_shell_sector(ansatz.n_orbitals, ansatz.n_electrons)?;
        let operator = SectorOperator::new(h, &sector)?;
        let reference = sector
            .index(ansatz.reference)
            .ok_or_else(|| Error::ActiveSpace("reference determinant outside the sector".into()))?;
        let pairs = ansatz
            .excitations
            .par_iter()
            .map(|ex| {
                let (am, cm) = ex.masks();
                sector
                    .dets
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d & am == am && d & cm == 0)
                    .filter_map(|(i, &d)| {
                        let (e, s) = ex.apply(d)?;
                        let j = sector.index(e)?;
                        Some((i as u32, j as u32, s))
                    })
                    .collect()
            })
            .collect();
        Ok(SectorEngine {
            sector,
            operator,
            reference,
            n_orbitals: ansatz.n_orbitals,
            pairs,
        })
    }

    pub fn n_parameters(&self) -> usize {
        self.pairs.len()
    }

    fn rotate(&self, k: usize, theta: f64, psi: &mut [f64]) {
        let (s, c) = theta.sin_cos();
        for &(i, j, sign) in &self.pairs[k] {
            let (x, y) = (psi[i as usize], psi[j as usize]);
            psi[i as usize] = c * x - sign * s * y;
            psi[j as usize] = sign * s * x + c * y;
        }
    }

    pub fn state(&self, theta: &[f64]) -> Vec<f64> {
        let mut psi = vec![0.0; self.sector.len()];
        psi[self.reference] = 1.0;
        for (k, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                self.rotate(k, t, &mut psi);
            }
        }
        psi
    }

    pub fn energy(&self, theta: &[f64]) -> f64 {
        let psi = self.state(theta);
        dot(&psi, &self.operator.apply(&psi))
    }

    pub fn reference_energy(&self) -> f64 {
        self.energy(&vec![0.0; self.n_parameters()])
    }

    /// Energy and its gradient by back-propagating through the product.
    pub fn energy_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let mut psi = self.state(theta);
        let mut lam = self.operator.apply(&psi);
        let e = dot(&psi, &lam);
        let mut grad = vec![0.0; theta.len()];
        for k in (0..theta.len()).rev() {
            // 2 <λ|G_k ψ>, with G|D> = s|D'> and G|D'> = -s|D>
            let mut acc = 0.0;
            for &(i, j, s) in &self.pairs[k] {
                let (i, j) = (i as usize, j as usize);
                acc += s * (lam[j] * psi[i] - lam[i] * psi[j]);
            }
            grad[k] = 2.0 * acc;
            if theta[k] != 0.0 {
                self.rotate(k, -theta[k], &mut psi);
                self.rotate(k, -theta[k], &mut lam);
            }
        }
        (e, grad)
    }

    pub fn rdm1(&self, theta: &[f64]) -> DMatrix<f64> {
        self.sector.rdm1(&self.state(theta), self.n_orbitals)
    }
}

#[derive(Debug, Clone)]
pub struct VqeOptions {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for VqeOptions {
    fn default() -> Self {
        VqeOptions {
            gradient_tolerance: 1e-6,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VqeResult {
    pub theta: Vec<f64>,
    pub energy: f64,
    pub reference_energy: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Energy after each accepted optimizer step.
    pub history: Vec<f64>,
    /// Spin-summed active-space 1-RDM of the optimized state.
    pub rdm1: DMatrix<f64>,
}

impl VqeResult {
    /// Plain-text dump of parameters, energy and 1-RDM.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("energy {:.15e}\n", self.energy));
        s.push_str(&format!("reference_energy {:.15e}\n", self.reference_energy));
        s.push_str(&format!("gradient_norm {:.6e}\n", self.gradient_norm));
        s.push_str(&format!("converged {}\n", self.converged));
        s.push_str(&format!("iterations {}\n", self.iterations));
        s.push_str(&format!("theta {}\n", self.theta.len()));
        for t in &self.theta {
            s.push_str(&format!("{t:.17e}\n"));
        }
        let n = self.rdm1.nrows();
        s.push_str(&format!("rdm1 {n}\n"));
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:.17e}", self.rdm1[(i, j)])).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Minimizes ⟨ψ(θ)|H|ψ(θ)⟩ from `initial` (θ = 0 when absent).
pub fn optimize(
    h: &PauliHamiltonian,
    ansatz: &UccsdAnsatz,
    initial: Option<&[f64]>,
    opts: &VqeOptions,
) -> Result<VqeResult> {
    let engine = SectorEngine::new(h, ansatz)?;
    optimize_with(&engine, initial, opts)
}

pub fn optimize_with(engine: &SectorEngine, initial: Option<&[f64]>, opts: &VqeOptions) -> Result<VqeResult> {
    let n = engine.n_parameters();
    let zero = vec![0.0; n];
    let start = match initial {
        Some(t) if t.len() == n => t.to_vec(),
        Some(t) => {
            return Err(Error::Config(format!("initial parameters have length {}, ansatz has {n}", t.len())));
        }
        None => zero.clone(),
    };
    if start.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("initial VQE parameters".into()));
    }
    let reference_energy = engine.reference_energy();
    let bopts = BfgsOptions {
        gradient_tolerance: opts.gradient_tolerance,
        max_iterations: opts.max_iterations,
        ..BfgsOptions::default()
    };
    let f = |t: &[f64]| engine.energy_and_gradient(t);
    let mut out = bfgs(&start, f, &bopts);
    // a warm start may sit in a worse basin than the reference determinant
    if out.value > reference_energy + 1e-12 && initial.is_some() {
        let cold = bfgs(&zero, f, &bopts);
        if cold.value < out.value {
            out = cold;
        }
    }
    if !out.value.is_finite() {
        return Err(Error::NonFinite("VQE energy".into()));
    }
    let gradient_norm = out.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if !out.converged {
        log::warn!(
            "VQE stopped after {} iterations with gradient norm {gradient_norm:.3e}",
            out.iterations
        );
    }
    let rdm1 = engine.rdm1(&out.x);
    Ok(VqeResult {
        energy: out.value,
        theta: out.x,
        reference_energy,
        gradient_norm,
        converged: out.converged,
        iterations: out.iterations,
        evaluations: out.evaluations,
        history: out.history,
        rdm1,
    })
}

#[derive(Debug, Clone)]
pub struct ExactGroundState {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub rdm1: DMatrix<f64>,
}

/// Lowest eigenpair of H in the closed-shell sector with `n_electrons`.
pub fn exact_ground_state(h: &PauliHamiltonian, n_orbitals: usize, n_electrons: usize) -> Result<ExactGroundState> {
    let sector = closed_shell_sector(n_orbitals, n_electrons)?;
    let op = SectorOperator::new(h, &sector)?;
    let (energy, vector) = if sector.len() <= DENSE_LIMIT {
        let (vals, vecs) = crate::linalg::eigh(&op.to_dense());
        (vals[0], vecs.column(0).iter().copied().collect())
    } else {
        lanczos_lowest(&op, 1e-10)?
    };
    let rdm1 = sector.rdm1(&vector, n_orbitals);
    Ok(ExactGroundState { energy, vector, rdm1 })
}

/// Restarted Lanczos with full reorthogonalization.
fn lanczos_lowest(op: &SectorOperator, tol: f64) -> Result<(f64, Vec<f64>)> {
    let n = op.dim();
    let krylov = 120.min(n);
    // deterministic, non-symmetric start vector
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i as f64 + 1.0) * 0.754_877_666).fract()).collect();
    let mut best = (f64::INFINITY, v.clone());
    for _restart in 0..200 {
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let mut basis: Vec<Vec<f64>> = vec![v.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for k in 0..krylov {
            let mut w = op.apply(&basis[k]);
            alpha.push(dot(&w, &basis[k]));
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nb = dot(&w, &w).sqrt();
            if k + 1 == krylov || nb < 1e-14 {
                break;
            }
            beta.push(nb);
            w.iter_mut().for_each(|x| *x /= nb);
            basis.push(w);
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let (vals, vecs) = crate::linalg::eigh(&t);
        let mut x = vec![0.0; n];
        for (k, b) in basis.iter().enumerate() {
            let c = vecs[(k, 0)];
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
        }
        let nx = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|xi| *xi /= nx);
        let hx = op.apply(&x);
        let e = dot(&x, &hx);
        let res = hx.iter().zip(&x).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
        best = (vals[0].min(e), x.clone());
        if res < tol {
            return Ok((e, x));
        }
        v = x;
    }
    let hx = op.apply(&best.1);
    let e = dot(&best.1, &hx);
    let res = hx.iter().zip(&best.1).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
    Err(Error::NonFinite(format!("Lanczos ground state (residual {res:.3e})")))
}

/// Natural occupations of a spin-summed 1-RDM, descending.
pub fn natural_occupations(gamma: &DMatrix<f64>) -> Vec<f64> {
    let sym = (gamma + gamma.transpose()) * 0.5;
    let (vals, _) = crate::linalg::eigh(&sym);
    let mut v: Vec<f64> = vals.iter().copied().collect();
    v.reverse();
    v
}

/// Sector state as a dense vector (for oracles and diagnostics).
pub fn sector_vector(engine: &SectorEngine, theta: &[f64]) -> DVector<f64> {
    DVector::from_vec(engine.state(theta))
}
