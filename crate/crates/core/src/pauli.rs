//! Pauli-string Hamiltonians and the Jordan-Wigner mapping.
//!
//! Spin orbitals are interleaved: spatial orbital `p` with spin `s` (alpha =
//! 0, beta = 1) is qubit `2p + s`. An occupied spin orbital is `|1>`, so
//! `a+_j = Z_0 .. Z_{j-1} (X_j - i Y_j) / 2` and `n_j = (I - Z_j) / 2`.
//! Basis-state index bit `k` is qubit `k`; in word strings qubit 0 is the
//! leftmost character.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::ActiveSpaceHamiltonian;

/// Coefficients below this magnitude are dropped after merging.
pub const PRUNE: f64 = 1e-12;

/// Pauli word as X and Z bit masks; a qubit with both bits set carries Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliWord {
    pub x: u128,
    pub z: u128,
}

impl PauliWord {
    pub const IDENTITY: PauliWord = PauliWord { x: 0, z: 0 };

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn single(q: usize, op: char) -> Self {
        let b = 1u128 << q;
        match op {
            'X' => PauliWord { x: b, z: 0 },
            'Y' => PauliWord { x: b, z: b },
            'Z' => PauliWord { x: 0, z: b },
            _ => PauliWord::IDENTITY,
        }
    }

    pub fn op(&self, q: usize) -> char {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        }
    }

    pub fn to_string(&self, n_qubits: usize) -> String {
        (0..n_qubits).map(|q| self.op(q)).collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.len() > 128 {
            return Err(Error::Parse("Pauli words are limited to 128 qubits".into()));
        }
        let mut w = PauliWord::IDENTITY;
        for (q, ch) in s.chars().enumerate() {
            match ch {
                'I' => {}
                'X' | 'Y' | 'Z' => {
                    let s = PauliWord::single(q, ch);
                    w.x |= s.x;
                    w.z |= s.z;
                }
                _ => return Err(Error::Parse(format!("bad Pauli character '{ch}'"))),
            }
        }
        Ok(w)
    }

    /// `P |b> = phase |b ^ x>`.
    #[inline]
    pub fn apply(&self, b: u128) -> (u128, Complex64) {
        let ny = (self.x & self.z).count_ones();
        let mut phase = match ny % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        if (self.z & b).count_ones() % 2 == 1 {
            phase = -phase;
        }
        (b ^ self.x, phase)
    }

    /// Sort key with I < X < Y < Z on qubit 0 first.
    fn sort_key(&self, n_qubits: usize) -> Vec<u8> {
        (0..n_qubits)
            .map(|q| match self.op(q) {
                'I' => 0,
                'X' => 1,
                'Y' => 2,
                _ => 3,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub word: PauliWord,
}

/// `identity * I + sum_l h_l P_l` with unique, canonically sorted words.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliHamiltonian {
    pub n_qubits: usize,
    pub identity: f64,
    pub terms: Vec<PauliTerm>,
}

impl PauliHamiltonian {
    /// Merges duplicate words, moves the identity aside, prunes and sorts.
    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = (PauliWord, f64)>) -> Self {
        let mut map: HashMap<PauliWord, f64> = HashMap::new();
        let mut order = Vec::new();
        for (w, c) in terms {
            let e = map.entry(w).or_insert_with(|| {
                order.push(w);
                0.0
            });
            *e += c;
        }
        Self::finish(n_qubits, order.into_iter().map(|w| (w, map[&w])))
    }

    fn finish(n_qubits: usize, merged: impl Iterator<Item = (PauliWord, f64)>) -> Self {
        let mut identity = 0.0;
        let mut terms = Vec::new();
        for (w, c) in merged {
            if w.is_identity() {
                identity += c;
            } else if c.abs() >= PRUNE {
                terms.push(PauliTerm { coefficient: c, word: w });
            }
        }
        terms.sort_by_cached_key(|t| t.word.sort_key(n_qubits));
        PauliHamiltonian {
            n_qubits,
            identity,
            terms,
        }
    }

    /// Sum of |h_l| over non-identity words.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, word: &PauliWord) -> f64 {
        if word.is_identity() {
            return self.identity;
        }
        self.terms
            .iter()
            .find(|t| t.word == *word)
            .map_or(0.0, |t| t.coefficient)
    }

    /// One term per line, `+x.xxxxxxxxxxxx  WORD`; the identity line is
    /// flagged with a trailing `# identity`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:+.12}  {}  # identity",
            self.identity,
            PauliWord::IDENTITY.to_string(self.n_qubits)
        );
        for t in &self.terms {
            let _ = writeln!(s, "{:+.12}  {}", t.coefficient, t.word.to_string(self.n_qubits));
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut n_qubits = None;
        let mut terms = Vec::new();
        for line in text.lines() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut f = body.split_whitespace();
            let (Some(c), Some(w), None) = (f.next(), f.next(), f.next()) else {
                return Err(Error::Parse(format!("bad Pauli line '{line}'")));
            };
            let c: f64 = c.parse().map_err(|_| Error::Parse(format!("bad coefficient in '{line}'")))?;
            match n_qubits {
                None => n_qubits = Some(w.len()),
                Some(n) if n != w.len() => return Err(Error::Parse("inconsistent word lengths".into())),
                _ => {}
            }
            terms.push((PauliWord::parse(w)?, c));
        }
        Ok(Self::from_terms(n_qubits.unwrap_or(0), terms))
    }

    /// Adds a constant to the identity coefficient.
    pub fn shifted(&self, c: f64) -> Self {
        let mut h = self.clone();
        h.identity += c;
        h
    }
}

/// JW image of a ladder operator as two X^x Z^z products with coefficients.
#[derive(Clone, Copy)]
struct Ladder {
    /// (x, z, coefficient) in X^x Z^z form (no Y bookkeeping yet)
    parts: [(u128, u128, f64); 2],
}

fn creation(j: usize) -> Ladder {
    // (X - iY)/2 = (X + XZ)/2 in X^x Z^z form since Y = i X Z
    let below = (1u128 << j) - 1;
    let b = 1u128 << j;
    Ladder {
        parts: [(b, below, 0.5), (b, below | b, 0.5)],
    }
}

fn annihilation(j: usize) -> Ladder {
    // (X + iY)/2 = (X - XZ)/2
    let below = (1u128 << j) - 1;
    let b = 1u128 << j;
    Ladder {
        parts: [(b, below, 0.5), (b, below | b, -0.5)],
    }
}

/// Accumulates `weight * Re(product of ladders)` as Pauli words.
fn add_real_product(ops: &[Ladder], weight: f64, acc: &mut HashMap<PauliWord, f64>, order: &mut Vec<PauliWord>) {
    let k = ops.len();
    for mask in 0..(1usize << k) {
        let (mut x, mut z, mut c) = (0u128, 0u128, weight);
        for (i, op) in ops.iter().enumerate() {
            let (x2, z2, c2) = op.parts[(mask >> i) & 1];
            // X^x Z^z X^x2 Z^z2 = (-1)^{|z & x2|} X^{x^x2} Z^{z^z2}
            if (z & x2).count_ones() % 2 == 1 {
                c = -c;
            }
            x ^= x2;
            z ^= z2;
            c *= c2;
        }
        // X^x Z^z = (-i)^{|x & z|} * word with Y on the overlap
        let ny = (x & z).count_ones() % 4;
        let re = match ny {
            0 => c,
            2 => -c,
            _ => 0.0, // purely imaginary, cancels against the hermitian partner
        };
        if re != 0.0 {
            let w = PauliWord { x, z };
            let e = acc.entry(w).or_insert_with(|| {
                order.push(w);
                0.0
            });
            *e += re;
        }
    }
}

/// Jordan-Wigner transform of a real active-space Hamiltonian.
pub fn jordan_wigner(h: &ActiveSpaceHamiltonian) -> PauliHamiltonian {
    let n = h.n_orbitals;
    let nq = 2 * n;
    assert!(nq <= 128, "at most 64 spatial orbitals");
    let mut acc: HashMap<PauliWord, f64> = HashMap::new();
    let mut order = Vec::new();
    acc.insert(PauliWord::IDENTITY, h.constant);
    order.push(PauliWord::IDENTITY);

    let cre: Vec<Ladder> = (0..nq).map(creation).collect();
    let ann: Vec<Ladder> = (0..nq).map(annihilation).collect();
    let spatial = |j: usize| j / 2;
    let spin = |j: usize| j % 2;

    // one-body: sum_PQ h a+_P a_Q, hermitian pairs folded together
    for p in 0..nq {
        for q in p..nq {
            if spin(p) != spin(q) {
                continue;
            }
            let v = h.one_body[(spatial(p), spatial(q))];
            if v == 0.0 {
                continue;
            }
            let w = if p == q { v } else { 2.0 * v };
            add_real_product(&[cre[p], ann[q]], w, &mut acc, &mut order);
        }
    }

    // two-body: 1/2 sum (pq|rs) a+_P a+_R a_S a_Q, gathered on ordered pairs
    // (P < R) and (S < Q) so each distinct operator is expanded once
    let pair = |a: usize, b: usize| a * nq + b;
    let mut w2: HashMap<(usize, usize), f64> = HashMap::new();
    let mut w2_order = Vec::new();
    for pp in 0..nq {
        for rr in 0..nq {
            if pp == rr {
                continue;
            }
            for ss in 0..nq {
                if spin(ss) != spin(rr) {
                    continue;
                }
                for qq in 0..nq {
                    if qq == ss || spin(qq) != spin(pp) {
                        continue;
                    }
                    let v = 0.5 * h.g(spatial(pp), spatial(qq), spatial(rr), spatial(ss));
                    if v == 0.0 {
                        continue;
                    }
                    // a+_pp a+_rr a_ss a_qq -> a+_A a+_B a_C a_D with A < B, C < D
                    let mut sign = 1.0;
                    let (a, b) = if pp < rr { (pp, rr) } else { sign = -sign; (rr, pp) };
                    let (c, d) = if ss < qq { (ss, qq) } else { sign = -sign; (qq, ss) };
                    let key = (pair(a, b), pair(c, d));
                    let e = w2.entry(key).or_insert_with(|| {
                        w2_order.push(key);
                        0.0
                    });
                    *e += sign * v;
                }
            }
        }
    }
    for key in &w2_order {
        let (ab, cd) = *key;
        if ab < cd {
            continue; // folded into the hermitian partner
        }
        let v = w2[key];
        let w = if ab == cd { v } else { v + w2.get(&(cd, ab)).copied().unwrap_or(0.0) };
        if w == 0.0 {
            continue;
        }
        let (a, b, c, d) = (ab / nq, ab % nq, cd / nq, cd % nq);
        add_real_product(&[cre[a], cre[b], ann[c], ann[d]], w, &mut acc, &mut order);
    }
    PauliHamiltonian::finish(nq, order.into_iter().map(|w| (w, acc[&w])))
}

/// JW image of the total number operator.
pub fn number_operator(n_qubits: usize) -> PauliHamiltonian {
    let terms = (0..n_qubits).map(|q| (PauliWord::single(q, 'Z'), -0.5));
    PauliHamiltonian::from_terms(n_qubits, terms).shifted(0.5 * n_qubits as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use nalgebra::DMatrix;

    /// Dense matrix of a Pauli Hamiltonian, built independently of `apply`
    /// from Kronecker products of 2x2 matrices.
    pub fn dense_matrix(h: &PauliHamiltonian) -> DMatrix<Complex64> {
        let n = h.n_qubits;
        let dim = 1usize << n;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let single = |c: char| match c {
            'I' => DMatrix::from_row_slice(2, 2, &[one, zero, zero, one]),
            'X' => DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]),
            'Y' => DMatrix::from_row_slice(2, 2, &[zero, -i, i, zero]),
            _ => DMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]),
        };
        let mut m = DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(h.identity, 0.0);
        for t in &h.terms {
            // qubit k is bit k: kron with the highest qubit outermost
            let mut p = DMatrix::from_element(1, 1, one);
            for q in (0..n).rev() {
                p = p.kronecker(&single(t.word.op(q)));
            }
            m += p * Complex64::new(t.coefficient, 0.0);
        }
        m
    }

    pub fn real_spectrum(m: &DMatrix<Complex64>) -> Vec<f64> {
        // hermitian complex -> real symmetric of twice the size
        let n = m.nrows();
        let big = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let (a, b) = (r % n, c % n);
            let z = m[(a, b)];
            match (r < n, c < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let (vals, _) = crate::linalg::eigh(&big);
        // each eigenvalue appears twice
        vals.iter().step_by(2).copied().collect()
    }

    pub fn random_hamiltonian(n: usize, ne: usize, seed: u64) -> ActiveSpaceHamiltonian {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let h1 = &a + a.transpose();
        let mut g = vec![0.0; n.pow(4)];
        // 8-fold symmetric random tensor, positive-ish diagonal
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                            continue;
                        }
                        let v: f64 = rng.gen_range(-0.3..0.3) + if p == q && r == s { 0.6 } else { 0.0 };
                        for (a, b, c, d) in [
                            (p, q, r, s),
                            (q, p, r, s),
                            (p, q, s, r),
                            (q, p, s, r),
                            (r, s, p, q),
                            (s, r, p, q),
                            (r, s, q, p),
                            (s, r, q, p),
                        ] {
                            g[((a * n + b) * n + c) * n + d] = v;
                        }
                    }
                }
            }
        }
        ActiveSpaceHamiltonian {
            constant: rng.gen_range(-2.0..2.0),
            one_body: h1,
            two_body: g,
            n_orbitals: n,
            n_electrons: ne,
        }
    }

    /// Determinant-basis Hamiltonian by Slater-Condon rules on occupation
    /// bitstrings (same interleaved spin-orbital labels), fully independent
    /// of the Pauli machinery.
    pub fn fermionic_matrix(h: &ActiveSpaceHamiltonian) -> DMatrix<f64> {
        let nq = 2 * h.n_orbitals;
        let dim = 1usize << nq;
        let mut m = DMatrix::zeros(dim, dim);
        // apply a_j: returns sign and new state
        let ann = |j: usize, s: usize| -> Option<(f64, usize)> {
            if s >> j & 1 == 0 {
                return None;
            }
            let sign = if (s & ((1 << j) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            Some((sign, s ^ (1 << j)))
        };
        let cre = |j: usize, s: usize| -> Option<(f64, usize)> {
            if s >> j & 1 == 1 {
                return None;
            }
            let sign = if (s & ((1 << j) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            Some((sign, s | (1 << j)))
        };
        for s in 0..dim {
            m[(s, s)] += h.constant;
            for p in 0..nq {
                for q in 0..nq {
                    if p % 2 != q % 2 {
                        continue;
                    }
                    let v = h.one_body[(p / 2, q / 2)];
                    if let Some((s1, t1)) = ann(q, s) {
                        if let Some((s2, t2)) = cre(p, t1) {
                            m[(t2, s)] += v * s1 * s2;
                        }
                    }
                }
            }
            for p in 0..nq {
                for q in 0..nq {
                    for r in 0..nq {
                        for t in 0..nq {
                            if p % 2 != q % 2 || r % 2 != t % 2 {
                                continue;
                            }
                            let v = 0.5 * h.g(p / 2, q / 2, r / 2, t / 2);
                            // a+_p a+_r a_t a_q
                            let Some((s1, x1)) = ann(q, s) else { continue };
                            let Some((s2, x2)) = ann(t, x1) else { continue };
                            let Some((s3, x3)) = cre(r, x2) else { continue };
                            let Some((s4, x4)) = cre(p, x3) else { continue };
                            m[(x4, s)] += v * s1 * s2 * s3 * s4;
                        }
                    }
                }
            }
        }
        m
    }

    fn sector_spectrum(m: &DMatrix<f64>, nq: usize, ne: usize) -> Vec<f64> {
        let idx: Vec<usize> = (0..1usize << nq).filter(|s| s.count_ones() as usize == ne).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]);
        crate::linalg::eigh(&sub).0.iter().copied().collect()
    }

    #[test]
    fn single_orbital_number_operator() {
        let h = ActiveSpaceHamiltonian {
            constant: 0.0,
            one_body: DMatrix::from_element(1, 1, 0.8),
            two_body: vec![0.0],
            n_orbitals: 1,
            n_electrons: 1,
        };
        let p = jordan_wigner(&h);
        assert_eq!(p.n_qubits, 2);
        assert!((p.identity - 0.8).abs() < 1e-15);
        assert_eq!(p.len(), 2);
        assert_eq!(p.terms[0].word.to_string(2), "IZ");
        assert_eq!(p.terms[1].word.to_string(2), "ZI");
        assert!((p.terms[0].coefficient + 0.4).abs() < 1e-15);
        assert!((p.terms[1].coefficient + 0.4).abs() < 1e-15);
    }

    #[test]
    fn l1_norm_excludes_identity() {
        let p = PauliHamiltonian::from_terms(
            2,
            [(PauliWord::IDENTITY, 3.0), (PauliWord::single(0, 'Z'), 0.5)],
        );
        assert_eq!(p.l1_norm(), 0.5);
        assert_eq!(p.identity, 3.0);
    }

    #[test]
    fn pauli_text_round_trip() {
        let h = random_hamiltonian(3, 2, 5);
        let p = jordan_wigner(&h);
        let back = PauliHamiltonian::parse_text(&p.to_text()).unwrap();
        assert_eq!(back.len(), p.len());
        for (a, b) in back.terms.iter().zip(&p.terms) {
            assert_eq!(a.word, b.word);
            assert!((a.coefficient - b.coefficient).abs() < 1e-12);
        }
        assert!(p.to_text().lines().next().unwrap().ends_with("# identity"));
    }

    #[test]
    fn apply_matches_dense_matrix() {
        let w = PauliWord::parse("XYZIY").unwrap();
        let h = PauliHamiltonian::from_terms(5, [(w, 1.0)]);
        let m = dense_matrix(&h);
        for b in 0..32u128 {
            let (t, ph) = w.apply(b);
            assert!((m[(t as usize, b as usize)] - ph).norm() < 1e-15);
        }
    }

    #[test]
    fn jw_spectrum_matches_determinant_oracle() {
        for (n, seed) in [(1usize, 1u64), (2, 2), (3, 3)] {
            let h = random_hamiltonian(n, 2, seed);
            let p = jordan_wigner(&h);
            let pm = dense_matrix(&p);
            assert!((&pm - pm.adjoint()).iter().all(|z| z.norm() == 0.0));
            let fm = fermionic_matrix(&h);
            let a = real_spectrum(&pm);
            let b = crate::linalg::eigh(&fm).0;
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-10, "{x} {y}");
            }
            // and sector by sector
            let real = pm.map(|z| z.re);
            for ne in 0..=2 * n {
                let s1 = sector_spectrum(&real, 2 * n, ne);
                let s2 = sector_spectrum(&fm, 2 * n, ne);
                for (x, y) in s1.iter().zip(&s2) {
                    assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn number_operator_commutes() {
        let h = random_hamiltonian(3, 2, 11);
        let p = dense_matrix(&jordan_wigner(&h));
        let nn = dense_matrix(&number_operator(6));
        let c = &p * &nn - &nn * &p;
        assert!(c.iter().all(|z| z.norm() < 1e-10));
        // number operator is diagonal with popcounts
        for b in 0..64usize {
            assert!((nn[(b, b)].re - b.count_ones() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn l1_norm_is_order_independent() {
        let h = random_hamiltonian(3, 2, 9);
        let p = jordan_wigner(&h);
        let mut terms: Vec<(PauliWord, f64)> = p.terms.iter().map(|t| (t.word, t.coefficient)).collect();
        terms.reverse();
        let q = PauliHamiltonian::from_terms(6, terms);
        assert_eq!(p.l1_norm(), q.l1_norm());
    }
}
