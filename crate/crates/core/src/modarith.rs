//! Exact linear algebra over the local rings `Z/p^e`.
//!
//! Submodules of `(Z/p^e)^n` are kept in Howell normal form, which is a
//! canonical generating set even in the presence of zero divisors. Everything
//! here is a pure function of immutable values.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModArithError {
    #[error("{0} is not a prime")]
    NotPrime(u32),
    #[error("level must be at least 1")]
    ZeroLevel,
    #[error("modulus {p}^{e} is too large")]
    ModulusTooLarge { p: u32, e: u32 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ring mismatch between operands")]
    RingMismatch,
    #[error("submodule is not contained in the ambient module")]
    NotContained,
}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// The ring `Z/p^e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RingRepr", into = "RingRepr")]
pub struct RingSpec {
    p: u32,
    e: u32,
    modulus: u32,
}

#[derive(Serialize, Deserialize)]
struct RingRepr {
    p: u32,
    e: u32,
}

impl TryFrom<RingRepr> for RingSpec {
    type Error = ModArithError;
    fn try_from(r: RingRepr) -> Result<Self, Self::Error> {
        RingSpec::new(r.p, r.e)
    }
}

impl From<RingSpec> for RingRepr {
    fn from(r: RingSpec) -> Self {
        RingRepr { p: r.p, e: r.e }
    }
}

impl fmt::Display for RingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.e == 1 {
            write!(f, "Z/{}", self.p)
        } else {
            write!(f, "Z/{}^{}", self.p, self.e)
        }
    }
}

impl RingSpec {
    pub fn new(p: u32, e: u32) -> Result<Self, ModArithError> {
        if !is_prime(p) {
            return Err(ModArithError::NotPrime(p));
        }
        if e == 0 {
            return Err(ModArithError::ZeroLevel);
        }
        let mut m: u64 = 1;
        for _ in 0..e {
            m *= p as u64;
            if m > (1 << 20) {
                return Err(ModArithError::ModulusTooLarge { p, e });
            }
        }
        Ok(RingSpec { p, e, modulus: m as u32 })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// Same prime, different level.
    pub fn with_level(&self, e: u32) -> RingSpec {
        RingSpec::new(self.p, e).expect("prime already validated")
    }

    #[inline]
    pub fn reduce(&self, x: i64) -> u32 {
        x.rem_euclid(self.modulus as i64) as u32
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.modulus - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.modulus as u64) as u32
    }

    pub fn pow(&self, a: u32, mut k: u64) -> u32 {
        let mut base = a % self.modulus;
        let mut acc = 1 % self.modulus;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    /// `p^k` as a residue (zero once `k >= e`).
    pub fn p_pow(&self, k: u32) -> u32 {
        if k >= self.e {
            0
        } else {
            self.p.pow(k)
        }
    }

    /// p-adic valuation of a residue; zero has valuation `e`.
    pub fn valuation(&self, a: u32) -> u32 {
        let mut a = a % self.modulus;
        if a == 0 {
            return self.e;
        }
        let mut v = 0;
        while a % self.p == 0 {
            a /= self.p;
            v += 1;
        }
        v
    }

    pub fn is_unit(&self, a: u32) -> bool {
        a % self.p != 0
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        if !self.is_unit(a) {
            return None;
        }
        let (mut old_r, mut r) = (a as i64, self.modulus as i64);
        let (mut old_s, mut s) = (1i64, 0i64);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        Some(self.reduce(old_s))
    }

    /// Number of units of the ring.
    pub fn unit_count(&self) -> u32 {
        self.modulus / self.p * (self.p - 1)
    }

    /// A generator of the unit group when it is cyclic (always for odd p,
    /// and for `Z/2`, `Z/4`).
    pub fn unit_generator(&self) -> Option<u32> {
        let n = self.unit_count() as u64;
        'cand: for g in 1..self.modulus {
            if !self.is_unit(g) {
                continue;
            }
            let mut x = 1u32;
            for k in 1..=n {
                x = self.mul(x, g);
                if x == 1 {
                    if k == n {
                        return Some(g);
                    }
                    continue 'cand;
                }
            }
        }
        None
    }

    pub fn dot(&self, a: &[u32], b: &[u32]) -> u32 {
        let mut acc: u64 = 0;
        let m = self.modulus as u64;
        for (x, y) in a.iter().zip(b) {
            acc = (acc + *x as u64 * *y as u64) % m;
        }
        acc as u32
    }

    /// `dst += k * src`
    pub fn axpy(&self, dst: &mut [u32], k: u32, src: &[u32]) {
        if k == 0 {
            return;
        }
        for (d, s) in dst.iter_mut().zip(src) {
            *d = self.add(*d, self.mul(k, *s));
        }
    }

    pub fn scale(&self, v: &mut [u32], k: u32) {
        for x in v.iter_mut() {
            *x = self.mul(*x, k);
        }
    }
}

/// Dense matrix over `Z/p^e`, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidueMatrix {
    ring: RingSpec,
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
}

impl ResidueMatrix {
    pub fn zeros(ring: RingSpec, rows: usize, cols: usize) -> Self {
        ResidueMatrix { ring, rows, cols, entries: vec![0; rows * cols] }
    }

    pub fn identity(ring: RingSpec, n: usize) -> Self {
        let mut m = Self::zeros(ring, n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1 % ring.modulus();
        }
        m
    }

    /// Builds a matrix from signed entries, reducing each one.
    pub fn from_rows<R: AsRef<[i64]>>(ring: RingSpec, rows: &[R]) -> Result<Self, ModArithError> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(ModArithError::DimensionMismatch { expected: cols, found: r.len() });
            }
            entries.extend(r.iter().map(|&x| ring.reduce(x)));
        }
        Ok(ResidueMatrix { ring, rows: rows.len(), cols, entries })
    }

    pub fn from_residue_rows(ring: RingSpec, cols: usize, rows: &[Vec<u32>]) -> Result<Self, ModArithError> {
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(ModArithError::DimensionMismatch { expected: cols, found: r.len() });
            }
            entries.extend(r.iter().map(|&x| x % ring.modulus()));
        }
        Ok(ResidueMatrix { ring, rows: rows.len(), cols, entries })
    }

    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.entries[i * self.cols + j] = v % self.ring.modulus();
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ring, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.entries[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn mul(&self, other: &ResidueMatrix) -> Result<ResidueMatrix, ModArithError> {
        if self.ring != other.ring {
            return Err(ModArithError::RingMismatch);
        }
        if self.cols != other.rows {
            return Err(ModArithError::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let r = self.ring;
        let m = r.modulus() as u64;
        let mut out = Self::zeros(r, self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0u64;
                for k in 0..self.cols {
                    acc = (acc + self.get(i, k) as u64 * other.get(k, j) as u64) % m;
                }
                out.entries[i * other.cols + j] = acc as u32;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &[u32]) -> Result<Vec<u32>, ModArithError> {
        if v.len() != self.cols {
            return Err(ModArithError::DimensionMismatch { expected: self.cols, found: v.len() });
        }
        Ok((0..self.rows).map(|i| self.ring.dot(self.row(i), v)).collect())
    }

    pub fn sub(&self, other: &ResidueMatrix) -> Result<ResidueMatrix, ModArithError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(ModArithError::DimensionMismatch { expected: self.rows * self.cols, found: other.rows * other.cols });
        }
        let r = self.ring;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| r.sub(*a, *b)).collect();
        Ok(ResidueMatrix { ring: r, rows: self.rows, cols: self.cols, entries })
    }
}

/// A submodule of `(Z/p^e)^n`, stored by its Howell basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Submodule {
    ring: RingSpec,
    ambient_rank: usize,
    basis: Vec<Vec<u32>>,
}

fn pivot_col(row: &[u32]) -> Option<usize> {
    row.iter().position(|&x| x != 0)
}

impl Submodule {
    pub fn zero(ring: RingSpec, n: usize) -> Self {
        Submodule { ring, ambient_rank: n, basis: Vec::new() }
    }

    pub fn full(ring: RingSpec, n: usize) -> Self {
        let basis = (0..n)
            .map(|i| {
                let mut v = vec![0; n];
                v[i] = 1 % ring.modulus();
                v
            })
            .collect();
        Submodule { ring, ambient_rank: n, basis }
    }

    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    pub fn ambient_rank(&self) -> usize {
        self.ambient_rank
    }

    pub fn basis(&self) -> &[Vec<u32>] {
        &self.basis
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    /// `log_p` of the number of elements.
    pub fn log_size(&self) -> u32 {
        let r = self.ring;
        self.basis
            .iter()
            .map(|row| {
                let c = pivot_col(row).expect("Howell rows are nonzero");
                r.e() - r.valuation(row[c])
            })
            .sum()
    }

    /// Number of elements, when it fits.
    pub fn size(&self) -> Option<u64> {
        (self.ring.p() as u64).checked_pow(self.log_size())
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        membership(self, v)
    }

    pub fn contains_module(&self, other: &Submodule) -> bool {
        other.basis.iter().all(|r| membership(self, r))
    }

    /// Canonical representative of `v + self`.
    pub fn reduce(&self, v: &[u32]) -> Vec<u32> {
        let r = self.ring;
        let mut v: Vec<u32> = v.iter().map(|x| x % r.modulus()).collect();
        for row in &self.basis {
            let c = pivot_col(row).unwrap();
            let q = v[c] / row[c];
            if q != 0 {
                r.axpy(&mut v, r.neg(q), row);
            }
        }
        v
    }

    /// Sum of two submodules.
    pub fn join(&self, other: &Submodule) -> Result<Submodule, ModArithError> {
        if self.ambient_rank != other.ambient_rank {
            return Err(ModArithError::DimensionMismatch { expected: self.ambient_rank, found: other.ambient_rank });
        }
        let rows: Vec<Vec<u32>> = self.basis.iter().chain(&other.basis).cloned().collect();
        howell_form(self.ring, self.ambient_rank, &rows)
    }

    /// Enumerates every element (callers keep sizes small).
    pub fn elements(&self) -> Vec<Vec<u32>> {
        let r = self.ring;
        let mut out = vec![vec![0u32; self.ambient_rank]];
        for row in &self.basis {
            let c = pivot_col(row).unwrap();
            let ord = r.modulus() / row[c];
            let mut next = Vec::with_capacity(out.len() * ord as usize);
            for v in &out {
                let mut w = v.clone();
                for _ in 0..ord {
                    next.push(w.clone());
                    r.axpy(&mut w, 1, row);
                }
            }
            out = next;
        }
        out.sort();
        out
    }
}

/// Row span built one row at a time. Rows already in the span cost one reduction.
#[derive(Clone, Debug)]
pub struct SpanBuilder {
    span: Submodule,
}

impl SpanBuilder {
    pub fn new(ring: RingSpec, n: usize) -> Self {
        SpanBuilder { span: Submodule::zero(ring, n) }
    }

    /// Returns whether the span grew.
    pub fn push(&mut self, row: &[u32]) -> bool {
        let rest = self.span.reduce(row);
        if rest.iter().all(|&x| x == 0) {
            return false;
        }
        let mut rows = self.span.basis.clone();
        rows.push(rest);
        self.span = howell_form(self.span.ring, self.span.ambient_rank, &rows).expect("consistent dimensions");
        true
    }

    pub fn span(&self) -> &Submodule {
        &self.span
    }

    pub fn finish(self) -> Submodule {
        self.span
    }
}

/// Howell normal form of the span of `rows` inside `(Z/p^e)^n`.
pub fn howell_form(ring: RingSpec, n: usize, rows: &[Vec<u32>]) -> Result<Submodule, ModArithError> {
    let r = ring;
    let mut work: Vec<Vec<u32>> = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != n {
            return Err(ModArithError::DimensionMismatch { expected: n, found: row.len() });
        }
        let v: Vec<u32> = row.iter().map(|x| x % r.modulus()).collect();
        if v.iter().any(|&x| x != 0) {
            work.push(v);
        }
    }
    let mut out: Vec<Vec<u32>> = Vec::new();
    for col in 0..n {
        if work.is_empty() {
            break;
        }
        let mut best: Option<(u32, usize)> = None;
        for (i, w) in work.iter().enumerate() {
            if w[col] != 0 {
                let v = r.valuation(w[col]);
                if best.map_or(true, |(bv, _)| v < bv) {
                    best = Some((v, i));
                }
            }
        }
        let Some((v, idx)) = best else { continue };
        let mut piv = work.remove(idx);
        let pv = r.p_pow(v);
        let unit = piv[col] / pv;
        let uinv = r.inv(unit).expect("cofactor of exact valuation is a unit");
        r.scale(&mut piv, uinv);
        debug_assert_eq!(piv[col], pv);
        for w in work.iter_mut() {
            if w[col] != 0 {
                let t = w[col] / pv;
                r.axpy(w, r.neg(t), &piv);
                debug_assert_eq!(w[col], 0);
            }
        }
        if v > 0 {
            let mut sat = piv.clone();
            r.scale(&mut sat, r.p_pow(r.e() - v));
            if sat.iter().any(|&x| x != 0) {
                work.push(sat);
            }
        }
        work.retain(|w| w.iter().any(|&x| x != 0));
        out.push(piv);
    }
    for i in 0..out.len() {
        let c = pivot_col(&out[i]).unwrap();
        let pv = out[i][c];
        let (upper, lower) = out.split_at_mut(i);
        let piv = &lower[0];
        for row in upper.iter_mut() {
            let q = row[c] / pv;
            if q != 0 {
                r.axpy(row, r.neg(q), piv);
            }
        }
    }
    Ok(Submodule { ring, ambient_rank: n, basis: out })
}

pub fn membership(sub: &Submodule, v: &[u32]) -> bool {
    if v.len() != sub.ambient_rank {
        return false;
    }
    let r = sub.ring;
    let mut v: Vec<u32> = v.iter().map(|x| x % r.modulus()).collect();
    for row in &sub.basis {
        let c = pivot_col(row).unwrap();
        if v[c] % row[c] != 0 {
            return false;
        }
        let q = v[c] / row[c];
        if q != 0 {
            r.axpy(&mut v, r.neg(q), row);
        }
    }
    v.iter().all(|&x| x == 0)
}

/// `{x : A x = 0}`.
pub fn kernel(a: &ResidueMatrix) -> Submodule {
    let r = a.ring();
    let (m, n) = (a.rows(), a.cols());
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|j| {
            let mut row = vec![0u32; m + n];
            for i in 0..m {
                row[i] = a.get(i, j);
            }
            row[m + j] = 1 % r.modulus();
            row
        })
        .collect();
    let h = howell_form(r, m + n, &rows).expect("consistent dimensions");
    let gens: Vec<Vec<u32>> = h
        .basis
        .iter()
        .filter(|row| pivot_col(row).map_or(false, |c| c >= m))
        .map(|row| row[m..].to_vec())
        .collect();
    howell_form(r, n, &gens).expect("consistent dimensions")
}

/// Span of the columns of `a`.
pub fn image(a: &ResidueMatrix) -> Submodule {
    let t = a.transpose();
    howell_form(a.ring(), a.rows(), &t.row_vecs()).expect("consistent dimensions")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSolution {
    pub particular: Vec<u32>,
    pub kernel: Submodule,
}

/// Solves `A x = b`; `Ok(None)` when the system is inconsistent.
pub fn solve_affine(a: &ResidueMatrix, b: &[u32]) -> Result<Option<AffineSolution>, ModArithError> {
    let r = a.ring();
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(ModArithError::DimensionMismatch { expected: m, found: b.len() });
    }
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|j| {
            let mut row = vec![0u32; m + n];
            for i in 0..m {
                row[i] = a.get(i, j);
            }
            row[m + j] = 1 % r.modulus();
            row
        })
        .collect();
    let h = howell_form(r, m + n, &rows)?;
    let mut v = vec![0u32; m + n];
    for i in 0..m {
        v[i] = b[i] % r.modulus();
    }
    let mut kernel_rows = Vec::new();
    for row in &h.basis {
        let c = pivot_col(row).unwrap();
        if c >= m {
            kernel_rows.push(row[m..].to_vec());
            continue;
        }
        if v[c] % row[c] != 0 {
            return Ok(None);
        }
        let q = v[c] / row[c];
        r.axpy(&mut v, r.neg(q), row);
    }
    if v[..m].iter().any(|&x| x != 0) {
        return Ok(None);
    }
    let kernel = howell_form(r, n, &kernel_rows)?;
    let x: Vec<u32> = v[m..].iter().map(|&t| r.neg(t)).collect();
    let particular = kernel.reduce(&x);
    Ok(Some(AffineSolution { particular, kernel }))
}

/// One cyclic summand of a quotient module: its order and a generator
/// given in ambient coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicFactor {
    pub order: u64,
    pub generator: Vec<u32>,
}

/// Cyclic decomposition of `ambient / sub`, orders ascending.
pub fn quotient_decomposition(ambient: &Submodule, sub: &Submodule) -> Result<Vec<CyclicFactor>, ModArithError> {
    if ambient.ring != sub.ring {
        return Err(ModArithError::RingMismatch);
    }
    if ambient.ambient_rank != sub.ambient_rank {
        return Err(ModArithError::DimensionMismatch { expected: ambient.ambient_rank, found: sub.ambient_rank });
    }
    if !ambient.contains_module(sub) {
        return Err(ModArithError::NotContained);
    }
    let r = ambient.ring;
    let n = ambient.ambient_rank;
    let z = &ambient.basis;
    let b = &sub.basis;
    let k = z.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    // relations among the ambient generators modulo `sub`
    let mut sys = ResidueMatrix::zeros(r, n, k + b.len());
    for (j, col) in z.iter().chain(b.iter()).enumerate() {
        for i in 0..n {
            let x = if j < k { col[i] } else { r.neg(col[i]) };
            sys.set(i, j, x);
        }
    }
    let rel = kernel(&sys);
    let rel_rows: Vec<Vec<u32>> = rel.basis.iter().map(|row| row[..k].to_vec()).collect();
    let snf = diagonalize(r, k, rel_rows);
    let mut factors = Vec::new();
    for (i, v) in snf.valuations.iter().enumerate() {
        if *v == 0 {
            continue;
        }
        let coeffs = &snf.col_inverse[i];
        let mut g = vec![0u32; n];
        for (c, zrow) in coeffs.iter().zip(z) {
            r.axpy(&mut g, *c, zrow);
        }
        factors.push(CyclicFactor { order: (r.p() as u64).pow(*v), generator: sub.reduce(&g) });
    }
    factors.sort_by_key(|f| f.order);
    Ok(factors)
}

/// Invariant factors of `ambient / sub`, ascending; empty when trivial.
pub fn quotient_invariants(ambient: &Submodule, sub: &Submodule) -> Result<Vec<u64>, ModArithError> {
    Ok(quotient_decomposition(ambient, sub)?.into_iter().map(|f| f.order).collect())
}

pub(crate) struct Diagonalized {
    /// `v_i` such that the quotient of `(Z/p^e)^k` by the row span is
    /// `⊕ Z/p^{v_i}`.
    pub valuations: Vec<u32>,
    /// Rows of the inverse column transform: generator `i` of the quotient in
    /// original coordinates.
    pub col_inverse: Vec<Vec<u32>>,
}

/// Smith-style diagonalization over the local ring with valuation pivoting.
pub(crate) fn diagonalize(r: RingSpec, k: usize, mut rows: Vec<Vec<u32>>) -> Diagonalized {
    let one = 1 % r.modulus();
    let mut vinv: Vec<Vec<u32>> = (0..k)
        .map(|i| {
            let mut v = vec![0; k];
            v[i] = one;
            v
        })
        .collect();
    let mut valuations = vec![r.e(); k];
    let nrows = rows.len();
    let mut t = 0usize;
    while t < k && t < nrows {
        let mut best: Option<(u32, usize, usize)> = None;
        for (i, row) in rows.iter().enumerate().skip(t) {
            for (j, &x) in row.iter().enumerate().skip(t) {
                if x != 0 {
                    let v = r.valuation(x);
                    if best.map_or(true, |(bv, _, _)| v < bv) {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((v, bi, bj)) = best else { break };
        rows.swap(t, bi);
        if bj != t {
            for row in rows.iter_mut() {
                row.swap(t, bj);
            }
            vinv.swap(t, bj);
        }
        let pv = r.p_pow(v);
        let unit = rows[t][t] / pv;
        let uinv = r.inv(unit).unwrap();
        r.scale(&mut rows[t], uinv);
        let pivot_row = rows[t].clone();
        for i in (t + 1)..nrows {
            let x = rows[i][t];
            if x != 0 {
                r.axpy(&mut rows[i], r.neg(x / pv), &pivot_row);
            }
        }
        for j in (t + 1)..k {
            let x = rows[t][j];
            if x != 0 {
                let q = x / pv;
                rows[t][j] = 0;
                let src = vinv[j].clone();
                r.axpy(&mut vinv[t], q, &src);
            }
        }
        valuations[t] = v;
        t += 1;
    }
    Diagonalized { valuations, col_inverse: vinv }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(p: u32, e: u32) -> RingSpec {
        RingSpec::new(p, e).unwrap()
    }

    #[test]
    fn ring_basics() {
        let r = ring(3, 2);
        assert_eq!(r.modulus(), 9);
        assert_eq!(r.valuation(0), 2);
        assert_eq!(r.valuation(6), 1);
        assert_eq!(r.inv(2), Some(5));
        assert_eq!(r.inv(3), None);
        assert_eq!(r.unit_count(), 6);
        assert!(RingSpec::new(4, 1).is_err());
        assert!(RingSpec::new(3, 0).is_err());
        assert_eq!(ring(2, 2).unit_generator(), Some(3));
        assert_eq!(ring(5, 2).unit_generator(), Some(2));
    }

    #[test]
    fn howell_examples() {
        let r4 = ring(2, 2);
        let h = howell_form(r4, 2, &[vec![2, 0]]).unwrap();
        assert_eq!(h.basis(), &[vec![2, 0]]);

        let r9 = ring(3, 2);
        let h = howell_form(r9, 2, &[vec![3, 0], vec![6, 0]]).unwrap();
        assert_eq!(h.basis(), &[vec![3, 0]]);

        let h = howell_form(r9, 2, &[vec![1, 2], vec![4, 7]]).unwrap();
        assert_eq!(h.basis(), &[vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn howell_needs_saturation() {
        // span{(3,1)} in (Z/9)^2 contains 3*(3,1) = (0,3)
        let r9 = ring(3, 2);
        let h = howell_form(r9, 2, &[vec![3, 1]]).unwrap();
        assert!(h.contains(&[0, 3]));
        assert!(!h.contains(&[0, 1]));
        assert_eq!(h.log_size(), 2);
    }

    #[test]
    fn solve_examples() {
        let r9 = ring(3, 2);
        let a = ResidueMatrix::from_rows(r9, &[[3]]).unwrap();
        let s = solve_affine(&a, &[6]).unwrap().unwrap();
        assert_eq!(s.particular, vec![2]);
        assert_eq!(s.kernel.elements(), vec![vec![0], vec![3], vec![6]]);
        assert!(solve_affine(&a, &[1]).unwrap().is_none());

        let id = ResidueMatrix::identity(r9, 3);
        let s = solve_affine(&id, &[4, 0, 8]).unwrap().unwrap();
        assert_eq!(s.particular, vec![4, 0, 8]);
        assert!(s.kernel.is_zero());
    }

    #[test]
    fn kernel_examples() {
        let r9 = ring(3, 2);
        let a = ResidueMatrix::from_rows(r9, &[[3]]).unwrap();
        assert_eq!(kernel(&a).elements(), vec![vec![0], vec![3], vec![6]]);

        let r25 = ring(5, 2);
        let a = ResidueMatrix::from_rows(r25, &[[5, 0], [0, 5]]).unwrap();
        let k = kernel(&a);
        assert_eq!(k.log_size(), 2);
        assert_eq!(quotient_invariants(&k, &Submodule::zero(r25, 2)).unwrap(), vec![5, 5]);

        let a = ResidueMatrix::from_rows(r25, &[[2, 1], [1, 1]]).unwrap();
        assert!(kernel(&a).is_zero());
    }

    #[test]
    fn quotient_examples() {
        let r4 = ring(2, 2);
        let full = Submodule::full(r4, 2);
        let sub = howell_form(r4, 2, &[vec![2, 0]]).unwrap();
        assert_eq!(quotient_invariants(&full, &sub).unwrap(), vec![2, 4]);
        assert_eq!(quotient_invariants(&full, &full).unwrap(), Vec::<u64>::new());

        let r9 = ring(3, 2);
        let full = Submodule::full(r9, 2);
        let sub = howell_form(r9, 2, &[vec![3, 0], vec![0, 3]]).unwrap();
        assert_eq!(quotient_invariants(&full, &sub).unwrap(), vec![3, 3]);

        assert_eq!(quotient_invariants(&sub, &full), Err(ModArithError::NotContained));
    }

    #[test]
    fn quotient_generators_have_stated_order() {
        let r9 = ring(3, 2);
        let amb = howell_form(r9, 3, &[vec![1, 0, 3], vec![0, 3, 0], vec![0, 0, 1]]).unwrap();
        let sub = howell_form(r9, 3, &[vec![3, 0, 0], vec![0, 0, 3]]).unwrap();
        let d = quotient_decomposition(&amb, &sub).unwrap();
        let total: u64 = d.iter().map(|f| f.order).product();
        assert_eq!(total, 3u64.pow(amb.log_size() - sub.log_size()));
        for f in &d {
            let mut g = f.generator.clone();
            r9.scale(&mut g, f.order as u32 % 9);
            assert!(sub.contains(&g));
            let mut h = f.generator.clone();
            r9.scale(&mut h, (f.order / 3) as u32);
            assert!(!sub.contains(&h));
        }
    }

    #[test]
    fn membership_examples() {
        let r9 = ring(3, 2);
        let s = howell_form(r9, 2, &[vec![3, 0]]).unwrap();
        assert!(membership(&s, &[6, 0]));
        assert!(!membership(&s, &[1, 0]));
        assert!(membership(&s, &[0, 0]));
        assert!(membership(&Submodule::zero(r9, 2), &[0, 0]));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let r = ring(5, 1);
        assert!(matches!(howell_form(r, 2, &[vec![1, 2, 3]]), Err(ModArithError::DimensionMismatch { .. })));
    }
}
