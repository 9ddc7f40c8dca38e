//! Weierstrass curves over `Q` and over prime fields, curve facts, and the
//! Frobenius and divisibility scans built on naive point counting.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
/// Largest field size accepted by the point counter.
pub const MAX_FIELD: u64 = 10_000;

const BUNDLED: &str = include_str!("../fixtures/curves.jsonl");
const DESCENT5: &str = include_str!("../fixtures/descent5.txt");

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("record {index}: {message}")]
    Schema { index: usize, message: String },
    #[error("singular curve (discriminant 0)")]
    Singular,
    #[error("point is not on the curve")]
    NotOnCurve,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("field size {0} exceeds the naive counting bound")]
    FieldTooLarge(u64),
    #[error("no curve with label {0}")]
    UnknownLabel(String),
    #[error("fetch failed: {0}")]
    Fetch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn rat_to_string(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let d = BigInt::from_str(d.trim()).ok()?;
            if d.is_zero() {
                return None;
            }
            Some(BigRational::new(BigInt::from_str(n.trim()).ok()?, d))
        }
        None => Some(BigRational::from_integer(BigInt::from_str(s).ok()?)),
    }
}

mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rat_to_string(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s:?}")))
    }
}

mod ainv_str {
    use super::*;

    pub fn serialize<S: Serializer>(a: &[BigRational; 5], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<String> = a.iter().map(rat_to_string).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[BigRational; 5], D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Coef {
            Int(i64),
            Str(String),
        }
        let v = Vec::<Coef>::deserialize(d)?;
        let v: Vec<BigRational> = v
            .into_iter()
            .map(|c| match c {
                Coef::Int(i) => Ok(BigRational::from_integer(i.into())),
                Coef::Str(s) => parse_rational(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s:?}"))),
            })
            .collect::<Result<_, _>>()?;
        <[BigRational; 5]>::try_from(v).map_err(|_| serde::de::Error::custom("expected five a-invariants"))
    }
}

/// A rational point in affine coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffinePoint {
    #[serde(with = "rational_str")]
    pub x: BigRational,
    #[serde(with = "rational_str")]
    pub y: BigRational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CurvePoint {
    Infinity,
    Affine(AffinePoint),
}

impl CurvePoint {
    pub fn new(x: BigRational, y: BigRational) -> Self {
        CurvePoint::Affine(AffinePoint { x, y })
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        CurvePoint::new(BigRational::from_integer(x.into()), BigRational::from_integer(y.into()))
    }
}

impl fmt::Display for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvePoint::Infinity => write!(f, "O"),
            CurvePoint::Affine(p) => write!(f, "({}, {})", rat_to_string(&p.x), rat_to_string(&p.y)),
        }
    }
}

impl FromStr for CurvePoint {
    type Err = String;

    /// `x,y` or `(x, y)` with rational coordinates, or `O`.
    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        if t.eq_ignore_ascii_case("o") || t.eq_ignore_ascii_case("inf") {
            return Ok(CurvePoint::Infinity);
        }
        let (x, y) = t.split_once(',').ok_or_else(|| format!("expected x,y in {s:?}"))?;
        let x = parse_rational(x).ok_or_else(|| format!("bad x-coordinate in {s:?}"))?;
        let y = parse_rational(y).ok_or_else(|| format!("bad y-coordinate in {s:?}"))?;
        Ok(CurvePoint::new(x, y))
    }
}

/// Torsion of a curve isogenous to the one described.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborTorsion {
    pub degree: u64,
    #[serde(default)]
    pub label: Option<String>,
    pub torsion_structure: Vec<u64>,
    #[serde(default)]
    pub twist5_torsion: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveFacts {
    pub schema: u32,
    pub label: String,
    #[serde(with = "ainv_str")]
    pub a_invariants: [BigRational; 5],
    #[serde(default)]
    pub conductor: Option<u64>,
    pub torsion_structure: Vec<u64>,
    /// Degrees of the cyclic isogenies from the curve defined over `Q`.
    pub isogeny_degrees: Vec<u64>,
    #[serde(default)]
    pub twist5_torsion: Option<Vec<u64>>,
    #[serde(default)]
    pub isogeny_neighbor_torsion: Option<Vec<NeighborTorsion>>,
    #[serde(default)]
    pub cm_discriminant: Option<i64>,
    #[serde(default)]
    pub rank: Option<u32>,
    #[serde(default)]
    pub generators: Option<Vec<AffinePoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl CurveFacts {
    pub fn curve(&self) -> RationalCurve {
        RationalCurve { a: self.a_invariants.clone() }
    }

    pub fn has_rational_torsion(&self, p: u64) -> bool {
        self.torsion_structure.iter().any(|n| n % p == 0)
    }

    /// Number of distinct `Q`-rational cyclic isogenies of degree `d`.
    pub fn isogenies_of_degree(&self, d: u64) -> usize {
        self.isogeny_degrees.iter().filter(|&&x| x == d).count()
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        let c = self.curve();
        if c.discriminant().is_zero() {
            return Err(CurveError::Singular);
        }
        for g in self.generators.iter().flatten() {
            if !c.is_on_curve(&CurvePoint::Affine(g.clone())) {
                return Err(CurveError::NotOnCurve);
            }
        }
        Ok(())
    }
}

/// `y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6` over `Q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalCurve {
    pub a: [BigRational; 5],
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

impl RationalCurve {
    pub fn from_ints(a: [i64; 5]) -> Self {
        RationalCurve { a: a.map(q) }
    }

    pub fn b_invariants(&self) -> [BigRational; 4] {
        let [a1, a2, a3, a4, a6] = &self.a;
        let b2 = a1 * a1 + q(4) * a2;
        let b4 = q(2) * a4 + a1 * a3;
        let b6 = a3 * a3 + q(4) * a6;
        let b8 = a1 * a1 * a6 + q(4) * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4;
        [b2, b4, b6, b8]
    }

    pub fn discriminant(&self) -> BigRational {
        let [b2, b4, b6, b8] = self.b_invariants();
        -(&b2 * &b2 * &b8) - q(8) * &b4 * &b4 * &b4 - q(27) * &b6 * &b6 + q(9) * &b2 * &b4 * &b6
    }

    pub fn c4(&self) -> BigRational {
        let [b2, b4, _, _] = self.b_invariants();
        &b2 * &b2 - q(24) * b4
    }

    pub fn j_invariant(&self) -> BigRational {
        let c4 = self.c4();
        &c4 * &c4 * &c4 / self.discriminant()
    }

    pub fn is_on_curve(&self, p: &CurvePoint) -> bool {
        let CurvePoint::Affine(p) = p else { return true };
        let [a1, a2, a3, a4, a6] = &self.a;
        let (x, y) = (&p.x, &p.y);
        y * y + a1 * x * y + a3 * y == x * x * x + a2 * x * x + a4 * x + a6
    }

    pub fn neg(&self, p: &CurvePoint) -> CurvePoint {
        match p {
            CurvePoint::Infinity => CurvePoint::Infinity,
            CurvePoint::Affine(p) => CurvePoint::new(p.x.clone(), -&p.y - &self.a[0] * &p.x - &self.a[2]),
        }
    }

    pub fn add(&self, p: &CurvePoint, r: &CurvePoint) -> CurvePoint {
        let (CurvePoint::Affine(s), CurvePoint::Affine(t)) = (p, r) else {
            return if matches!(p, CurvePoint::Infinity) { r.clone() } else { p.clone() };
        };
        let [a1, a2, a3, a4, _] = &self.a;
        let lambda = if s.x == t.x {
            if &s.y + &t.y + a1 * &t.x + a3 == BigRational::zero() {
                return CurvePoint::Infinity;
            }
            (q(3) * &s.x * &s.x + q(2) * a2 * &s.x + a4 - a1 * &s.y) / (q(2) * &s.y + a1 * &s.x + a3)
        } else {
            (&t.y - &s.y) / (&t.x - &s.x)
        };
        let nu = &s.y - &lambda * &s.x;
        let x3 = &lambda * &lambda + a1 * &lambda - a2 - &s.x - &t.x;
        let y3 = -(&lambda + a1) * &x3 - &nu - a3;
        CurvePoint::new(x3, y3)
    }

    pub fn mul(&self, n: i64, p: &CurvePoint) -> CurvePoint {
        let mut base = if n < 0 { self.neg(p) } else { p.clone() };
        let mut k = n.unsigned_abs();
        let mut acc = CurvePoint::Infinity;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(&acc, &base);
            }
            base = self.add(&base, &base);
            k >>= 1;
        }
        acc
    }
}

fn is_prime_u64(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

pub fn primes_below(bound: u64) -> Vec<u64> {
    (2..bound).filter(|&n| is_prime_u64(n)).collect()
}

fn reduce_mod(x: &BigRational, ell: u64) -> Option<u64> {
    let m = BigInt::from(ell);
    let d = x.denom().mod_floor(&m);
    if d.is_zero() {
        return None;
    }
    let n = x.numer().mod_floor(&m).to_u64()?;
    let d = d.to_u64()?;
    Some(n * inv_mod(d, ell) % ell)
}

fn inv_mod(a: u64, m: u64) -> u64 {
    let e = (a as i64).extended_gcd(&(m as i64));
    e.x.rem_euclid(m as i64) as u64
}

/// A curve over `F_ℓ` with reduced a-invariants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpCurve {
    pub ell: u64,
    pub a: [u64; 5],
}

/// Points over `F_ℓ`; `None` is the point at infinity.
pub type FpPoint = Option<(u64, u64)>;

impl FpCurve {
    pub fn new(ell: u64, a: [i64; 5]) -> Result<Self, CurveError> {
        if !is_prime_u64(ell) {
            return Err(CurveError::NotPrime(ell));
        }
        let c = FpCurve { ell, a: a.map(|x| x.rem_euclid(ell as i64) as u64) };
        if c.discriminant() == 0 {
            return Err(CurveError::Singular);
        }
        Ok(c)
    }

    pub fn discriminant(&self) -> u64 {
        let l = self.ell as i128;
        let [a1, a2, a3, a4, a6] = self.a.map(|x| x as i128);
        let m = |x: i128| x.rem_euclid(l);
        let b2 = m(a1 * a1 + 4 * a2);
        let b4 = m(2 * a4 + a1 * a3);
        let b6 = m(a3 * a3 + 4 * a6);
        let b8 = m(m(a1 * a1 * a6) + m(4 * a2 * a6) - m(a1 * a3 * a4) + m(a2 * a3 * a3) - m(a4 * a4));
        m(-m(b2 * b2 % l * b8) - m(8 * b4 % l * b4 % l * b4) - m(27 * b6 % l * b6) + m(9 * b2 % l * b4 % l * b6)) as u64
    }

    fn f(&self, x: u64) -> u64 {
        let l = self.ell;
        let [_, a2, _, a4, a6] = self.a;
        ((x * x % l * x) % l + a2 * x % l * x % l + a4 * x % l + a6) % l
    }

    pub fn is_on_curve(&self, p: &FpPoint) -> bool {
        let Some((x, y)) = *p else { return true };
        let l = self.ell;
        let [a1, _, a3, _, _] = self.a;
        (y * y % l + a1 * x % l * y % l + a3 * y % l) % l == self.f(x)
    }

    pub fn neg(&self, p: &FpPoint) -> FpPoint {
        let l = self.ell;
        p.map(|(x, y)| (x, (2 * l * l - y - self.a[0] * x % l - self.a[2]) % l))
    }

    pub fn add(&self, p: &FpPoint, r: &FpPoint) -> FpPoint {
        let (Some((x1, y1)), Some((x2, y2))) = (*p, *r) else {
            return if p.is_none() { *r } else { *p };
        };
        let l = self.ell;
        let [a1, a2, a3, a4, _] = self.a;
        let lambda = if x1 == x2 {
            let den = (2 * y1 + a1 * x1 + a3) % l;
            if den == 0 || (y1 + y2 + a1 * x2 + a3) % l == 0 {
                return None;
            }
            let num = (3 * x1 % l * x1 % l + 2 * a2 % l * x1 % l + a4 + l * l - a1 * y1 % l) % l;
            num * inv_mod(den, l) % l
        } else {
            (y2 + l - y1) % l * inv_mod((x2 + l - x1) % l, l) % l
        };
        let x3 = (lambda * lambda % l + a1 * lambda % l + 3 * l - a2 - x1 - x2) % l;
        let nu = (y1 + l * l - lambda * x1 % l) % l;
        let y3 = (2 * l * l - (lambda + a1) % l * x3 % l - nu - a3) % l;
        Some((x3, y3))
    }

    pub fn mul(&self, mut k: u64, p: &FpPoint) -> FpPoint {
        let mut base = *p;
        let mut acc = None;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(&acc, &base);
            }
            base = self.add(&base, &base);
            k >>= 1;
        }
        acc
    }

    /// All points, the point at infinity first.
    pub fn points(&self) -> Vec<FpPoint> {
        let l = self.ell;
        let mut out = vec![None];
        for x in 0..l {
            for y in 0..l {
                let p = Some((x, y));
                if self.is_on_curve(&p) {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn count(&self) -> u64 {
        let l = self.ell;
        if l <= 3 {
            return self.points().len() as u64;
        }
        // y^2 + (a1 x + a3) y = f(x) has 1 + (D/ℓ) solutions, D = (a1 x + a3)^2 + 4 f(x)
        let mut chi = vec![-1i64; l as usize];
        chi[0] = 0;
        for y in 1..l {
            chi[(y * y % l) as usize] = 1;
        }
        let [a1, _, a3, _, _] = self.a;
        let mut n = 1i64;
        for x in 0..l {
            let h = (a1 * x + a3) % l;
            let d = (h * h + 4 * self.f(x)) % l;
            n += 1 + chi[d as usize];
        }
        n as u64
    }

    pub fn point_order(&self, p: &FpPoint, n: u64) -> u64 {
        let mut ord = n;
        for (q, _) in factor(n) {
            while ord % q == 0 && self.mul(ord / q, p).is_none() {
                ord /= q;
            }
        }
        ord
    }

    /// `(n1, n2)` with `n1 | n2` and group `≅ Z/n1 × Z/n2`, from the exponent.
    pub fn group_structure(&self) -> (u64, u64) {
        let pts = self.points();
        let n = pts.len() as u64;
        let mut exponent = 1u64;
        for p in &pts {
            if exponent == n {
                break;
            }
            exponent = exponent.lcm(&self.point_order(p, n));
        }
        (n / exponent, exponent)
    }

    /// Whether `p` lies in `m·E(F_ℓ)`.
    pub fn in_multiple_subgroup(&self, p: &FpPoint, m: u64) -> bool {
        let pts = self.points();
        let n = pts.len() as u64;
        if n.gcd(&m) == 1 {
            return true;
        }
        pts.iter().any(|q| self.mul(m, q) == *p)
    }
}

pub fn factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            let mut k = 0;
            while n % d == 0 {
                n /= d;
                k += 1;
            }
            out.push((d, k));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reduction {
    Good(FpCurve),
    Bad,
}

/// Reduction of the given model at `ℓ`. A model with `ℓ` in a denominator is
/// reported as bad.
pub fn reduce_curve(facts: &CurveFacts, ell: u64) -> Result<Reduction, CurveError> {
    if !is_prime_u64(ell) {
        return Err(CurveError::NotPrime(ell));
    }
    let mut a = [0u64; 5];
    for (i, c) in facts.a_invariants.iter().enumerate() {
        match reduce_mod(c, ell) {
            Some(v) => a[i] = v,
            None => return Ok(Reduction::Bad),
        }
    }
    let disc = facts.curve().discriminant();
    if reduce_mod(&disc, ell).map_or(true, |d| d == 0) {
        return Ok(Reduction::Bad);
    }
    Ok(Reduction::Good(FpCurve { ell, a }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrobeniusDatum {
    pub ell: u64,
    pub n: u64,
    pub a_ell: i64,
    pub group_invariants: (u64, u64),
}

pub fn count_points(c: &FpCurve) -> Result<FrobeniusDatum, CurveError> {
    if c.ell > MAX_FIELD {
        return Err(CurveError::FieldTooLarge(c.ell));
    }
    let n = c.count();
    let a_ell = c.ell as i64 + 1 - n as i64;
    assert!((a_ell * a_ell) as u64 <= 4 * c.ell, "Hasse bound violated at {}", c.ell);
    let group_invariants = c.group_structure();
    Ok(FrobeniusDatum { ell: c.ell, n, a_ell, group_invariants })
}

/// Trace of Frobenius only, without the group structure.
pub fn trace_of_frobenius(c: &FpCurve) -> Result<i64, CurveError> {
    if c.ell > MAX_FIELD {
        return Err(CurveError::FieldTooLarge(c.ell));
    }
    Ok(c.ell as i64 + 1 - c.count() as i64)
}

pub fn group_structure(c: &FpCurve) -> Result<(u64, u64), CurveError> {
    if c.ell > MAX_FIELD {
        return Err(CurveError::FieldTooLarge(c.ell));
    }
    Ok(c.group_structure())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "reason")]
pub enum Divisibility {
    Divisible,
    NotDivisible,
    Inconclusive(String),
}

impl Divisibility {
    pub fn is_divisible(&self) -> bool {
        matches!(self, Divisibility::Divisible)
    }
}

/// Local divisibility of `P` by `m` in `E(Q_ℓ)` for good `ℓ ∤ m`, decided in
/// `Ẽ(F_ℓ)`: the kernel of reduction is uniquely `m`-divisible.
pub fn locally_divisible(facts: &CurveFacts, p: &CurvePoint, m: u64, ell: u64) -> Result<Divisibility, CurveError> {
    if !facts.curve().is_on_curve(p) {
        return Err(CurveError::NotOnCurve);
    }
    if m == 1 {
        return Ok(Divisibility::Divisible);
    }
    if m % ell == 0 {
        return Ok(Divisibility::Inconclusive(format!("ℓ = {ell} divides m")));
    }
    let Reduction::Good(c) = reduce_curve(facts, ell)? else {
        return Ok(Divisibility::Inconclusive(format!("bad reduction at {ell}")));
    };
    if ell > MAX_FIELD {
        return Err(CurveError::FieldTooLarge(ell));
    }
    let pt: FpPoint = match p {
        CurvePoint::Infinity => None,
        CurvePoint::Affine(a) => match (reduce_mod(&a.x, ell), reduce_mod(&a.y, ell)) {
            (Some(x), Some(y)) => Some((x, y)),
            // in the kernel of reduction
            _ => None,
        },
    };
    Ok(if c.in_multiple_subgroup(&pt, m) { Divisibility::Divisible } else { Divisibility::NotDivisible })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    /// `a_ℓ ≡ ℓ^a + ℓ^b`.
    Exact,
    /// `a_ℓ ≡ ±(ℓ^a + ℓ^b)`: the curve or a quadratic twist.
    Twist,
    /// `a_ℓ ≡ ±ℓ^a ± ℓ^b` with independent signs.
    Independent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterWitness {
    pub ell: u64,
    pub a_ell: i64,
    pub allowed: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterResult {
    pub pass: bool,
    pub checked: Vec<u64>,
    pub witness: Option<FilterWitness>,
}

fn pow_mod(b: u64, mut e: u64, m: u64) -> u64 {
    let mut base = b % m;
    let mut acc = 1 % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    acc
}

pub fn allowed_traces(p: u64, ell: u64, exps: (u32, u32), mode: SignMode) -> Vec<u64> {
    let x = pow_mod(ell, exps.0 as u64, p);
    let y = pow_mod(ell, exps.1 as u64, p);
    let neg = |v: u64| (p - v) % p;
    let mut v = match mode {
        SignMode::Exact => vec![(x + y) % p],
        SignMode::Twist => vec![(x + y) % p, neg((x + y) % p)],
        SignMode::Independent => vec![(x + y) % p, (x + neg(y)) % p, (neg(x) + y) % p, (neg(x) + neg(y)) % p],
    };
    v.sort_unstable();
    v.dedup();
    v
}

/// Checks `a_ℓ` against `ℓ^a + ℓ^b mod p` over the good primes `ℓ ≠ p` in
/// `primes`, stopping at the first failure.
pub fn frobenius_congruence_filter(
    facts: &CurveFacts,
    p: u64,
    exps: (u32, u32),
    primes: &[u64],
    mode: SignMode,
) -> Result<FilterResult, CurveError> {
    let mut checked = Vec::new();
    for &ell in primes {
        if ell == p {
            continue;
        }
        let Reduction::Good(c) = reduce_curve(facts, ell)? else { continue };
        let a = trace_of_frobenius(&c)?;
        checked.push(ell);
        let allowed = allowed_traces(p, ell, exps, mode);
        if !allowed.contains(&(a.rem_euclid(p as i64) as u64)) {
            return Ok(FilterResult { pass: false, checked, witness: Some(FilterWitness { ell, a_ell: a, allowed }) });
        }
    }
    Ok(FilterResult { pass: true, checked, witness: None })
}

/// Pairs `(a_ℓ mod p^level, ℓ mod p^level)` over good primes `ℓ < bound`, `ℓ ∤ p·skip`.
pub fn trace_pair_scan(
    facts: &CurveFacts,
    p: u64,
    level: u32,
    bound: u64,
    skip: &[u64],
) -> Result<BTreeSet<(u64, u64)>, CurveError> {
    let m = p.pow(level);
    let primes: Vec<u64> = primes_below(bound).into_iter().filter(|l| *l != p && !skip.contains(l)).collect();
    let pairs: Vec<Option<(u64, u64)>> = primes
        .par_iter()
        .map(|&ell| -> Result<Option<(u64, u64)>, CurveError> {
            match reduce_curve(facts, ell)? {
                Reduction::Good(c) => {
                    let a = trace_of_frobenius(&c)?;
                    Ok(Some((a.rem_euclid(m as i64) as u64, ell % m)))
                }
                Reduction::Bad => Ok(None),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(pairs.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeDivisibility {
    pub ell: u64,
    pub result: Divisibility,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisibilityScan {
    pub label: String,
    /// The point tested, `k·P`.
    pub point: String,
    pub base_point: String,
    pub k: i64,
    pub m: u64,
    pub bound: u64,
    pub primes: Vec<PrimeDivisibility>,
    /// No prime below the bound reported `NotDivisible`.
    pub all_good_primes_divisible: bool,
    pub failures: Vec<u64>,
    pub inconclusive: Vec<u64>,
    /// Divisibility by `m` in `E(Q)`, known when `P` is the bundled generator of a rank-one curve.
    pub global_divisible: Option<bool>,
    /// Locally divisible below the bound but not globally divisible.
    pub local_global_gap: bool,
}

/// Divisibility of `k·P` by `m` in `E(Q)` when `E(Q) = Z·P ⊕ torsion`:
/// `m·(aP + T) = kP` forces `ma = k`.
pub fn global_divisibility(facts: &CurveFacts, base: &CurvePoint, k: i64, m: u64) -> Option<bool> {
    let gens = facts.generators.as_ref()?;
    if facts.rank != Some(1) || gens.len() != 1 || CurvePoint::Affine(gens[0].clone()) != *base {
        return None;
    }
    Some(k % m as i64 == 0)
}

/// Local divisibility of `k·P` by `m` at every prime below `bound`.
pub fn scan_divisibility(
    facts: &CurveFacts,
    base: &CurvePoint,
    k: i64,
    m: u64,
    bound: u64,
) -> Result<DivisibilityScan, CurveError> {
    let curve = facts.curve();
    if !curve.is_on_curve(base) {
        return Err(CurveError::NotOnCurve);
    }
    let p = curve.mul(k, base);
    let primes: Vec<PrimeDivisibility> = primes_below(bound)
        .par_iter()
        .map(|&ell| Ok(PrimeDivisibility { ell, result: locally_divisible(facts, &p, m, ell)? }))
        .collect::<Result<_, CurveError>>()?;
    let failures: Vec<u64> =
        primes.iter().filter(|r| r.result == Divisibility::NotDivisible).map(|r| r.ell).collect();
    let inconclusive: Vec<u64> =
        primes.iter().filter(|r| matches!(r.result, Divisibility::Inconclusive(_))).map(|r| r.ell).collect();
    let global_divisible = global_divisibility(facts, base, k, m);
    let all = failures.is_empty();
    Ok(DivisibilityScan {
        label: facts.label.clone(),
        point: p.to_string(),
        base_point: base.to_string(),
        k,
        m,
        bound,
        all_good_primes_divisible: all,
        local_global_gap: all && global_divisible == Some(false),
        global_divisible,
        failures,
        inconclusive,
        primes,
    })
}

fn parse_record(index: usize, line: &str) -> Result<CurveFacts, CurveError> {
    let schema = |message: String| CurveError::Schema { index, message };
    let facts: CurveFacts = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
    if facts.schema != SCHEMA_VERSION {
        return Err(schema(format!("unsupported schema {}", facts.schema)));
    }
    facts.validate().map_err(|e| schema(e.to_string()))?;
    Ok(facts)
}

/// JSON-lines records; blank lines and lines starting with `#` are skipped.
/// Record indices in errors are 0-based line numbers.
pub fn parse_curve_facts(text: &str) -> Result<Vec<CurveFacts>, CurveError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_record(i, l))
        .collect()
}

pub fn load_curve_facts(path: &Path) -> Result<Vec<CurveFacts>, CurveError> {
    parse_curve_facts(&std::fs::read_to_string(path)?)
}

pub fn bundled_curves() -> Vec<CurveFacts> {
    parse_curve_facts(BUNDLED).expect("bundled fixtures are valid")
}

pub fn bundled_curve(label: &str) -> Option<CurveFacts> {
    bundled_curves().into_iter().find(|c| c.label == label)
}

/// Labels of the curves that needed a 5-descent; a-invariants are not bundled.
pub fn descent5_labels() -> Vec<&'static str> {
    DESCENT5.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

#[derive(Clone, Debug)]
pub struct FetchConfig {
    pub base_url: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub use_cache: bool,
}

pub const ENV_CACHE_DIR: &str = "GALCOH_CACHE_DIR";
pub const ENV_DB_URL: &str = "GALCOH_DB_URL";

impl FetchConfig {
    pub fn from_env() -> Self {
        FetchConfig {
            base_url: std::env::var(ENV_DB_URL).ok(),
            cache_dir: std::env::var_os(ENV_CACHE_DIR).map(PathBuf::from),
            use_cache: true,
        }
    }
}

fn valid_label(label: &str) -> bool {
    !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_'))
}

/// Cached file, then `GET {base_url}/{label}`, then the bundled fixtures.
pub fn fetch_curve(label: &str, cfg: &FetchConfig) -> Result<CurveFacts, CurveError> {
    if !valid_label(label) {
        return Err(CurveError::UnknownLabel(label.to_string()));
    }
    let cached = cfg.cache_dir.as_ref().map(|d| d.join("curves").join(format!("{label}.json")));
    if let (true, Some(path)) = (cfg.use_cache, &cached) {
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(f) = parse_record(0, text.trim()) {
                return Ok(f);
            }
        }
    }
    if let Some(base) = &cfg.base_url {
        let url = format!("{}/{}", base.trim_end_matches('/'), label);
        match ureq::get(&url).call() {
            Ok(mut resp) => {
                let body = resp.body_mut().read_to_string().map_err(|e| CurveError::Fetch(e.to_string()))?;
                let facts = parse_record(0, body.trim())?;
                if let Some(path) = &cached {
                    if let Some(parent) = path.parent() {
                        std::fs::create_dir_all(parent)?;
                    }
                    std::fs::write(path, serde_json::to_string(&facts).expect("serializable"))?;
                }
                return Ok(facts);
            }
            Err(e) => log::warn!("fetch of {label} failed ({e}); using bundled fixtures"),
        }
    }
    bundled_curve(label).ok_or_else(|| CurveError::UnknownLabel(label.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y2_x3_x_over_f3() {
        let c = FpCurve::new(3, [0, 0, 0, 1, 0]).unwrap();
        let d = count_points(&c).unwrap();
        assert_eq!(d.n, 4);
        assert_eq!(d.a_ell, 0);
    }

    #[test]
    fn counting_agrees_with_enumeration() {
        let c = FpCurve::new(101, [1, 1, 0, -3632, 82757]).unwrap();
        assert_eq!(c.count(), c.points().len() as u64);
    }

    #[test]
    fn rational_point_arithmetic() {
        let c = RationalCurve::from_ints([0, 0, 1, 0, 20]);
        let p = CurvePoint::from_ints(-2, 3);
        assert!(c.is_on_curve(&p));
        let p3 = c.mul(3, &p);
        assert!(c.is_on_curve(&p3));
        assert_eq!(c.add(&p3, &c.neg(&p3)), CurvePoint::Infinity);
        assert_eq!(c.add(&c.mul(2, &p), &p), p3);
    }

    #[test]
    fn point_parsing() {
        assert_eq!("(-2,3)".parse::<CurvePoint>().unwrap(), CurvePoint::from_ints(-2, 3));
        assert_eq!("O".parse::<CurvePoint>().unwrap(), CurvePoint::Infinity);
        assert!("1".parse::<CurvePoint>().is_err());
    }

    #[test]
    fn allowed_traces_mod_17() {
        assert_eq!(allowed_traces(17, 3, (6, 11), SignMode::Independent), vec![5, 8, 9, 12]);
    }

    #[test]
    fn zero_discriminant_rejected() {
        let line = r#"{"schema":1,"label":"x","a_invariants":["0","0","0","0","0"],"torsion_structure":[],"isogeny_degrees":[]}"#;
        assert!(matches!(parse_curve_facts(line), Err(CurveError::Schema { index: 0, .. })));
    }
}
