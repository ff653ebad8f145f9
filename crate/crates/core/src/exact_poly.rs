//! Exact bivariate polynomials in `(x, nu)` over big rationals, and the
//! symbolic matrices `A(x, nu)`, `B(x, nu)`.
//!
//! Terms are kept in a sorted map without zero coefficients, so two
//! polynomials are equal exactly when their maps are equal. That makes
//! `A * B == Id` a structural check with no tolerance.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64 as Cx;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub type Rational = BigRational;

fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Sparse polynomial `sum c_{i,j} x^i nu^j`, keyed by `(deg_x, deg_nu)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BiPoly {
    terms: BTreeMap<(u32, u32), Rational>,
}

impl BiPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn from_int(c: i64) -> Self {
        Self::constant(rat(c))
    }

    pub fn monomial(deg_x: u32, deg_nu: u32, c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((deg_x, deg_nu), c);
        }
        Self { terms }
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, Rational::one())
    }

    pub fn nu() -> Self {
        Self::monomial(0, 1, Rational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, deg_x: u32, deg_nu: u32) -> Rational {
        self.terms.get(&(deg_x, deg_nu)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect() }
    }

    fn add_term(&mut self, key: (u32, u32), c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(key).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    /// Evaluates with every coefficient converted to `f64` only at the end of
    /// its exact accumulation: Horner in `nu` inside Horner in `x`.
    pub fn eval(&self, x: Cx, nu: Cx) -> Cx {
        let max_x = self.terms.keys().map(|k| k.0).max();
        let Some(max_x) = max_x else {
            return Cx::new(0.0, 0.0);
        };
        let mut acc = Cx::new(0.0, 0.0);
        for dx in (0..=max_x).rev() {
            let row: Vec<(u32, f64)> = self
                .terms
                .range((dx, 0)..=(dx, u32::MAX))
                .map(|(k, v)| (k.1, v.to_f64().unwrap_or(f64::NAN)))
                .collect();
            let max_nu = row.iter().map(|r| r.0).max().unwrap_or(0);
            let mut inner = Cx::new(0.0, 0.0);
            let mut it = row.iter().rev().peekable();
            for dn in (0..=max_nu).rev() {
                inner *= nu;
                if let Some(&&(d, c)) = it.peek() {
                    if d == dn {
                        inner += c;
                        it.next();
                    }
                }
            }
            acc = acc * x + inner;
        }
        acc
    }

    /// `(a nu + b)_m` as a polynomial in `nu`.
    pub fn pochhammer_linear_nu(a: i64, b: i64, m: usize) -> Self {
        let mut out = Self::one();
        for j in 0..m {
            let factor = Self::nu().scale(&rat(a)) + Self::from_int(b + j as i64);
            out = &out * &factor;
        }
        out
    }

    /// Triples `[deg_x, deg_nu, "p/q"]`.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|((dx, dn), c)| json!([dx, dn, format!("{}/{}", c.numer(), c.denom())]))
                .collect(),
        )
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let arr = v.as_array().ok_or_else(|| Error::Domain("term list must be an array".into()))?;
        let mut p = Self::zero();
        for t in arr {
            let bad = || Error::Domain(format!("malformed term {t}"));
            let dx = t.get(0).and_then(Value::as_u64).ok_or_else(bad)? as u32;
            let dn = t.get(1).and_then(Value::as_u64).ok_or_else(bad)? as u32;
            let c: Rational = t.get(2).and_then(Value::as_str).ok_or_else(bad)?.parse().map_err(|_| bad())?;
            p.add_term((dx, dn), c);
        }
        Ok(p)
    }
}

impl fmt::Display for BiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, ((dx, dn), c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() { "-" } else if i > 0 { "+" } else { "" };
            if i > 0 {
                write!(f, " {sign} ")?;
            } else {
                write!(f, "{sign}")?;
            }
            let c = c.abs();
            let mut parts = Vec::new();
            if !c.is_one() || (*dx == 0 && *dn == 0) {
                parts.push(c.to_string());
            }
            match dx {
                0 => {}
                1 => parts.push("x".into()),
                d => parts.push(format!("x^{d}")),
            }
            match dn {
                0 => {}
                1 => parts.push("nu".into()),
                d => parts.push(format!("nu^{d}")),
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

impl Add for BiPoly {
    type Output = BiPoly;
    fn add(mut self, rhs: BiPoly) -> BiPoly {
        for (k, v) in rhs.terms {
            self.add_term(k, v);
        }
        self
    }
}

impl Sub for BiPoly {
    type Output = BiPoly;
    fn sub(self, rhs: BiPoly) -> BiPoly {
        self + (-rhs)
    }
}

impl Neg for BiPoly {
    type Output = BiPoly;
    fn neg(self) -> BiPoly {
        Self { terms: self.terms.into_iter().map(|(k, v)| (k, -v)).collect() }
    }
}

impl Mul for &BiPoly {
    type Output = BiPoly;
    fn mul(self, rhs: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero();
        for ((ax, an), a) in &self.terms {
            for ((bx, bn), b) in &rhs.terms {
                out.add_term((ax + bx, an + bn), a * b);
            }
        }
        out
    }
}

impl Mul for BiPoly {
    type Output = BiPoly;
    fn mul(self, rhs: BiPoly) -> BiPoly {
        &self * &rhs
    }
}

/// Lower-triangular matrix of [`BiPoly`] entries, indexed `1 <= col <= row <= n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriMatrixExact {
    n: usize,
    rows: Vec<Vec<BiPoly>>,
}

impl TriMatrixExact {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> BiPoly + Sync) -> Self {
        let rows = (1..=n).into_par_iter().map(|r| (1..=r).map(|k| f(r, k)).collect()).collect();
        Self { n, rows }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |r, k| if r == k { BiPoly::one() } else { BiPoly::zero() })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Entry `(row, col)`, 1-based; zero above the diagonal.
    pub fn get(&self, row: usize, col: usize) -> BiPoly {
        if col > row || row == 0 || col == 0 || row > self.n {
            return BiPoly::zero();
        }
        self.rows[row - 1][col - 1].clone()
    }

    fn entry(&self, row: usize, col: usize) -> &BiPoly {
        &self.rows[row - 1][col - 1]
    }

    pub fn is_identity(&self) -> bool {
        let one = BiPoly::one();
        (1..=self.n).all(|r| (1..=r).all(|k| if r == k { *self.entry(r, k) == one } else { self.entry(r, k).is_zero() }))
    }

    pub fn eval(&self, x: Cx, nu: Cx) -> Vec<Vec<Cx>> {
        self.rows.iter().map(|row| row.iter().map(|p| p.eval(x, nu)).collect()).collect()
    }

    /// `{"n": n, "entries": [{"row", "col", "terms": [[deg_x, deg_nu, "p/q"], ..]}, ..]}`.
    pub fn to_json(&self) -> Value {
        let mut entries = Vec::new();
        for r in 1..=self.n {
            for k in 1..=r {
                entries.push(json!({"row": r, "col": k, "terms": self.entry(r, k).to_json()}));
            }
        }
        json!({"n": self.n, "entries": entries})
    }
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn factorial(m: usize) -> BigInt {
    (1..=m).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Integer Pochhammer `(c)_m`.
fn pochhammer_int(c: i64, m: usize) -> BigInt {
    (0..m).fold(BigInt::one(), |acc, j| acc * BigInt::from(c + j as i64))
}

fn sign(k: usize) -> i64 {
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Shared shape of the two matrices: `(-1)^k C(r,k) sum_m (k-r)_m (a nu)_m / (den)_m / m! x^m`.
fn hyp_entry(r: usize, k: usize, nu_factor: i64, den_start: i64) -> BiPoly {
    let mut sum = BiPoly::zero();
    for m in 0..=(r - k) {
        let num = pochhammer_int(k as i64 - r as i64, m);
        let den = pochhammer_int(den_start, m) * factorial(m);
        let c = Rational::new(num, den);
        let term = BiPoly::pochhammer_linear_nu(nu_factor, 0, m) * BiPoly::monomial(m as u32, 0, Rational::one());
        sum = sum + term.scale(&c);
    }
    sum.scale(&Rational::from_integer(binomial(r, k) * sign(k)))
}

/// `A_{r,k} = (-1)^k C(r,k) F(k-r, -r nu; -r; x)` expanded exactly.
pub fn build_a_exact(n: usize) -> TriMatrixExact {
    TriMatrixExact::from_fn(n, |r, k| hyp_entry(r, k, -(r as i64), -(r as i64)))
}

/// `B_{r,k} = (-1)^k C(r,k) F(k-r, k nu; k; x)` expanded exactly.
pub fn build_b_exact(n: usize) -> TriMatrixExact {
    TriMatrixExact::from_fn(n, |r, k| hyp_entry(r, k, k as i64, k as i64))
}

pub fn mul_tri(p: &TriMatrixExact, q: &TriMatrixExact) -> Result<TriMatrixExact> {
    if p.n != q.n {
        return Err(Error::DimensionMismatch { left: p.n, right: q.n });
    }
    Ok(TriMatrixExact::from_fn(p.n, |i, j| {
        (j..=i).fold(BiPoly::zero(), |acc, l| acc + p.entry(i, l) * q.entry(l, j))
    }))
}

/// Convolution coefficient
/// `U_l^{(n,k)} = sum_{m<=l} (-1)^m (-n nu)_m / ((-n)_m m!) * (k nu)_{l-m} / ((k)_{l-m} (l-m)!)`,
/// a polynomial in `nu` with rational coefficients. Requires `l <= n` so the
/// integer denominators `(-n)_m` never vanish.
pub fn criterion_coefficient(n: usize, k: usize, ell: usize) -> Result<BiPoly> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    if ell > n {
        return Err(Error::Domain(format!("(-{n})_m vanishes for m > {n}; got l={ell}")));
    }
    let mut sum = BiPoly::zero();
    for m in 0..=ell {
        let a = BiPoly::pochhammer_linear_nu(-(n as i64), 0, m)
            .scale(&Rational::new(BigInt::from(sign(m)), pochhammer_int(-(n as i64), m) * factorial(m)));
        let b = BiPoly::pochhammer_linear_nu(k as i64, 0, ell - m)
            .scale(&Rational::new(BigInt::one(), pochhammer_int(k as i64, ell - m) * factorial(ell - m)));
        sum = sum + &a * &b;
    }
    Ok(sum)
}
