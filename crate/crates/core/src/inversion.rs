//! Numeric lower-triangular matrices `A(x, nu)`, `B(x, nu)` and `Q`, the
//! reduced right-hand side and the closed-form solution of the system
//! `sum_l (-1)^l C(b, l) Q_{b,l} E_l = K_b`.
//!
//! Sequences and matrices are indexed from 1 in the public API.

use std::fmt::Write as _;

use num_complex::Complex64 as Cx;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::CxRepr;
use crate::mp::{MpCx, MpFloat};
use crate::quad::{adaptive_gk, QuadSettings};
use crate::special_fn::{hyp2f1, hyp_poly, ln_gamma};
use crate::check_finite;

/// Parameters of a matrix build: the pair `(x, nu)` and the order `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixParams {
    pub x: Cx,
    pub nu: Cx,
    pub n: usize,
}

impl MatrixParams {
    pub fn new(x: Cx, nu: Cx, n: usize) -> Result<Self> {
        check_finite("x", x)?;
        check_finite("nu", nu)?;
        if n == 0 {
            return Err(Error::Domain("matrix order must be at least 1".into()));
        }
        Ok(Self { x, nu, n })
    }

    /// Guard for the operator paths (`Q`, reduced right-hand side, `E`).
    pub fn check_operator_domain(&self) -> Result<()> {
        operator_domain(self.x, self.nu)
    }
}

/// `Re(nu) < 0` and `x` off the closed negative half-line and off 1.
pub fn operator_domain(x: Cx, nu: Cx) -> Result<()> {
    check_finite("x", x)?;
    check_finite("nu", nu)?;
    if !(nu.re < 0.0) {
        return Err(Error::Domain(format!("need Re(nu) < 0, got nu = {nu}")));
    }
    if x.im == 0.0 && x.re <= 0.0 {
        return Err(Error::Domain(format!("x = {x} lies on the negative real axis")));
    }
    if x == Cx::new(1.0, 0.0) {
        return Err(Error::Domain("x = 1 is excluded".into()));
    }
    Ok(())
}

/// Finite sequence `(s_1, ..., s_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq {
    values: Vec<Cx>,
}

impl Seq {
    pub fn new(values: Vec<Cx>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![Cx::new(0.0, 0.0); n] }
    }

    /// Unit sequence `e_k` of length `n`.
    pub fn unit(n: usize, k: usize) -> Self {
        let mut s = Self::zeros(n);
        s.values[k - 1] = Cx::new(1.0, 0.0);
        s
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Element `s_i`, `1 <= i <= n`.
    pub fn get(&self, i: usize) -> Cx {
        self.values[i - 1]
    }

    pub fn values(&self) -> &[Cx] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Seq) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct SeqRepr {
    values: Vec<CxRepr>,
}

impl Serialize for Seq {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeqRepr { values: self.values.iter().map(|&v| v.into()).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Seq {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SeqRepr::deserialize(d)?;
        Ok(Seq::new(r.values.into_iter().map(Cx::from).collect()))
    }
}

/// Lower-triangular complex matrix; row `r` stores columns `1..=r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMatrixNum {
    n: usize,
    rows: Vec<Vec<Cx>>,
}

impl TriMatrixNum {
    /// Builds the matrix from `f(row, col)`, rows in parallel.
    pub fn from_fn<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<Cx> + Sync,
    {
        let rows = (1..=n)
            .into_par_iter()
            .map(|r| (1..=r).map(|c| f(r, c)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (1..=n)
            .map(|r| (1..=r).map(|c| Cx::new(if r == c { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        Self { n, rows }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Entry `(row, col)`; zero above the diagonal.
    pub fn get(&self, row: usize, col: usize) -> Cx {
        if col > row {
            Cx::new(0.0, 0.0)
        } else {
            self.rows[row - 1][col - 1]
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { left: self.n, right: other.n });
        }
        Self::from_fn(self.n, |i, j| Ok((j..=i).map(|l| self.get(i, l) * other.get(l, j)).sum()))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Vec<CxRepr>> =
            self.rows.iter().map(|r| r.iter().map(|&v| v.into()).collect()).collect();
        json!({ "n": self.n, "rows": rows })
    }

    /// One line per row, each entry written as the pair `re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{:e},{:e}", v.re, v.im)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Binomial coefficient as a float (running product, exact for moderate `n`).
pub fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `A_{r,k} = (-1)^k C(r,k) F(k-r, -r nu; -r; x)`.
pub fn build_a(p: &MatrixParams) -> Result<TriMatrixNum> {
    TriMatrixNum::from_fn(p.n, |r, k| {
        let rf = r as f64;
        Ok(sign(k) * binomial(r, k) * hyp_poly(r - k, -rf * p.nu, Cx::new(-rf, 0.0), p.x)?)
    })
}

/// `B_{r,k} = (-1)^k C(r,k) F(k-r, k nu; k; x)`.
pub fn build_b(p: &MatrixParams) -> Result<TriMatrixNum> {
    TriMatrixNum::from_fn(p.n, |r, k| {
        let kf = k as f64;
        Ok(sign(k) * binomial(r, k) * hyp_poly(r - k, kf * p.nu, Cx::new(kf, 0.0), p.x)?)
    })
}

/// `T_r = sum_{k <= r} M_{r,k} S_k`.
pub fn apply_tri(m: &TriMatrixNum, s: &Seq) -> Result<Seq> {
    if m.order() != s.len() {
        return Err(Error::DimensionMismatch { left: m.order(), right: s.len() });
    }
    Ok(Seq::new((1..=m.order()).map(|r| (1..=r).map(|k| m.get(r, k) * s.get(k)).sum()).collect()))
}

/// Forward substitution for `M sol = rhs`.
pub fn solve_tri(m: &TriMatrixNum, rhs: &Seq) -> Result<Seq> {
    if m.order() != rhs.len() {
        return Err(Error::DimensionMismatch { left: m.order(), right: rhs.len() });
    }
    let mut sol: Vec<Cx> = Vec::with_capacity(rhs.len());
    for r in 1..=m.order() {
        let diag = m.get(r, r);
        if diag == Cx::new(0.0, 0.0) {
            return Err(Error::ZeroDiagonal(r));
        }
        let acc: Cx = (1..r).map(|k| m.get(r, k) * sol[k - 1]).sum();
        sol.push((rhs.get(r) - acc) / diag);
    }
    Ok(Seq::new(sol))
}

/// `Gamma(b - b nu) / (Gamma(b) Gamma(1 - b nu))` in log space; all arguments
/// have positive real part when `Re(nu) < 0`.
pub fn gamma_ratio(b: usize, nu: Cx) -> Result<Cx> {
    let bf = b as f64;
    Ok((ln_gamma(bf - bf * nu)? - ln_gamma(Cx::new(bf, 0.0))? - ln_gamma(1.0 - bf * nu)?).exp())
}

fn check_indices(b: usize, ell: usize) -> Result<()> {
    if ell == 0 || ell > b {
        return Err(Error::Domain(format!("need 1 <= l <= b, got b={b}, l={ell}")));
    }
    Ok(())
}

/// `Q_{b,l} = -[Gamma(b)Gamma(1-b nu)/Gamma(b-b nu)] x^{1-b}/(1-x) F(l-b, -b nu; -b; x)`.
pub fn q_coeff(b: usize, ell: usize, x: Cx, nu: Cx) -> Result<Cx> {
    operator_domain(x, nu)?;
    check_indices(b, ell)?;
    let bf = b as f64;
    let f = hyp_poly(b - ell, -bf * nu, Cx::new(-bf, 0.0), x)?;
    let pow = ((1.0 - bf) * x.ln()).exp();
    Ok(-pow / ((1.0 - x) * gamma_ratio(b, nu)?) * f)
}

/// `r(zeta) = (1-zeta)^{-nu} (1-(1-x) zeta)^{nu-1}` on `[0, 1]`.
pub(crate) fn frak_r(zeta: f64, x: Cx, nu: Cx) -> Cx {
    if zeta >= 1.0 {
        return Cx::new(0.0, 0.0);
    }
    (-nu * (1.0 - zeta).ln() + (nu - 1.0) * (1.0 - (1.0 - x) * zeta).ln()).exp()
}

/// `M_{b,l} = int_0^1 zeta^l r(zeta)^b d zeta` by adaptive quadrature.
pub fn m_integral(b: usize, ell: usize, x: Cx, nu: Cx, settings: QuadSettings) -> Result<Cx> {
    operator_domain(x, nu)?;
    let out = adaptive_gk(|z| z.powi(ell as i32) * frak_r(z, x, nu).powu(b as u32), 0.0, 1.0, settings)?;
    Ok(out.value)
}

/// `M_{b,l} = Gamma(l+1)Gamma(1-b nu)/Gamma(2+l-b nu) F(b(1-nu), l+1; 2+l-b nu; 1-x)`, for `|1-x| < 1`.
pub fn m_closed(b: usize, ell: usize, x: Cx, nu: Cx) -> Result<Cx> {
    operator_domain(x, nu)?;
    let (bf, lf) = (b as f64, ell as f64);
    let lg = ln_gamma(Cx::new(lf + 1.0, 0.0))? + ln_gamma(1.0 - bf * nu)? - ln_gamma(2.0 + lf - bf * nu)?;
    Ok(lg.exp() * hyp2f1(bf * (1.0 - nu), Cx::new(lf + 1.0, 0.0), 2.0 + lf - bf * nu, 1.0 - x)?)
}

/// `Q_{b,l} = (l+1-b) M_{b,l} - l c M_{b,l-1}` with `M` by quadrature.
pub fn q_via_m(b: usize, ell: usize, x: Cx, nu: Cx) -> Result<Cx> {
    check_indices(b, ell)?;
    let settings = QuadSettings { abs_tol: 1e-15, rel_tol: 1e-12, ..QuadSettings::default() };
    let c = (1.0 - nu * x) / (1.0 - x);
    let m = m_integral(b, ell, x, nu, settings)?;
    let m_prev = m_integral(b, ell - 1, x, nu, settings)?;
    Ok((ell as f64 + 1.0 - b as f64) * m - ell as f64 * c * m_prev)
}

/// The matrix `Q = (Q_{b,l})`.
pub fn build_q(p: &MatrixParams) -> Result<TriMatrixNum> {
    p.check_operator_domain()?;
    TriMatrixNum::from_fn(p.n, |b, l| q_coeff(b, l, p.x, p.nu))
}

/// Coefficient matrix `(-1)^l C(b,l) Q_{b,l}` of the system for `(E_l)`.
pub fn build_system(p: &MatrixParams) -> Result<TriMatrixNum> {
    p.check_operator_domain()?;
    TriMatrixNum::from_fn(p.n, |b, l| Ok(sign(l) * binomial(b, l) * q_coeff(b, l, p.x, p.nu)?))
}

/// `K~_b = -[Gamma(b-b nu)/(Gamma(b)Gamma(1-b nu))] (1-x) x^{b-1} K_b`.
pub fn reduced_rhs(k: &Seq, x: Cx, nu: Cx) -> Result<Seq> {
    operator_domain(x, nu)?;
    let vals = (1..=k.len())
        .map(|b| {
            let pow = ((b as f64 - 1.0) * x.ln()).exp();
            Ok(-gamma_ratio(b, nu)? * (1.0 - x) * pow * k.get(b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Seq::new(vals))
}

/// Closed-form solution
/// `E_b = (1-x) sum_l (-1)^{l-1} C(b,l) F(l-b, l nu; l; x) x^{l-1} [Gamma(l-l nu)/(Gamma(l)Gamma(1-l nu))] K_l`.
pub fn solve_e0(k: &Seq, x: Cx, nu: Cx) -> Result<Seq> {
    operator_domain(x, nu)?;
    let n = k.len();
    let weights = (1..=n)
        .map(|l| Ok(((l as f64 - 1.0) * x.ln()).exp() * gamma_ratio(l, nu)? * k.get(l)))
        .collect::<Result<Vec<Cx>>>()?;
    let vals = (1..=n)
        .into_par_iter()
        .map(|b| {
            let mut acc = Cx::new(0.0, 0.0);
            for l in 1..=b {
                let lf = l as f64;
                let f = hyp_poly(b - l, lf * nu, Cx::new(lf, 0.0), x)?;
                acc += -sign(l) * binomial(b, l) * f * weights[l - 1];
            }
            Ok((1.0 - x) * acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Seq::new(vals))
}

/// Lower-triangular matrix with multiprecision entries. At larger orders
/// the entries of `A` and `B` grow far beyond the size of their product, so
/// checking `A B = Id` to a fixed absolute tolerance needs more than double
/// precision.
#[derive(Debug, Clone)]
pub struct MpTriMatrix {
    n: usize,
    bits: usize,
    rows: Vec<Vec<MpCx>>,
}

impl MpTriMatrix {
    fn from_fn<F>(n: usize, bits: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> MpCx + Sync,
    {
        let rows = (1..=n).into_par_iter().map(|r| (1..=r).map(|c| f(r, c)).collect()).collect();
        Self { n, bits, rows }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Cx {
        self.rows[row - 1][col - 1].to_cx()
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { left: self.n, right: other.n });
        }
        let bits = self.bits.max(other.bits);
        Ok(Self::from_fn(self.n, bits, |i, j| {
            (j..=i).fold(MpCx::real(0.0, bits), |acc, l| &acc + &(&self.rows[i - 1][l - 1] * &other.rows[l - 1][j - 1]))
        }))
    }

    /// Largest entrywise modulus of `self - Id`, rounded to double.
    pub fn identity_residual(&self) -> f64 {
        let one = MpCx::real(1.0, self.bits);
        let mut worst: f64 = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let d = if r == c { (v - &one).to_cx() } else { v.to_cx() };
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn apply(&self, s: &Seq) -> Result<Seq> {
        if self.n != s.len() {
            return Err(Error::DimensionMismatch { left: self.n, right: s.len() });
        }
        let input: Vec<MpCx> = s.values().iter().map(|&v| MpCx::from_cx(v, self.bits)).collect();
        Ok(Seq::new(self.apply_mp(&input).iter().map(MpCx::to_cx).collect()))
    }

    fn apply_mp(&self, s: &[MpCx]) -> Vec<MpCx> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(s).fold(MpCx::real(0.0, self.bits), |acc, (m, v)| &acc + &(m * v)))
            .collect()
    }

    /// Forward substitution for `self sol = rhs`.
    pub fn solve(&self, rhs: &Seq) -> Result<Seq> {
        let rhs: Vec<MpCx> = rhs.values().iter().map(|&v| MpCx::from_cx(v, self.bits)).collect();
        Ok(Seq::new(self.solve_mp(&rhs)?.iter().map(MpCx::to_cx).collect()))
    }

    /// Solves `self sol = other s` keeping the right-hand side unrounded.
    pub fn solve_of_product(&self, other: &Self, s: &Seq) -> Result<Seq> {
        if other.n != s.len() {
            return Err(Error::DimensionMismatch { left: other.n, right: s.len() });
        }
        let input: Vec<MpCx> = s.values().iter().map(|&v| MpCx::from_cx(v, self.bits)).collect();
        Ok(Seq::new(self.solve_mp(&other.apply_mp(&input))?.iter().map(MpCx::to_cx).collect()))
    }

    fn solve_mp(&self, rhs: &[MpCx]) -> Result<Vec<MpCx>> {
        if self.n != rhs.len() {
            return Err(Error::DimensionMismatch { left: self.n, right: rhs.len() });
        }
        let mut sol: Vec<MpCx> = Vec::with_capacity(self.n);
        for (r, row) in self.rows.iter().enumerate() {
            if row[r].is_zero() {
                return Err(Error::ZeroDiagonal(r + 1));
            }
            let acc = row[..r].iter().zip(&sol).fold(rhs[r].clone(), |acc, (m, v)| &acc - &(m * v));
            sol.push(acc.div(&row[r]));
        }
        Ok(sol)
    }

    /// `self (other s)` without rounding the intermediate sequence.
    pub fn apply_composed(&self, other: &Self, s: &Seq) -> Result<Seq> {
        if self.n != other.n || self.n != s.len() {
            return Err(Error::DimensionMismatch { left: self.n, right: s.len() });
        }
        let input: Vec<MpCx> = s.values().iter().map(|&v| MpCx::from_cx(v, self.bits)).collect();
        let mid = other.apply_mp(&input);
        Ok(Seq::new(self.apply_mp(&mid).iter().map(MpCx::to_cx).collect()))
    }
}

fn mp_int(v: i64, bits: usize) -> MpFloat {
    MpFloat::from(v).with_precision(bits).value()
}

/// `(-1)^k C(r, k) F(k - r, beta; gamma; x)` for integer `gamma`, in
/// multiprecision.
fn signed_entry_mp(r: usize, k: usize, beta: &MpCx, gamma_: i64, x: &MpCx, bits: usize) -> MpCx {
    let m = r - k;
    let mut acc = MpCx::real(1.0, bits);
    for j in (0..m).rev() {
        let jf = j as i64;
        let num = (beta + &MpCx::real(j as f64, bits)).scale(&mp_int(jf - m as i64, bits));
        let ratio = num.div_real(&mp_int((gamma_ + jf) * (jf + 1), bits));
        acc = &MpCx::real(1.0, bits) + &(&ratio * &(x * &acc));
    }
    let mut binom = mp_int(1, bits);
    for j in 0..k.min(r - k) {
        binom = &binom * &mp_int((r - j) as i64, bits) / &mp_int(j as i64 + 1, bits);
    }
    let signed = if k % 2 == 0 { binom } else { -binom };
    acc.scale(&signed)
}

/// `A(x, nu)` evaluated with `bits` of working precision.
pub fn build_a_mp(p: &MatrixParams, bits: usize) -> MpTriMatrix {
    let x = MpCx::from_cx(p.x, bits);
    let nu = MpCx::from_cx(p.nu, bits);
    MpTriMatrix::from_fn(p.n, bits, |r, k| {
        let beta = nu.scale(&mp_int(-(r as i64), bits));
        signed_entry_mp(r, k, &beta, -(r as i64), &x, bits)
    })
}

/// `B(x, nu)` evaluated with `bits` of working precision.
pub fn build_b_mp(p: &MatrixParams, bits: usize) -> MpTriMatrix {
    let x = MpCx::from_cx(p.x, bits);
    let nu = MpCx::from_cx(p.nu, bits);
    MpTriMatrix::from_fn(p.n, bits, |r, k| {
        let beta = nu.scale(&mp_int(k as i64, bits));
        signed_entry_mp(r, k, &beta, k as i64, &x, bits)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_poly::build_a_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Cx {
        Cx::new(re, 0.0)
    }

    fn params(x: Cx, nu: Cx, n: usize) -> MatrixParams {
        MatrixParams::new(x, nu, n).unwrap()
    }

    fn random_seq(rng: &mut ChaCha8Rng, n: usize) -> Seq {
        Seq::new((0..n).map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
    }

    #[test]
    fn a_and_b_examples() {
        let a = build_a(&params(c(0.5), c(-2.0), 3)).unwrap();
        assert_eq!(a.get(2, 1), c(-4.0));
        let b = build_b(&params(c(0.5), c(-2.0), 3)).unwrap();
        assert_eq!(b.get(2, 1), c(-4.0));
        let b = build_b(&params(c(0.5), c(-1.0), 3)).unwrap();
        assert!((b.get(3, 1) - c(-6.0)).norm() < 1e-15);
        for k in 1..=3 {
            assert_eq!(a.get(k, k), c(sign(k)));
            assert_eq!(b.get(k, k), c(sign(k)));
        }
        assert_eq!(build_a(&params(c(0.3), c(0.7), 1)).unwrap().get(1, 1), c(-1.0));
    }

    #[test]
    fn inversion_pair_double_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let x = Cx::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let nu = Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let p = params(x, nu, 8);
            let (a, b) = (build_a(&p).unwrap(), build_b(&p).unwrap());
            let id = TriMatrixNum::identity(8);
            assert!(a.mul(&b).unwrap().max_abs_diff(&id) < 1e-10);
            assert!(b.mul(&a).unwrap().max_abs_diff(&id) < 1e-10);
        }
    }

    #[test]
    fn inversion_pair_multiprecision() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..3 {
            let x = Cx::new(rng.gen_range(-1.4..1.4), rng.gen_range(-1.4..1.4));
            let nu = Cx::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let p = params(x, nu, 30);
            let (a, b) = (build_a_mp(&p, 256), build_b_mp(&p, 256));
            assert!(a.mul(&b).unwrap().identity_residual() < 1e-10);
            assert!(b.mul(&a).unwrap().identity_residual() < 1e-10);
            let num = build_a(&p).unwrap();
            assert!((a.get(30, 1) - num.get(30, 1)).norm() <= 1e-10 * num.get(30, 1).norm());
        }
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = params(Cx::new(0.3, 0.2), c(-1.5), 30);
        let t = random_seq(&mut rng, 30);
        let (am, bm) = (build_a_mp(&p, 256), build_b_mp(&p, 256));
        assert!(am.apply_composed(&bm, &t).unwrap().max_abs_diff(&t) < 1e-10);
        assert!(am.solve_of_product(&am, &t).unwrap().max_abs_diff(&t) < 1e-9 * t.max_abs());
        assert!(bm.solve_of_product(&bm, &t).unwrap().max_abs_diff(&t) < 1e-9 * t.max_abs());
        let e1 = Seq::unit(30, 1);
        assert!((am.solve(&e1).unwrap().get(1) - c(-1.0)).norm() < 1e-15);

        let p = params(Cx::new(0.3, 0.2), c(-1.5), 8);
        let t = random_seq(&mut rng, 8);
        let (a, b) = (build_a(&p).unwrap(), build_b(&p).unwrap());
        assert!(apply_tri(&a, &apply_tri(&b, &t).unwrap()).unwrap().max_abs_diff(&t) < 1e-10);
        assert!(solve_tri(&a, &apply_tri(&a, &t).unwrap()).unwrap().max_abs_diff(&t) < 1e-9 * t.max_abs());
        assert!(solve_tri(&b, &apply_tri(&b, &t).unwrap()).unwrap().max_abs_diff(&t) < 1e-9 * t.max_abs());
        let id = TriMatrixNum::identity(8);
        assert_eq!(apply_tri(&id, &t).unwrap(), t);
        let col = apply_tri(&a, &Seq::unit(8, 1)).unwrap();
        assert!((1..=8).all(|r| col.get(r) == a.get(r, 1)));
    }

    #[test]
    fn solve_tri_edge_cases() {
        let diag = TriMatrixNum::from_fn(3, |r, c| Ok(if r == c { Cx::new(r as f64, 1.0) } else { Cx::new(0.0, 0.0) })).unwrap();
        let rhs = Seq::new(vec![c(1.0), c(2.0), c(3.0)]);
        let sol = solve_tri(&diag, &rhs).unwrap();
        for r in 1..=3 {
            assert!((sol.get(r) - rhs.get(r) / Cx::new(r as f64, 1.0)).norm() < 1e-15);
        }
        let single = TriMatrixNum::from_fn(1, |_, _| Ok(c(4.0))).unwrap();
        assert_eq!(solve_tri(&single, &Seq::new(vec![c(2.0)])).unwrap().get(1), c(0.5));
        let singular = TriMatrixNum::from_fn(2, |r, _| Ok(if r == 2 { c(0.0) } else { c(1.0) })).unwrap();
        assert_eq!(solve_tri(&singular, &Seq::zeros(2)), Err(Error::ZeroDiagonal(2)));
        assert!(apply_tri(&single, &Seq::zeros(2)).is_err());
    }

    #[test]
    fn q_examples() {
        assert!((q_coeff(1, 1, c(0.5), c(-2.0)).unwrap() - c(-2.0)).norm() < 1e-14);
        let (x, nu) = (Cx::new(0.4, 0.1), c(-1.3));
        let q = q_coeff(1, 1, x, nu).unwrap();
        assert!((q + 1.0 / (1.0 - x)).norm() < 1e-14);
        assert!(q_coeff(2, 1, c(0.5), c(0.5)).is_err());
        assert!(q_coeff(2, 1, c(-0.5), c(-1.0)).is_err());
        assert!(q_coeff(2, 1, c(1.0), c(-1.0)).is_err());
        assert!(q_coeff(2, 3, c(0.5), c(-1.0)).is_err());
    }

    #[test]
    fn q_matches_integral_form() {
        let v = q_via_m(3, 2, c(0.5), c(-2.0)).unwrap();
        let q = q_coeff(3, 2, c(0.5), c(-2.0)).unwrap();
        assert!((v - q).norm() <= 1e-9 * q.norm(), "{v} vs {q}");
        let v = q_via_m(1, 1, c(0.5), c(-2.0)).unwrap();
        assert!((v - c(-2.0)).norm() < 1e-10);
        for (b, l, x, nu) in [(5, 3, 0.3, -0.7), (4, 1, 0.8, -1.5), (6, 6, 0.6, -0.4)] {
            let v = q_via_m(b, l, c(x), c(nu)).unwrap();
            let q = q_coeff(b, l, c(x), c(nu)).unwrap();
            assert!((v - q).norm() <= 1e-8 * q.norm(), "({b},{l}): {v} vs {q}");
        }
    }

    #[test]
    fn m_closed_form_agrees() {
        let s = QuadSettings::default();
        for (b, l) in [(2, 0), (3, 2), (4, 4)] {
            let quad = m_integral(b, l, c(0.5), c(-2.0), s).unwrap();
            let closed = m_closed(b, l, c(0.5), c(-2.0)).unwrap();
            assert!((quad - closed).norm() <= 1e-9 * closed.norm());
        }
        assert_eq!(frak_r(0.0, c(0.5), c(-2.0)), c(1.0));
        assert_eq!(frak_r(1.0, c(0.5), c(-2.0)), c(0.0));
    }

    #[test]
    fn reduced_rhs_examples() {
        let (x, nu) = (c(0.5), c(-2.0));
        let k = Seq::new(vec![c(3.0), c(1.0)]);
        let kt = reduced_rhs(&k, x, nu).unwrap();
        assert!((kt.get(1) - c(-1.5)).norm() < 1e-14);
        assert_eq!(reduced_rhs(&Seq::zeros(4), x, nu).unwrap(), Seq::zeros(4));
    }

    #[test]
    fn reduced_system_matches_q_system() {
        // Q-form and A-form of the same system share their solution set.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = params(c(0.5), c(-2.0), 10);
        let e = random_seq(&mut rng, 10);
        let lhs_q = apply_tri(&build_system(&p).unwrap(), &e).unwrap();
        let lhs_a = apply_tri(&build_a(&p).unwrap(), &e).unwrap();
        let kt = reduced_rhs(&lhs_q, p.x, p.nu).unwrap();
        assert!(kt.max_abs_diff(&lhs_a) <= 1e-10 * lhs_a.max_abs());
    }

    #[test]
    fn closed_solution_matches_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (x, nu) = (c(0.5), c(-2.0));
        let k = random_seq(&mut rng, 20);
        let e = solve_e0(&k, x, nu).unwrap();
        let direct = solve_tri(&build_system(&params(x, nu, 20)).unwrap(), &k).unwrap();
        for b in 1..=20 {
            assert!((e.get(b) - direct.get(b)).norm() <= 1e-10 * direct.get(b).norm().max(1e-300));
        }
        assert!((e.get(1) - (1.0 - x) * k.get(1)).norm() < 1e-14);
        assert_eq!(solve_e0(&Seq::zeros(5), x, nu).unwrap(), Seq::zeros(5));
        assert!(solve_e0(&k, x, c(0.2)).is_err());
    }

    #[test]
    fn exact_and_numeric_builders_agree() {
        let exact = build_a_exact(8);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let x = Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let nu = Cx::new(rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
            let num = build_a(&params(x, nu, 8)).unwrap();
            let ev = exact.eval(x, nu);
            for r in 1..=8 {
                for k in 1..=r {
                    let (a, b) = (ev[r - 1][k - 1], num.get(r, k));
                    assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn seq_json_round_trip() {
        let s = Seq::new(vec![Cx::new(1.0, -2.0), c(0.5)]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Seq>(&text).unwrap(), s);
        let m = build_a(&params(c(0.5), c(-2.0), 2)).unwrap();
        assert_eq!(m.to_json()["rows"][1][0]["re"], json!(-4.0));
        assert_eq!(m.to_csv().lines().count(), 2);
    }
}
