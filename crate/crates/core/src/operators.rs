//! The operators `L`, `M` and `delta = z d/dz` on entire functions vanishing
//! at the origin, the factorization `L = c0 delta o M`, the Volterra form of
//! `M E* = K1`, and the contour-integral representation of `L^{-1}`.
//!
//! Functions are carried as [`H0Series`], `f(z) = sum_{l>=1} c_l z^l / l!`.
//! Right-hand sides are often written as `K(z) = sum (-1)^b K_b z^b / b!`;
//! [`H0Series::from_signed`] and [`H0Series::to_signed`] convert between the
//! two conventions.
//!
//! The inverse of `M` is `M^{-1} f = x nu (1-nu) U / (1-x) L^{-1}(z f')`,
//! where the constant `U` is never defined; it is taken to be 1, which makes
//! the prefactor equal to `c0`.

use std::f64::consts::PI;

use num_complex::Complex64 as Cx;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{binomial, frak_r, operator_domain, q_coeff};
use crate::io::CxRepr;
use crate::quad::{adaptive_gk, integrate_doubling, GaussLegendre, QuadSettings};

const ZERO: Cx = Cx::new(0.0, 0.0);
const ONE: Cx = Cx::new(1.0, 0.0);

// ---------------------------------------------------------------------------
// Function representations

/// An entire function together with its derivative.
pub trait Analytic: Sync {
    fn value(&self, z: Cx) -> Cx;

    /// Central difference with step `1e-5 max(1, |z|)` unless overridden.
    fn derivative(&self, z: Cx) -> Cx {
        let h = 1e-5 * z.norm().max(1.0);
        (self.value(z + h) - self.value(z - h)) / (2.0 * h)
    }
}

/// A closure viewed as an [`Analytic`] function.
pub struct FnH0<F>(pub F);

impl<F: Fn(Cx) -> Cx + Sync> Analytic for FnH0<F> {
    fn value(&self, z: Cx) -> Cx {
        (self.0)(z)
    }
}

/// Truncated exponential series `f(z) = sum_{l=1}^{N} c_l z^l / l!`.
#[derive(Debug, Clone, PartialEq)]
pub struct H0Series {
    coeffs: Vec<Cx>,
}

impl H0Series {
    /// Coefficients `c_1, ..., c_N`.
    pub fn new(coeffs: Vec<Cx>) -> Self {
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![ZERO; order] }
    }

    /// From the signed sequence `K_b` with `c_b = (-1)^b K_b`.
    pub fn from_signed(k: &[Cx]) -> Self {
        Self { coeffs: k.iter().enumerate().map(|(i, &v)| if i % 2 == 0 { -v } else { v }).collect() }
    }

    /// The signed sequence `K_b = (-1)^b c_b`.
    pub fn to_signed(&self) -> Vec<Cx> {
        Self::from_signed(&self.coeffs).coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Cx] {
        &self.coeffs
    }

    /// `c_l`, zero beyond the order.
    pub fn coeff(&self, l: usize) -> Cx {
        if l == 0 {
            ZERO
        } else {
            self.coeffs.get(l - 1).copied().unwrap_or(ZERO)
        }
    }

    /// `delta f = z f'`, which keeps the order.
    pub fn delta(&self) -> Self {
        Self { coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| c * (i + 1) as f64).collect() }
    }

    pub fn scale(&self, s: Cx) -> Self {
        Self { coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    /// Modulus `|c_N| |z|^N / N!` of the last retained term.
    pub fn tail_estimate(&self, z: Cx) -> f64 {
        let n = self.order();
        if n == 0 {
            return 0.0;
        }
        let log = self.coeffs[n - 1].norm().ln() + n as f64 * z.norm().ln() - ln_factorial(n);
        log.exp()
    }

    /// Value and whether the tail estimate exceeds `tol * max(1, |f(z)|)`.
    pub fn eval_checked(&self, z: Cx, tol: f64) -> (Cx, bool) {
        let v = self.value(z);
        (v, self.tail_estimate(z) > tol * v.norm().max(1.0))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.order().max(other.order());
        (1..=n).map(|l| (self.coeff(l) - other.coeff(l)).norm()).fold(0.0, f64::max)
    }
}

/// `f(z)` and a truncation warning raised when the tail estimate exceeds
/// `1e-12 max(1, |f(z)|)`.
pub fn eval_h0(f: &H0Series, z: Cx) -> (Cx, bool) {
    f.eval_checked(z, 1e-12)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

impl Analytic for H0Series {
    fn value(&self, z: Cx) -> Cx {
        // Horner on c_l z^l / l! = z/1 (c_1 + z/2 (c_2 + z/3 (...)))
        let mut acc = ZERO;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            acc = (c + acc) * z / (i + 1) as f64;
        }
        acc
    }

    /// Exact: `f'(z) = sum_l c_{l+1} z^l / l!`.
    fn derivative(&self, z: Cx) -> Cx {
        let mut acc = ZERO;
        for (i, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = (c + acc) * z / i as f64;
        }
        self.coeff(1) + acc
    }
}

#[derive(Serialize, Deserialize)]
struct H0Repr {
    order: usize,
    coeffs: Vec<CxRepr>,
    #[serde(default = "exponential")]
    convention: String,
}

fn exponential() -> String {
    "exponential".into()
}

impl Serialize for H0Series {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        H0Repr { order: self.order(), coeffs: self.coeffs.iter().map(|&c| c.into()).collect(), convention: exponential() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for H0Series {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = H0Repr::deserialize(d)?;
        if r.convention != "exponential" {
            return Err(serde::de::Error::custom(format!("unsupported convention {:?}", r.convention)));
        }
        if r.coeffs.len() != r.order {
            return Err(serde::de::Error::custom("order does not match the number of coefficients"));
        }
        Ok(H0Series::new(r.coeffs.into_iter().map(Cx::from).collect()))
    }
}

/// Coefficients `c_l = f^{(l)}(0)` of an [`Analytic`] function recovered by
/// the trapezoidal Cauchy formula on `|z| = radius` with `points` samples.
pub fn refit_h0<F>(f: F, order: usize, radius: f64, points: usize) -> Result<H0Series>
where
    F: Fn(Cx) -> Result<Cx> + Sync,
{
    let samples = (0..points)
        .into_par_iter()
        .map(|j| f(Cx::from_polar(radius, 2.0 * PI * j as f64 / points as f64)))
        .collect::<Result<Vec<_>>>()?;
    let coeffs = (1..=order)
        .map(|l| {
            let s: Cx = samples
                .iter()
                .enumerate()
                .map(|(j, &v)| v * Cx::from_polar(1.0, -2.0 * PI * (j * l) as f64 / points as f64))
                .sum();
            s * (ln_factorial(l) - l as f64 * radius.ln()).exp() / points as f64
        })
        .collect();
    Ok(H0Series::new(coeffs))
}

// ---------------------------------------------------------------------------
// Parameters

/// Hankel-loop discretisation: radius of the circle and Gauss-Legendre node
/// counts (multiples of 16) on the circle and on each leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub rho: f64,
    pub circle_nodes: usize,
    pub leg_nodes: usize,
    pub tol: f64,
    pub max_doublings: usize,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self { rho: 0.5, circle_nodes: 64, leg_nodes: 32, tol: 1e-9, max_doublings: 8 }
    }
}

impl ContourSpec {
    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Domain(format!("contour radius must lie in (0, 1), got {}", self.rho)));
        }
        if self.circle_nodes < 16 || self.leg_nodes < 16 {
            return Err(Error::Domain("contour node counts must be at least 16".into()));
        }
        Ok(())
    }
}

/// Parameters of the operators: `x`, `nu` and the numerical settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParams {
    x: Cx,
    nu: Cx,
    pub quad: QuadSettings,
    pub contour: ContourSpec,
}

impl OperatorParams {
    /// Requires `Re(nu) < 0` and `x` off the negative half-line and off 1.
    pub fn new(x: Cx, nu: Cx) -> Result<Self> {
        operator_domain(x, nu)?;
        Ok(Self { x, nu, quad: QuadSettings { abs_tol: 1e-15, rel_tol: 1e-12, max_subdivisions: 4000 }, contour: ContourSpec::default() })
    }

    /// Parameters for the contour representation only, which needs `Re(nu) < 1`.
    pub fn for_contour(x: Cx, nu: Cx) -> Result<Self> {
        if !(nu.re < 1.0) {
            return Err(Error::Domain(format!("contour representation needs Re(nu) < 1, got {nu}")));
        }
        if x == ZERO || x == ONE || !x.re.is_finite() || !x.im.is_finite() || !nu.im.is_finite() {
            return Err(Error::Domain(format!("invalid x = {x}")));
        }
        Ok(Self { x, nu, quad: QuadSettings::default(), contour: ContourSpec::default() })
    }

    pub fn x(&self) -> Cx {
        self.x
    }

    pub fn nu(&self) -> Cx {
        self.nu
    }

    /// `c = (1 - nu x) / (1 - x)`.
    pub fn c(&self) -> Cx {
        (1.0 - self.nu * self.x) / (1.0 - self.x)
    }

    /// `c0 = x nu (1 - nu) / (1 - x)`.
    pub fn c0(&self) -> Cx {
        self.x * self.nu * (1.0 - self.nu) / (1.0 - self.x)
    }

    fn require_operator_domain(&self) -> Result<()> {
        operator_domain(self.x, self.nu)
    }

    fn real_volterra(&self) -> Result<(f64, f64)> {
        let (x, nu) = (self.x, self.nu);
        if x.im != 0.0 || nu.im != 0.0 || !(x.re > 0.0 && x.re < 1.0) || !(nu.re < 0.0) {
            return Err(Error::Domain(format!("Volterra form needs real x in (0,1) and real nu < 0, got x={x}, nu={nu}")));
        }
        Ok((x.re, nu.re))
    }
}

// ---------------------------------------------------------------------------
// L, M, delta, K1

/// `r(zeta) = (1-zeta)^{-nu} (1-(1-x) zeta)^{nu-1}`.
pub fn r_factor(zeta: f64, p: &OperatorParams) -> Result<Cx> {
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::Domain(format!("zeta = {zeta} outside [0, 1]")));
    }
    Ok(frak_r(zeta, p.x, p.nu))
}

/// `L f(z) = int_0^1 [(1 + z r) f(zeta r z) - c z r f'(zeta r z)] e^{-r z} d zeta`.
pub fn apply_l_quad(f: &dyn Analytic, z: Cx, p: &OperatorParams) -> Result<Cx> {
    p.require_operator_domain()?;
    let c = p.c();
    let integrand = |zeta: f64| {
        let r = frak_r(zeta, p.x, p.nu);
        let arg = zeta * r * z;
        ((1.0 + z * r) * f.value(arg) - c * z * r * f.derivative(arg)) * (-r * z).exp()
    };
    Ok(adaptive_gk(integrand, 0.0, 1.0, p.quad)?.value)
}

/// Image of `f` under `L` at the order of `f`, from
/// `K_b = sum_l (-1)^l C(b,l) Q_{b,l} E_l` with `E_l = c_l(f)`.
pub fn apply_l_series(f: &H0Series, p: &OperatorParams) -> Result<H0Series> {
    p.require_operator_domain()?;
    let n = f.order();
    let k = (1..=n)
        .into_par_iter()
        .map(|b| {
            let mut acc = ZERO;
            for l in 1..=b {
                let e = f.coeff(l);
                if e != ZERO {
                    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binomial(b, l) * q_coeff(b, l, p.x, p.nu)? * e;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(H0Series::from_signed(&k))
}

/// `M f(z) = int_0^1 exp(-(z/x) t^{-nu} (1-(1-x)t)) f((z/x) t^{-nu} (1-t)) dt / t`.
pub fn apply_m_quad(f: &dyn Analytic, z: Cx, p: &OperatorParams) -> Result<Cx> {
    p.require_operator_domain()?;
    if z == ZERO {
        return Ok(ZERO);
    }
    let zx = z / p.x;
    let integrand = |t: f64| {
        if t <= 0.0 {
            return ZERO;
        }
        let tn = (-p.nu * t.ln()).exp();
        (-zx * tn * (1.0 - (1.0 - p.x) * t)).exp() * f.value(zx * tn * (1.0 - t)) / t
    };
    Ok(adaptive_gk(integrand, 0.0, 1.0, p.quad)?.value)
}

/// `delta g(z) = z g'(z)` by a central difference of step `1e-5 max(1, |z|)`.
pub fn delta_numeric<G: Fn(Cx) -> Result<Cx>>(g: G, z: Cx) -> Result<Cx> {
    let h = 1e-5 * z.norm().max(1.0);
    Ok(z * (g(z + h)? - g(z - h)?) / (2.0 * h))
}

/// Both sides of the factorization at `z`: `(L f(z), c0 delta(M f)(z))`.
pub fn factorization_sides(f: &dyn Analytic, z: Cx, p: &OperatorParams) -> Result<(Cx, Cx)> {
    let l = apply_l_quad(f, z, p)?;
    let dm = delta_numeric(|w| apply_m_quad(f, w, p), z)?;
    Ok((l, p.c0() * dm))
}

/// `K1(z) = (1-x)/(nu(1-nu)x) int_0^z K(zeta)/zeta d zeta`, termwise.
pub fn k1_from_k(k: &H0Series, p: &OperatorParams) -> H0Series {
    let s = 1.0 / p.c0();
    H0Series::new(k.coeffs().iter().enumerate().map(|(i, &c)| s * c / (i + 1) as f64).collect())
}

// ---------------------------------------------------------------------------
// Volterra form

/// Maximiser `t_hat = nu/(nu-1)` of `tau(t) = t^{-nu}(1-t)` and the maximum
/// `tau_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolterraGeometry {
    pub nu: f64,
    pub t_hat: f64,
    pub tau_hat: f64,
}

impl VolterraGeometry {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu < 0.0) || !nu.is_finite() {
            return Err(Error::Domain(format!("Volterra geometry needs real nu < 0, got {nu}")));
        }
        let t_hat = nu / (nu - 1.0);
        Ok(Self { nu, t_hat, tau_hat: tau_of(t_hat, nu) })
    }
}

fn tau_of(t: f64, nu: f64) -> f64 {
    t.powf(-nu) * (1.0 - t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Minus,
    Plus,
}

/// Inverse `theta_-` (on `[0, t_hat]`) or `theta_+` (on `[t_hat, 1]`) of
/// `tau(t) = t^{-nu}(1-t)`: bisection followed by a Newton polish.
pub fn theta_pm(tau: f64, branch: Branch, nu: f64) -> Result<f64> {
    let g = VolterraGeometry::new(nu)?;
    if !(0.0..=g.tau_hat).contains(&tau) {
        return Err(Error::Domain(format!("tau = {tau} outside [0, {}]", g.tau_hat)));
    }
    if tau == g.tau_hat {
        return Ok(g.t_hat);
    }
    let (mut lo, mut hi) = match branch {
        Branch::Minus => (0.0, g.t_hat),
        Branch::Plus => (g.t_hat, 1.0),
    };
    if tau == 0.0 {
        return Ok(if branch == Branch::Minus { 0.0 } else { 1.0 });
    }
    // h(t) = tau(t) - tau changes sign on the bracket
    let rising = branch == Branch::Minus;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let above = tau_of(mid, nu) > tau;
        if above == rising {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = t.powf(-nu - 1.0) * (-nu + (nu - 1.0) * t);
        if d == 0.0 {
            break;
        }
        let next = t - (tau_of(t, nu) - tau) / d;
        if next > lo.min(hi) - 1e-12 && next < hi.max(lo) + 1e-12 {
            t = next;
        }
    }
    Ok(t)
}

/// `Psi_{+-}(z, tau) = exp(-(z/x) th^{-nu}(1-(1-x)th)) / (th^{-nu}(-nu + (nu-1) th))`
/// with `th = theta_{+-}(tau)`, for `0 < tau < tau_hat`.
pub fn psi_kernel(z: Cx, tau: f64, branch: Branch, p: &OperatorParams) -> Result<Cx> {
    let (x, nu) = p.real_volterra()?;
    let g = VolterraGeometry::new(nu)?;
    if !(tau > 0.0 && tau < g.tau_hat) {
        return Err(Error::Domain(format!("kernel is evaluated on the open interval (0, {}), got {tau}", g.tau_hat)));
    }
    let th = theta_pm(tau, branch, nu)?;
    Ok(psi_at(z, th, x, nu))
}

fn psi_at(z: Cx, th: f64, x: f64, nu: f64) -> Cx {
    let tn = th.powf(-nu);
    (-(z / x) * tn * (1.0 - (1.0 - x) * th)).exp() / (tn * (-nu + (nu - 1.0) * th))
}

/// Least-squares slope of `log|Psi(z, tau)|` against `log(tau_hat - tau)` at
/// `points` log-spaced values of `1 - tau/tau_hat` in `[lo, hi]`. `None`
/// selects the full kernel `Psi_- - Psi_+`.
pub fn singularity_exponent(z: Cx, p: &OperatorParams, branch: Option<Branch>, lo: f64, hi: f64, points: usize) -> Result<f64> {
    let (_, nu) = p.real_volterra()?;
    let g = VolterraGeometry::new(nu)?;
    let mut pts = Vec::with_capacity(points);
    for j in 0..points {
        let s = lo * (hi / lo).powf(j as f64 / (points - 1) as f64);
        let tau = g.tau_hat * (1.0 - s);
        let v = match branch {
            Some(b) => psi_kernel(z, tau, b, p)?,
            None => psi_kernel(z, tau, Branch::Minus, p)? - psi_kernel(z, tau, Branch::Plus, p)?,
        };
        pts.push(((g.tau_hat * s).ln(), v.norm().ln()));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(u, v)| (a + u, b + v));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), &(u, v)| (a + (u - mx) * (v - my), b + (u - mx) * (u - mx)));
    Ok(sxy / sxx)
}

/// `(z/x) int_0^{tau_hat} [Psi_- - Psi_+](z, tau) E*(z tau / x) d tau`, the
/// left-hand side of the Volterra equation written in the `tau` variable.
/// The piece next to `tau_hat` uses `tau = tau_hat (1 - u^2)`.
pub fn volterra_lhs(e_star: &dyn Analytic, z: Cx, p: &OperatorParams) -> Result<Cx> {
    let (x, nu) = p.real_volterra()?;
    let g = VolterraGeometry::new(nu)?;
    let kernel = |tau: f64| -> Cx {
        let tm = theta_pm(tau, Branch::Minus, nu).expect("tau in range");
        let tp = theta_pm(tau, Branch::Plus, nu).expect("tau in range");
        (psi_at(z, tm, x, nu) - psi_at(z, tp, x, nu)) * e_star.value(z * tau / x)
    };
    let half = 0.5 * g.tau_hat;
    let settings = QuadSettings { abs_tol: 1e-14, rel_tol: 1e-11, max_subdivisions: 4000 };
    let left = adaptive_gk(|tau| if tau <= 0.0 { ZERO } else { kernel(tau) }, 0.0, half, settings)?.value;
    let rule = GaussLegendre::new(16);
    let right = integrate_doubling(
        |u| kernel(g.tau_hat * (1.0 - u * u)) * (2.0 * g.tau_hat * u),
        0.0,
        0.5f64.sqrt(),
        &rule,
        settings,
        12,
    )?;
    Ok(z / x * (left + right))
}

// ---------------------------------------------------------------------------
// Contour representation of L^{-1}

/// Result of a contour evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourEval {
    pub value: Cx,
    pub circle_nodes: usize,
    pub leg_nodes: usize,
    /// Set when `Re(nu) >= 0`: the integrand no longer vanishes at the endpoint.
    pub endpoint_flag: bool,
}

fn composite16(rule: &GaussLegendre, a: f64, b: f64, nodes: usize, f: &(dyn Fn(f64) -> Cx + Sync)) -> Cx {
    let panels = (nodes / rule.nodes.len()).max(1);
    let h = (b - a) / panels as f64;
    (0..panels).into_par_iter().map(|k| rule.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, f)).sum()
}

/// Doubles both node counts until two successive values agree.
fn doubling_loop(spec: &ContourSpec, eval: impl Fn(usize, usize) -> Cx) -> Result<(Cx, usize, usize)> {
    spec.validate()?;
    let (mut nc, mut nl) = (spec.circle_nodes, spec.leg_nodes);
    let mut prev = eval(nc, nl);
    for _ in 0..spec.max_doublings {
        nc *= 2;
        nl *= 2;
        let cur = eval(nc, nl);
        if (cur - prev).norm() <= spec.tol * cur.norm().max(1e-3) {
            return Ok((cur, nc, nl));
        }
        prev = cur;
    }
    Err(Error::NonConvergence { what: "contour node doubling", iterations: spec.max_doublings })
}

/// `int_1^{(0+)} g(t) dt` over the loop that runs from 1 to `rho` on the upper
/// edge (`arg(-t) = -pi`), once round `|t| = rho` counter-clockwise, and back
/// to 1 on the lower edge (`arg(-t) = +pi`). The integrand receives `t`,
/// `log(-t)` on the tracked branch, and the principal `log(1-t)`.
fn loop_about_zero(spec: &ContourSpec, g: &(dyn Fn(Cx, Cx, Cx) -> Cx + Sync)) -> Result<(Cx, usize, usize)> {
    let rho = spec.rho;
    let rule = GaussLegendre::new(16);
    let circle = |phi: f64| {
        let t = Cx::from_polar(rho, phi);
        let lmt = Cx::new(rho.ln(), phi - PI);
        g(t, lmt, (1.0 - t).ln()) * t * Cx::i()
    };
    // s = 1 - (1 - rho) u^2 smooths algebraic behaviour at s = 1
    let legs = |u: f64| {
        let s = 1.0 - (1.0 - rho) * u * u;
        let jac = 2.0 * (1.0 - rho) * u;
        let t = Cx::new(s, 0.0);
        let l1 = Cx::new((1.0 - rho) .ln() + 2.0 * u.ln(), 0.0);
        let lower = g(t, Cx::new(s.ln(), PI), l1);
        let upper = g(t, Cx::new(s.ln(), -PI), l1);
        (lower - upper) * jac
    };
    doubling_loop(spec, |nc, nl| composite16(&rule, 0.0, 2.0 * PI, nc, &circle) + composite16(&rule, 0.0, 1.0, nl, &legs))
}

/// `int_0^{(1+)} g(u) du` over the loop from 0 to `1 - rho` on the lower edge
/// (`arg(u-1) = -pi`), counter-clockwise round `|u - 1| = rho`, and back to 0
/// on the upper edge (`arg(u-1) = +pi`). The integrand receives `u`, the
/// principal `log u` and `log(u-1)` on the tracked branch.
fn loop_about_one(spec: &ContourSpec, g: &(dyn Fn(Cx, Cx, Cx) -> Cx + Sync)) -> Result<(Cx, usize, usize)> {
    let rho = spec.rho;
    let rule = GaussLegendre::new(16);
    let circle = |phi: f64| {
        let w = Cx::from_polar(rho, phi);
        let u = 1.0 + w;
        g(u, u.ln(), Cx::new(rho.ln(), phi)) * w * Cx::i()
    };
    // u = (1 - rho) v^2 near the endpoint u = 0
    let legs = |v: f64| {
        let u = (1.0 - rho) * v * v;
        let jac = 2.0 * (1.0 - rho) * v;
        let lu = Cx::new((1.0 - rho).ln() + 2.0 * v.ln(), 0.0);
        let l1 = (1.0 - u).ln();
        let lower = g(Cx::new(u, 0.0), lu, Cx::new(l1, -PI));
        let upper = g(Cx::new(u, 0.0), lu, Cx::new(l1, PI));
        (lower - upper) * jac
    };
    doubling_loop(spec, |nc, nl| composite16(&rule, -PI, PI, nc, &circle) + composite16(&rule, 0.0, 1.0, nl, &legs))
}

/// `Phi(alpha; beta; Z)` from its loop integral
/// `-(1/2 pi i) Gamma(1-alpha)Gamma(beta)/Gamma(beta-alpha) int_1^{(0+)} e^{Zt} (-t)^{alpha-1} (1-t)^{beta-alpha-1} dt`,
/// valid for `Re(beta - alpha) > 0`. Used to validate the loop machinery.
pub fn phi_contour(alpha: Cx, beta: Cx, z: Cx, spec: &ContourSpec) -> Result<Cx> {
    if !((beta - alpha).re > 0.0) {
        return Err(Error::Domain("loop representation of Phi needs Re(beta - alpha) > 0".into()));
    }
    use crate::special_fn::ln_gamma;
    let g = |t: Cx, lmt: Cx, l1: Cx| (z * t + (alpha - 1.0) * lmt + (beta - alpha - 1.0) * l1).exp();
    let (integral, _, _) = loop_about_zero(spec, &g)?;
    let lg = ln_gamma(1.0 - alpha)? + ln_gamma(beta)? - ln_gamma(beta - alpha)?;
    Ok(-lg.exp() * integral / (2.0 * PI * Cx::i()))
}

/// `L^{-1} K(z) = (1-x)/(2 pi i x) e^z int_1^{(0+)} e^{-x t z} / (t(t-1)) K(x z (-t)^nu (1-t)^{1-nu}) dt`.
pub fn linv_contour(k: &dyn Analytic, z: Cx, p: &OperatorParams) -> Result<ContourEval> {
    let (x, nu) = (p.x, p.nu);
    if !(nu.re < 1.0) {
        return Err(Error::Domain(format!("contour representation needs Re(nu) < 1, got {nu}")));
    }
    let g = |t: Cx, lmt: Cx, l1: Cx| {
        let w = x * z * (nu * lmt + (1.0 - nu) * l1).exp();
        (-x * t * z).exp() / (t * (t - 1.0)) * k.value(w)
    };
    let (integral, nc, nl) = loop_about_zero(&p.contour, &g)?;
    let value = (1.0 - x) / (2.0 * PI * Cx::i() * x) * z.exp() * integral;
    Ok(ContourEval { value, circle_nodes: nc, leg_nodes: nl, endpoint_flag: nu.re >= 0.0 })
}

/// The same inverse after `t -> 1 - t`:
/// `L^{-1} K(z) = (x-1)/(2 pi i x) e^{(1-x) z} int_0^{(1+)} e^{x u z} / (u(u-1)) K(x z u^{1-nu} (u-1)^nu) du`.
pub fn linv_contour_alt(k: &dyn Analytic, z: Cx, p: &OperatorParams) -> Result<ContourEval> {
    p.require_operator_domain()?;
    let (x, nu) = (p.x, p.nu);
    let g = |u: Cx, lu: Cx, lu1: Cx| {
        let w = x * z * ((1.0 - nu) * lu + nu * lu1).exp();
        (x * u * z).exp() / (u * (u - 1.0)) * k.value(w)
    };
    let (integral, nc, nl) = loop_about_one(&p.contour, &g)?;
    let value = (x - 1.0) / (2.0 * PI * Cx::i() * x) * ((1.0 - x) * z).exp() * integral;
    Ok(ContourEval { value, circle_nodes: nc, leg_nodes: nl, endpoint_flag: false })
}

/// `M^{-1} f(z) = c0 L^{-1}(z f')(z)`.
pub fn minv_contour(f: &H0Series, z: Cx, p: &OperatorParams) -> Result<ContourEval> {
    p.require_operator_domain()?;
    let mut out = linv_contour(&f.delta(), z, p)?;
    out.value *= p.c0();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::{solve_e0, Seq};
    use crate::special_fn::confluent_phi;

    fn c(re: f64) -> Cx {
        Cx::new(re, 0.0)
    }

    fn params() -> OperatorParams {
        OperatorParams::new(c(0.5), c(-2.0)).unwrap()
    }

    /// `z e^{a z}` has exponential coefficients `c_l = l a^{l-1}`.
    fn z_exp(a: Cx, order: usize) -> H0Series {
        H0Series::new((1..=order).map(|l| l as f64 * a.powu(l as u32 - 1)).collect())
    }

    fn cubic() -> H0Series {
        let mut v = vec![c(0.0); 24];
        v[0] = c(1.0);
        v[2] = c(1.0);
        H0Series::new(v)
    }

    #[test]
    fn r_factor_examples() {
        let p = params();
        assert_eq!(r_factor(0.0, &p).unwrap(), c(1.0));
        assert_eq!(r_factor(1.0, &p).unwrap(), c(0.0));
        assert!((r_factor(0.5, &p).unwrap() - c(0.25 * 64.0 / 27.0)).norm() < 1e-15);
        assert!(r_factor(1.5, &p).is_err());
    }

    #[test]
    fn h0_series_basics() {
        let f = H0Series::new(vec![c(1.0)]);
        assert_eq!(f.value(c(2.0)), c(2.0));
        assert_eq!(cubic().value(c(0.0)), c(0.0));
        let g = z_exp(c(0.5), 20);
        assert!((g.value(c(1.0)) - c(0.5f64.exp())).norm() < 1e-13);
        assert!((g.derivative(c(1.0)) - c(1.5 * 0.5f64.exp())).norm() < 1e-13);
        assert!(!g.eval_checked(c(1.0), 1e-12).1);
        assert!(g.eval_checked(c(30.0), 1e-12).1);
        let signed = vec![c(3.0), c(-2.0)];
        let h = H0Series::from_signed(&signed);
        assert_eq!(h.coeffs(), &[c(-3.0), c(-2.0)]);
        assert_eq!(h.to_signed(), signed);
        let text = serde_json::to_string(&h).unwrap();
        assert!(text.contains("\"convention\":\"exponential\""));
        assert_eq!(serde_json::from_str::<H0Series>(&text).unwrap(), h);
        assert!(serde_json::from_str::<H0Series>(r#"{"order":1,"coeffs":[{"re":1}],"convention":"ordinary"}"#).is_err());
    }

    /// `L(z e^{(1-x)z}) = -z/(1-x) Phi(1 - 1/nu; 2 - 1/nu; -z)`.
    #[test]
    fn closed_form_image() {
        let p = params();
        let f = z_exp(1.0 - p.x(), 40);
        let a = 1.0 - 1.0 / p.nu();
        for z in [c(0.5), c(1.0), Cx::new(1.0, 0.5)] {
            let v = apply_l_quad(&f, z, &p).unwrap();
            let exact = -z / (1.0 - p.x()) * confluent_phi(a, a + 1.0, -z).unwrap();
            assert!((v - exact).norm() <= 1e-8 * exact.norm(), "{v} vs {exact}");
        }
        // -2 Phi(3/2; 5/2; -1)
        let v = apply_l_quad(&f, c(1.0), &p).unwrap();
        assert!((v.re + 1.136_834_074_922_954).abs() < 1e-8);
        assert_eq!(apply_l_quad(&H0Series::zero(3), c(1.0), &p).unwrap(), c(0.0));
    }

    #[test]
    fn series_and_quadrature_agree() {
        let p = params();
        let f = H0Series::new(vec![c(1.0)]);
        let k = apply_l_series(&f, &p).unwrap();
        assert!((k.coeff(1) + 1.0 / (1.0 - p.x())).norm() < 1e-14);
        assert!((k.to_signed()[0] - 1.0 / (1.0 - p.x())).norm() < 1e-14);

        let f = z_exp(1.0 - p.x(), 24);
        let k = apply_l_series(&f, &p).unwrap();
        for j in 0..10 {
            let z = Cx::from_polar(0.1 * (j + 1) as f64, 0.7 * j as f64);
            let quad = apply_l_quad(&f, z, &p).unwrap();
            assert!((k.value(z) - quad).norm() <= 1e-8 * quad.norm(), "z={z}");
        }
        assert_eq!(apply_l_series(&H0Series::zero(4), &p).unwrap(), H0Series::zero(4));
    }

    #[test]
    fn factorization() {
        let p = params();
        let f = z_exp(1.0 - p.x(), 40);
        for z in [c(0.5), c(1.0), Cx::new(1.0, 0.5)] {
            let (l, m) = factorization_sides(&f, z, &p).unwrap();
            assert!((l - m).norm() <= 1e-7 * l.norm().max(1.0), "{l} vs {m}");
        }
        assert_eq!(apply_m_quad(&f, c(0.0), &p).unwrap(), c(0.0));
        assert_eq!(apply_m_quad(&H0Series::zero(2), c(1.0), &p).unwrap(), c(0.0));
    }

    #[test]
    fn k1_examples() {
        let p = params();
        let k = H0Series::new(vec![c(1.0)]);
        let k1 = k1_from_k(&k, &p);
        let s = (1.0 - p.x()) / (p.nu() * (1.0 - p.nu()) * p.x());
        assert!((k1.coeff(1) - s).norm() < 1e-15);
        let k = cubic();
        let k1 = k1_from_k(&k, &p);
        for b in 1..=24 {
            assert!((k1.coeff(b) * b as f64 * p.c0() - k.coeff(b)).norm() < 1e-15);
        }
        assert_eq!(k1_from_k(&H0Series::zero(3), &p), H0Series::zero(3));
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta_pm(0.0, Branch::Minus, -2.0).unwrap(), 0.0);
        assert_eq!(theta_pm(0.0, Branch::Plus, -2.0).unwrap(), 1.0);
        let g = VolterraGeometry::new(-2.0).unwrap();
        assert!((g.t_hat - 2.0 / 3.0).abs() < 1e-15 && (g.tau_hat - 4.0 / 27.0).abs() < 1e-15);
        assert!((theta_pm(g.tau_hat, Branch::Plus, -2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let t = theta_pm(0.1, Branch::Minus, -2.0).unwrap();
        assert!((t * t * (1.0 - t) - 0.1).abs() <= 1e-13);
        assert!((t - 0.41262).abs() < 5e-5);
        let t = theta_pm(0.1, Branch::Plus, -2.0).unwrap();
        assert!((t * t * (1.0 - t) - 0.1).abs() <= 1e-13 && t > 2.0 / 3.0);
        assert!(theta_pm(0.2, Branch::Minus, -2.0).is_err());
    }

    #[test]
    fn kernel_behaviour() {
        let p = params();
        let g = VolterraGeometry::new(-2.0).unwrap();
        for tau in [1e-4, 1e-6] {
            let v = psi_kernel(c(0.0), tau, Branch::Minus, &p).unwrap();
            assert!((tau * v.re - 0.5).abs() < 0.02, "{}", tau * v.re);
        }
        let v = psi_kernel(c(1.0), 1e-9, Branch::Plus, &p).unwrap();
        assert!(v.re.is_finite());
        assert!(psi_kernel(c(1.0), g.tau_hat, Branch::Minus, &p).is_err());
        let slope = singularity_exponent(c(0.5), &p, None, 1e-6, 1e-3, 12).unwrap();
        assert!((slope + 0.5).abs() <= 0.02, "{slope}");
        let slope = singularity_exponent(c(0.5), &p, Some(Branch::Minus), 1e-6, 1e-3, 12).unwrap();
        assert!((slope + 0.5).abs() <= 0.02, "{slope}");
    }

    #[test]
    fn volterra_consistency() {
        let p = params();
        let mut rngv = vec![c(0.0); 16];
        rngv[0] = c(1.0);
        rngv[1] = c(-0.5);
        rngv[3] = c(0.25);
        let e = H0Series::new(rngv);
        let k = apply_l_series(&e, &p).unwrap();
        let k1 = k1_from_k(&k, &p);
        let z = c(0.5);
        let lhs = volterra_lhs(&e, z, &p).unwrap();
        let rhs = z / p.x() * k1.value(z);
        assert!((lhs - rhs).norm() <= 1e-6 * rhs.norm(), "{lhs} vs {rhs}");
        assert_eq!(volterra_lhs(&H0Series::zero(3), z, &p).unwrap(), c(0.0));
        let complex = OperatorParams::new(Cx::new(0.5, 0.1), c(-2.0)).unwrap();
        assert!(volterra_lhs(&e, z, &complex).is_err());
    }

    #[test]
    fn contour_reproduces_phi() {
        let spec = ContourSpec::default();
        for (b, nu, zz) in [(2.0, -0.5, 0.7), (2.0, -0.35, 0.7), (3.0, 0.4, -1.1)] {
            let (alpha, beta, z) = (c(b * nu), c(b), c(zz));
            let v = phi_contour(alpha, beta, z, &spec).unwrap();
            let s = confluent_phi(alpha, beta, z).unwrap();
            assert!((v - s).norm() <= 1e-8 * s.norm(), "{v} vs {s}");
        }
    }

    #[test]
    fn contour_inverts_l() {
        let p = params();
        let f = cubic();
        let k = apply_l_series(&f, &p).unwrap();
        for j in 0..8 {
            let z = Cx::from_polar(0.125 * (j + 1) as f64, 0.8 * j as f64);
            let v = linv_contour(&k, z, &p).unwrap();
            assert!(!v.endpoint_flag);
            let exact = f.value(z);
            assert!((v.value - exact).norm() <= 1e-6 * exact.norm(), "z={z}: {} vs {exact}", v.value);
        }
        assert_eq!(linv_contour(&H0Series::zero(4), c(0.7), &p).unwrap().value, c(0.0));
    }

    #[test]
    fn alternative_contour_agrees() {
        let p = params();
        let k = apply_l_series(&cubic(), &p).unwrap();
        let a = linv_contour(&k, c(0.7), &p).unwrap().value;
        let b = linv_contour_alt(&k, c(0.7), &p).unwrap().value;
        assert!((a - b).norm() <= 1e-8 * a.norm(), "{a} vs {b}");
        assert_eq!(linv_contour_alt(&H0Series::zero(4), c(0.7), &p).unwrap().value, c(0.0));
        let mut fv = vec![c(0.0); 24];
        fv[0] = c(1.0);
        let k = apply_l_series(&H0Series::new(fv), &p).unwrap();
        let v = linv_contour_alt(&k, c(0.7), &p).unwrap().value;
        assert!((v - c(0.7)).norm() <= 1e-6 * 0.7, "{v}");
    }

    #[test]
    fn contour_solution_matches_closed_form_coefficients() {
        let p = params();
        let mut kv = vec![c(0.0); 10];
        kv[0] = c(1.0);
        kv[1] = c(0.5);
        kv[2] = c(-0.25);
        let k = H0Series::new(kv);
        let e = refit_h0(|z| Ok(linv_contour(&k, z, &p)?.value), 6, 1.0, 32).unwrap();
        let closed = solve_e0(&Seq::new(k.to_signed()), p.x(), p.nu()).unwrap();
        for l in 1..=6 {
            let d = (e.coeff(l) - closed.get(l)).norm();
            assert!(d <= 1e-6 * closed.get(l).norm().max(1.0), "l={l}: {} vs {}", e.coeff(l), closed.get(l));
        }
    }

    #[test]
    fn m_inverse_recovers_solution() {
        let p = params();
        let f = cubic();
        let k1 = k1_from_k(&apply_l_series(&f, &p).unwrap(), &p);
        let z = Cx::new(0.6, 0.2);
        let v = minv_contour(&k1, z, &p).unwrap().value;
        assert!((v - f.value(z)).norm() <= 1e-6 * f.value(z).norm());
    }

    #[test]
    fn domain_guards() {
        assert!(OperatorParams::new(c(0.5), c(0.2)).is_err());
        assert!(OperatorParams::new(c(-0.5), c(-1.0)).is_err());
        assert!(OperatorParams::for_contour(c(0.5), c(0.5)).is_ok());
        assert!(OperatorParams::for_contour(c(0.5), c(1.5)).is_err());
        let p = OperatorParams::for_contour(c(0.5), c(0.5)).unwrap();
        let v = linv_contour(&H0Series::new(vec![c(1.0)]), c(0.3), &p).unwrap();
        assert!(v.endpoint_flag);
        assert!(apply_l_quad(&H0Series::new(vec![c(1.0)]), c(0.3), &p).is_err());
    }
}
