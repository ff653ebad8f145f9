//! Generating-function layer: the mapping `Xi`, the implicit function
//! `Theta`, the series `Sigma` with its radius `R(nu)`, the inverse mapping
//! `Omega`, and finite-order checks of the OGF and EGF transforms of
//! `S = B(x, nu) T`.

use num_complex::Complex64 as Cx;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inversion::{apply_tri, build_b, MatrixParams, Seq};
use crate::series::PowerSeries;
use crate::special_fn::{confluent_phi, ln_gamma, nonpositive_integer};
use crate::check_finite;

/// Parameters `(x, nu)` and the truncation order of the series checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfParams {
    pub x: Cx,
    pub nu: Cx,
    pub order: usize,
}

impl GfParams {
    pub fn new(x: Cx, nu: Cx, order: usize) -> Result<Self> {
        check_finite("x", x)?;
        check_finite("nu", nu)?;
        if order == 0 {
            return Err(Error::Domain("series order must be at least 1".into()));
        }
        Ok(Self { x, nu, order })
    }
}

const ONE: Cx = Cx::new(1.0, 0.0);
const ZERO: Cx = Cx::new(0.0, 0.0);

/// True when `base` lies within `1e-8` (relative) of the principal cut.
pub fn near_branch_cut(base: Cx) -> bool {
    base.re < 0.0 && base.im.abs() <= 1e-8 * base.norm()
}

fn xi_base(z: Cx, x: Cx) -> Result<Cx> {
    if z == ONE {
        return Err(Error::Pole { at: "z = 1".into() });
    }
    let den = 1.0 - z * (1.0 - x);
    if den == ZERO {
        return Err(Error::Pole { at: format!("z = 1/(1-x) = {z}") });
    }
    Ok((1.0 - z) / den)
}

/// `Xi(z) = z/(z-1) ((1-z)/(1-z(1-x)))^nu`, principal power.
pub fn xi(z: Cx, p: &GfParams) -> Result<Cx> {
    let base = xi_base(z, p.x)?;
    Ok(z / (z - 1.0) * base.powc(p.nu))
}

/// Whether `Xi(z)` was evaluated next to the cut of its `nu`-power.
pub fn xi_near_cut(z: Cx, p: &GfParams) -> Result<bool> {
    Ok(near_branch_cut(xi_base(z, p.x)?))
}

/// `u log u` with the convention `0 log 0 = 0`.
fn xlogx(u: Cx, v: Cx) -> Cx {
    if u == ZERO {
        ZERO
    } else {
        u * v.ln()
    }
}

/// `psi(nu)` from the three-way case split on `nu`.
pub fn psi_nu(nu: Cx) -> Cx {
    let real = nu.im == 0.0;
    if real && nu.re >= 1.0 {
        xlogx(1.0 - nu, nu - 1.0) + xlogx(nu, nu)
    } else if real && nu.re >= 0.0 {
        xlogx(1.0 - nu, 1.0 - nu) + xlogx(nu, nu)
    } else {
        xlogx(1.0 - nu, 1.0 - nu) + xlogx(nu, -nu)
    }
}

/// Radius of convergence `R(nu) = exp(-Re psi(nu))` of `Sigma`.
pub fn radius_r(nu: Cx) -> f64 {
    (-psi_nu(nu).re).exp()
}

fn check_radius(w: Cx, nu: Cx, fraction: f64) -> Result<f64> {
    let r = radius_r(nu);
    if w.norm() > fraction * r {
        return Err(Error::Radius { modulus: w.norm(), radius: fraction * r });
    }
    Ok(r)
}

fn theta_residual(t: Cx, w: Cx, nu: Cx) -> Cx {
    1.0 - t + w * t.powc(1.0 - nu)
}

fn newton_theta(w: Cx, nu: Cx, seed: Cx) -> Option<Cx> {
    let mut t = seed;
    for _ in 0..60 {
        let g = theta_residual(t, w, nu);
        let dg = -1.0 + w * (1.0 - nu) * t.powc(-nu);
        if dg == ZERO {
            return None;
        }
        let step = g / dg;
        t -= step;
        if !(t.re.is_finite() && t.im.is_finite()) {
            return None;
        }
        if step.norm() <= 1e-15 * t.norm() {
            break;
        }
    }
    (theta_residual(t, w, nu).norm() <= 1e-12).then_some(t)
}

/// Solution of `1 - Theta + w Theta^{1-nu} = 0` with `Theta(0) = 1`, obtained
/// by Newton continuation along the segment `0 -> w`.
pub fn theta(w: Cx, nu: Cx) -> Result<Cx> {
    check_finite("w", w)?;
    check_finite("nu", nu)?;
    check_radius(w, nu, 0.95)?;
    if w == ZERO {
        return Ok(ONE);
    }
    'refine: for steps in [8usize, 16, 32] {
        let mut t = ONE;
        for j in 1..=steps {
            let wj = w * (j as f64 / steps as f64);
            match newton_theta(wj, nu, t) {
                Some(next) if (next - t).norm() < 0.2 => t = next,
                _ => continue 'refine,
            }
        }
        return Ok(t);
    }
    Err(Error::NonConvergence { what: "Theta continuation", iterations: 32 })
}

/// Taylor coefficient `sigma_b = Gamma(b(1-nu)) / (Gamma(b) Gamma(1-b nu))`.
pub fn sigma_coeff(b: usize, nu: Cx) -> Result<Cx> {
    let bf = b as f64;
    let num = bf * (1.0 - nu);
    let den = 1.0 - bf * nu;
    match (nonpositive_integer(num), nonpositive_integer(den)) {
        (None, Some(_)) => Ok(ZERO),
        (None, None) => Ok((ln_gamma(num)? - ln_gamma(Cx::new(bf, 0.0))? - ln_gamma(den)?).exp()),
        // ratio of residues of Gamma at -p and -q
        (Some(p), Some(q)) => {
            let sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
            let lf = |n: u64| ln_gamma(Cx::new(n as f64 + 1.0, 0.0));
            Ok(sign * (lf(q)? - lf(p)? - ln_gamma(Cx::new(bf, 0.0))?).exp())
        }
        (Some(_), None) => Err(Error::Pole { at: format!("Gamma({num}) in sigma_{b}") }),
    }
}

/// Partial sum together with a geometric estimate of the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSum {
    pub value: Cx,
    pub tail_bound: f64,
}

/// `sum_{b=1}^{terms} sigma_b w^b` for `|w| <= 0.8 R(nu)`.
pub fn sigma_series(w: Cx, nu: Cx, terms: usize) -> Result<SeriesSum> {
    check_finite("w", w)?;
    let r = check_radius(w, nu, 0.8)?;
    let mut value = ZERO;
    let mut pow = ONE;
    let mut last = 0.0;
    for b in 1..=terms {
        pow *= w;
        let term = sigma_coeff(b, nu)? * pow;
        value += term;
        last = term.norm();
    }
    let q = w.norm() / r;
    Ok(SeriesSum { value, tail_bound: last * q / (1.0 - q) })
}

/// `Sigma(w) = (Theta(w) - 1) / (nu Theta(w) + 1 - nu)`.
pub fn sigma_closed(w: Cx, nu: Cx) -> Result<Cx> {
    let t = theta(w, nu)?;
    let den = nu * t + 1.0 - nu;
    if den == ZERO {
        return Err(Error::ZeroDenominator("Sigma closed form"));
    }
    Ok((t - 1.0) / den)
}

/// `|w Sigma'(w) - Sigma (1 - nu Sigma)(1 + (1 - nu) Sigma)|` with `Sigma'`
/// from a fourth-order central difference of step `1e-4 R(nu)`.
pub fn ode_residual(w: Cx, nu: Cx) -> Result<f64> {
    let h = 1e-4 * radius_r(nu);
    let s = |d: f64| sigma_closed(w + d, nu);
    let deriv = (-s(2.0 * h)? + 8.0 * s(h)? - 8.0 * s(-h)? + s(-2.0 * h)?) / (12.0 * h);
    let sig = sigma_closed(w, nu)?;
    Ok((w * deriv - sig * (1.0 - nu * sig) * (1.0 + (1.0 - nu) * sig)).norm())
}

/// Inverse mapping `Omega(xi) = Sigma(x xi) / ((1 - x(1-nu)) Sigma(x xi) - x)`.
pub fn omega(xi_val: Cx, p: &GfParams) -> Result<Cx> {
    if p.x == ZERO {
        return Err(Error::Domain("Omega needs x != 0".into()));
    }
    let w = p.x * xi_val;
    let r = radius_r(p.nu);
    if w.norm() >= r {
        return Err(Error::Radius { modulus: w.norm(), radius: r });
    }
    let sig = sigma_closed(w, p.nu)?;
    let den = (1.0 - p.x * (1.0 - p.nu)) * sig - p.x;
    if den == ZERO {
        return Err(Error::ZeroDenominator("Omega"));
    }
    Ok(sig / den)
}

/// Taylor coefficients of `Xi` at 0 up to `order`.
pub fn xi_series(p: &GfParams) -> Result<PowerSeries> {
    let n = p.order;
    // nu (log(1-z) - log(1-(1-x)z)) = nu sum_j ((1-x)^j - 1) z^j / j
    let mut log_coeffs = vec![ZERO; n + 1];
    let mut q = ONE;
    for (j, c) in log_coeffs.iter_mut().enumerate().skip(1) {
        q *= 1.0 - p.x;
        *c = p.nu * (q - 1.0) / j as f64;
    }
    let power = PowerSeries::from_coeffs(log_coeffs, n).exp();
    // z/(z-1) = -(z + z^2 + ...)
    let pole = PowerSeries::from_coeffs((0..=n).map(|j| if j == 0 { ZERO } else { -ONE }).collect(), n);
    Ok(pole.mul(&power))
}

/// Taylor coefficients of `(1-nu)/(1-z) + nu/(1-z(1-x))`.
pub fn prefactor_series(p: &GfParams) -> PowerSeries {
    let mut q = ONE;
    let coeffs = (0..=p.order)
        .map(|j| {
            if j > 0 {
                q *= 1.0 - p.x;
            }
            (1.0 - p.nu) + p.nu * q
        })
        .collect();
    PowerSeries::from_coeffs(coeffs, p.order)
}

/// The single zero `1/(1 - x(1-nu))` of the OGF prefactor, if any. The
/// inverse reading of the OGF relation divides by the prefactor and is not
/// valid there.
pub fn prefactor_zero(p: &GfParams) -> Option<Cx> {
    let d = 1.0 - p.x * (1.0 - p.nu);
    (d != ZERO).then(|| 1.0 / d)
}

fn padded(t: &Seq, order: usize) -> Seq {
    let mut v = t.values().to_vec();
    v.resize(order.max(v.len()), ZERO);
    Seq::new(v)
}

/// Maximum coefficient mismatch, through order `p.order`, between the OGF of
/// `S = B T` and `[(1-nu)/(1-z) + nu/(1-z(1-x))] G_T(Xi(z))`. `T` is padded
/// with zeros up to the order.
pub fn ogf_relation_residual(t_seq: &Seq, p: &GfParams) -> Result<f64> {
    let t = padded(t_seq, p.order);
    let b = build_b(&MatrixParams::new(p.x, p.nu, t.len())?)?;
    let s = apply_tri(&b, &t)?;
    let ogf = |q: &Seq| {
        let mut c = vec![ZERO];
        c.extend_from_slice(q.values());
        PowerSeries::from_coeffs(c, p.order)
    };
    let lhs = ogf(&s);
    let rhs = prefactor_series(p).mul(&ogf(&t).compose(&xi_series(p)?)?);
    Ok(lhs.max_abs_diff(&rhs))
}

/// `G*_S(z) = e^z sum_k (-1)^k T_k z^k/k! Phi(k nu; k; -x z)`.
pub fn egf_s(z: Cx, t_seq: &Seq, p: &GfParams) -> Result<Cx> {
    let mut acc = ZERO;
    let mut pow = ONE;
    for k in 1..=t_seq.len() {
        pow *= z / k as f64;
        let tk = t_seq.get(k);
        if tk == ZERO {
            continue;
        }
        let kf = k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * tk * pow * confluent_phi(kf * p.nu, Cx::new(kf, 0.0), -p.x * z)?;
    }
    Ok(z.exp() * acc)
}
