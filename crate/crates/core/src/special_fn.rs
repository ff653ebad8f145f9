//! Complex special functions: Gamma, digamma, Pochhammer products, the
//! terminating and confluent hypergeometric series, and the finite sums
//! `D_N(lambda, mu)`.

use std::f64::consts::PI;

use num_complex::Complex64 as Cx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Maximum number of terms summed by the non-terminating series.
pub const SERIES_TERM_CAP: usize = 10_000;

/// Result of a Gamma evaluation. At a pole both `value` and `log_form` are
/// `None` and `at_pole` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEval {
    pub value: Option<Cx>,
    /// A logarithm of `Gamma(z)`: `exp(log_form) == value`.
    pub log_form: Option<Cx>,
    pub at_pole: bool,
}

/// Returns `Some(n)` when `z` is exactly the non-positive integer `-n`.
pub fn nonpositive_integer(z: Cx) -> Option<u64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        Some((-z.re) as u64)
    } else {
        None
    }
}

/// Lanczos log-Gamma, valid for `Re(z) >= 1/2`.
fn ln_gamma_lanczos(z: Cx) -> Cx {
    let z = z - 1.0;
    let mut acc = Cx::new(LANCZOS_COEF[0], 0.0);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// `ln sin(pi z)` computed without overflow for large `|Im z|`.
fn ln_sin_pi(z: Cx) -> Cx {
    if z.im.abs() < 20.0 {
        return (z * PI).sin().ln();
    }
    let ipz = Cx::i() * PI * z;
    if z.im > 0.0 {
        // sin(pi z) = (i/2) e^{-i pi z} (1 - e^{2 i pi z})
        Cx::new(-std::f64::consts::LN_2, PI / 2.0) - ipz + (1.0 - (2.0 * ipz).exp()).ln()
    } else {
        Cx::new(-std::f64::consts::LN_2, -PI / 2.0) + ipz + (1.0 - (-2.0 * ipz).exp()).ln()
    }
}

/// A logarithm of `Gamma(z)` off the poles. For `Re(z) >= 1/2` this is the
/// principal log-Gamma; below that the reflection formula is used and only
/// `exp` of the result is meaningful.
pub fn ln_gamma(z: Cx) -> Result<Cx> {
    if let Some(n) = nonpositive_integer(z) {
        return Err(Error::Pole { at: format!("-{n}") });
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_lanczos(z))
    } else {
        Ok(Cx::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma_lanczos(1.0 - z))
    }
}

pub fn gamma(z: Cx) -> GammaEval {
    if nonpositive_integer(z).is_some() {
        return GammaEval { value: None, log_form: None, at_pole: true };
    }
    let value = if z.re >= 0.5 {
        ln_gamma_lanczos(z).exp()
    } else {
        PI / ((z * PI).sin() * ln_gamma_lanczos(1.0 - z).exp())
    };
    let log_form = ln_gamma(z).ok();
    GammaEval { value: Some(value), log_form, at_pole: false }
}

/// `1 / Gamma(z)`, an entire function: exactly zero at the poles of Gamma.
pub fn recip_gamma(z: Cx) -> Cx {
    if nonpositive_integer(z).is_some() {
        return Cx::new(0.0, 0.0);
    }
    if z.re >= 0.5 {
        (-ln_gamma_lanczos(z)).exp()
    } else {
        (z * PI).sin() * ln_gamma_lanczos(1.0 - z).exp() / PI
    }
}

/// Convenience wrapper returning `Gamma(z)` or a pole error.
pub fn gamma_value(z: Cx) -> Result<Cx> {
    gamma(z).value.ok_or_else(|| Error::Pole { at: format!("{z}") })
}

/// `psi = Gamma'/Gamma`.
pub fn digamma(z: Cx) -> Result<Cx> {
    if let Some(n) = nonpositive_integer(z) {
        return Err(Error::Pole { at: format!("-{n}") });
    }
    if z.re < 0.5 {
        // psi(z) - psi(1 - z) = -pi cot(pi z)
        let cot = (z * PI).cos() / (z * PI).sin();
        return Ok(digamma(1.0 - z)? - PI * cot);
    }
    let mut z = z;
    let mut acc = Cx::new(0.0, 0.0);
    while z.norm() < 12.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    // Asymptotic expansion with Bernoulli numbers B_2k / (2k).
    const B: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32_760.0,
        1.0 / 12.0,
    ];
    let inv2 = 1.0 / (z * z);
    let mut pow = inv2;
    let mut tail = Cx::new(0.0, 0.0);
    for b in B {
        tail += b * pow;
        pow *= inv2;
    }
    Ok(acc + z.ln() - 0.5 / z - tail)
}

/// Rising factorial `(c)_m = c (c+1) ... (c+m-1)` as a running product.
pub fn pochhammer(c: Cx, m: usize) -> Cx {
    (0..m).fold(Cx::new(1.0, 0.0), |acc, j| acc * (c + j as f64))
}

/// Terminating Gauss series `F(-m, beta; gamma; x)`, summed with running
/// Pochhammer products so that negative-integer `gamma` below `-m` is safe.
pub fn hyp_poly(m: usize, beta: Cx, gamma_: Cx, x: Cx) -> Result<Cx> {
    for j in 0..m {
        if gamma_ + j as f64 == Cx::new(0.0, 0.0) {
            return Err(Error::DenominatorZero { gamma: format!("{gamma_}"), index: j + 1 });
        }
    }
    // Horner on the term ratios: 1 + r_0 x (1 + r_1 x (1 + ...)).
    let mut acc = Cx::new(1.0, 0.0);
    for j in (0..m).rev() {
        let jf = j as f64;
        let ratio = (jf - m as f64) * (beta + jf) / ((gamma_ + jf) * (jf + 1.0));
        acc = 1.0 + ratio * x * acc;
    }
    Ok(acc)
}

fn sum_series(
    what: &'static str,
    mut ratio: impl FnMut(usize) -> Cx,
    terminates_after: Option<usize>,
) -> Result<Cx> {
    let mut term = Cx::new(1.0, 0.0);
    let mut sum = term;
    let mut small_run = 0;
    for j in 0..SERIES_TERM_CAP {
        if terminates_after == Some(j) {
            return Ok(sum);
        }
        term *= ratio(j);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm().max(1e-300) {
            small_run += 1;
            if small_run >= 3 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NonConvergence { what, iterations: SERIES_TERM_CAP })
}

/// Gauss hypergeometric series `F(a, b; c; z)`: terminating for a
/// non-positive integer `a` or `b`, otherwise summed for `|z| < 1`.
pub fn hyp2f1(a: Cx, b: Cx, c: Cx, z: Cx) -> Result<Cx> {
    let stop = match (nonpositive_integer(a), nonpositive_integer(b)) {
        (Some(m), Some(n)) => Some(m.min(n) as usize),
        (Some(m), None) | (None, Some(m)) => Some(m as usize),
        (None, None) => None,
    };
    if let Some(n) = nonpositive_integer(c) {
        if stop.map_or(true, |m| m > n as usize) {
            return Err(Error::DenominatorZero { gamma: format!("{c}"), index: n as usize + 1 });
        }
    }
    if stop.is_none() && z.norm() >= 1.0 {
        return Err(Error::Domain(format!("2F1 series needs |z| < 1, got {z}")));
    }
    sum_series(
        "2F1 series",
        |j| {
            let jf = j as f64;
            (a + jf) * (b + jf) / ((c + jf) * (jf + 1.0)) * z
        },
        stop,
    )
}

/// Confluent hypergeometric (Kummer) function `Phi(alpha; beta; z)`.
/// For `Re(z) < -10` Kummer's transformation `e^z Phi(beta - alpha; beta; -z)`
/// is used, unless the series terminates.
pub fn confluent_phi(alpha: Cx, beta: Cx, z: Cx) -> Result<Cx> {
    if nonpositive_integer(beta).is_some() {
        return Err(Error::Pole { at: format!("beta = {beta}") });
    }
    let stop = nonpositive_integer(alpha).map(|m| m as usize);
    if stop.is_none() && z.re < -10.0 {
        return Ok(z.exp() * confluent_phi(beta - alpha, beta, -z)?);
    }
    sum_series(
        "confluent series",
        |j| {
            let jf = j as f64;
            (alpha + jf) / ((beta + jf) * (jf + 1.0)) * z
        },
        stop,
    )
}

/// Direct evaluation of `D_N(lambda, mu) = sum_{r<N} (-1)^r / (Gamma(1+r-lambda) Gamma(1-r+mu))`.
pub fn d_sum(n: usize, lambda: Cx, mu: Cx) -> Cx {
    (0..n)
        .map(|r| {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            let r = r as f64;
            sign * recip_gamma(1.0 + r - lambda) * recip_gamma(1.0 - r + mu)
        })
        .sum()
}

/// `sin(pi lambda)/pi * psi(c - lambda)` for an integer offset `c`, finite at
/// the poles of psi through `psi(a) = psi(1 - a) - pi cot(pi a)`.
fn sin_psi(lambda: Cx, offset: f64) -> Cx {
    let a = offset - lambda;
    let s = (lambda * PI).sin() / PI;
    if a.re < 0.5 {
        // sin(pi lambda)/pi * (-pi cot(pi a)) reduces to cos(pi lambda) for integer offset.
        let psi = digamma(1.0 - a).expect("Re(1 - a) > 1/2");
        s * psi + (lambda * PI).cos()
    } else {
        s * digamma(a).expect("Re(a) >= 1/2")
    }
}

/// Closed form of `D_N(lambda, mu)`.
pub fn d_closed(n: usize, lambda: Cx, mu: Cx) -> Cx {
    let nf = n as f64;
    if mu != lambda {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let first = recip_gamma(-lambda) * recip_gamma(1.0 + mu);
        let second = sign * recip_gamma(nf - lambda) * recip_gamma(1.0 - nf + mu);
        (first - second) / (mu - lambda)
    } else {
        sin_psi(lambda, 0.0) - sin_psi(lambda, nf)
    }
}

// ---------------------------------------------------------------------------
// Classical hypergeometric identity regression suite.

#[derive(Debug, Clone, Serialize)]
pub struct IdentityOutcome {
    pub identity: &'static str,
    pub cases: usize,
    pub max_residual: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
    pub outcomes: Vec<IdentityOutcome>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.outcomes.iter().map(|o| o.max_residual).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.failures.is_empty() && o.max_residual <= self.tolerance)
    }
}

pub const IDENTITY_TOLERANCE: f64 = 1e-8;

fn residual(lhs: Cx, rhs: Cx) -> f64 {
    (lhs - rhs).norm() / rhs.norm().max(1.0)
}

fn r(v: f64) -> Cx {
    Cx::new(v, 0.0)
}

fn rand_disk(rng: &mut ChaCha8Rng, radius: f64) -> Cx {
    let rho = radius * rng.gen::<f64>().sqrt();
    Cx::from_polar(rho, rng.gen_range(0.0..2.0 * PI))
}

/// `beta F(a, beta+1; g+1; z) = g F(a, beta; g; z) - (g - beta) F(a, beta; g+1; z)`.
pub fn identity_id1(a: Cx, b: Cx, g: Cx, z: Cx) -> Result<(Cx, Cx)> {
    let lhs = b * hyp2f1(a, b + 1.0, g + 1.0, z)?;
    let rhs = g * hyp2f1(a, b, g, z)? - (g - b) * hyp2f1(a, b, g + 1.0, z)?;
    Ok((lhs, rhs))
}

/// Euler transformation `F(a, b; g; z) = (1-z)^{g-a-b} F(g-a, g-b; g; z)`.
pub fn identity_gi0(a: Cx, b: Cx, g: Cx, z: Cx) -> Result<(Cx, Cx)> {
    let lhs = hyp2f1(a, b, g, z)?;
    let rhs = (1.0 - z).powc(g - a - b) * hyp2f1(g - a, g - b, g, z)?;
    Ok((lhs, rhs))
}

/// Derivative rule `F'(a, b; g; z) = (a b / g) F(a+1, b+1; g+1; z)`; the left
/// side is a Cauchy integral of `F` on a small circle around `z`.
pub fn identity_df(a: Cx, b: Cx, g: Cx, z: Cx) -> Result<(Cx, Cx)> {
    let radius = 0.2;
    let nodes = 64;
    let mut acc = Cx::new(0.0, 0.0);
    for j in 0..nodes {
        let e = Cx::from_polar(1.0, 2.0 * PI * j as f64 / nodes as f64);
        acc += hyp2f1(a, b, g, z + radius * e)? / e;
    }
    let lhs = acc / (nodes as f64 * radius);
    let rhs = a * b / g * hyp2f1(a + 1.0, b + 1.0, g + 1.0, z)?;
    Ok((lhs, rhs))
}

/// Terminating connection formula between arguments `1 - x` and `x`.
pub fn identity_idfg(m: usize, b: Cx, g: Cx, x: Cx) -> Result<(Cx, Cx)> {
    let mf = m as f64;
    let lhs = hyp_poly(m, b, g, 1.0 - x)?;
    let ratio = (ln_gamma(g)? + ln_gamma(g - b + mf)? - ln_gamma(g - b)? - ln_gamma(g + mf)?).exp();
    let rhs = ratio * hyp_poly(m, b, b + 1.0 - mf - g, x)?;
    Ok((lhs, rhs))
}

/// Gauss summation `F(-m, b; g; 1) = Gamma(g) Gamma(g+m-b) / (Gamma(g+m) Gamma(g-b))`.
pub fn identity_hyper_f1(m: usize, b: Cx, g: Cx) -> Result<(Cx, Cx)> {
    let a = -(m as f64);
    let lhs = hyp_poly(m, b, g, r(1.0))?;
    let rhs = gamma_value(g)? * gamma_value(g - a - b)? * recip_gamma(g - a) * recip_gamma(g - b);
    Ok((lhs, rhs))
}

/// Euler integral `F(a, b; g; z) = Gamma(g)/(Gamma(b)Gamma(g-b)) int_0^1 t^{b-1}(1-t)^{g-b-1}(1-zt)^{-a} dt`
/// for real `g > b > 0`.
pub fn identity_hyper_gauss(a: f64, b: f64, g: f64, z: Cx) -> Result<(Cx, Cx)> {
    let lhs = hyp2f1(r(a), r(b), r(g), z)?;
    let integral = quad::tanh_sinh(
        |t, one_minus_t| {
            Cx::new(t.powf(b - 1.0) * one_minus_t.powf(g - b - 1.0), 0.0) * (1.0 - z * t).powf(-a)
        },
        1e-14,
    )?;
    let pref = (ln_gamma(r(g))? - ln_gamma(r(b))? - ln_gamma(r(g - b))?).exp();
    Ok((lhs, pref * integral))
}

/// Evaluates both sides of the six classical identities on random admissible
/// parameters. Failures are reported, never raised.
pub fn identity_suite(seed: u64, trials: usize) -> IdentityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::new();

    let mut run = |name: &'static str,
                   rng: &mut ChaCha8Rng,
                   draw: &mut dyn FnMut(&mut ChaCha8Rng) -> (String, Result<(Cx, Cx)>)| {
        let mut max_residual = 0.0f64;
        let mut failures = Vec::new();
        for _ in 0..trials {
            let (label, res) = draw(rng);
            match res {
                Ok((lhs, rhs)) => {
                    let res = residual(lhs, rhs);
                    if !(res <= IDENTITY_TOLERANCE) {
                        failures.push(format!("{label}: residual {res:e}"));
                    }
                    max_residual = max_residual.max(if res.is_nan() { f64::INFINITY } else { res });
                }
                Err(e) => failures.push(format!("{label}: {e}")),
            }
        }
        outcomes.push(IdentityOutcome { identity: name, cases: trials, max_residual, failures });
    };

    run("ID1", &mut rng, &mut |rng| {
        let a = rng.gen_range(-3.0..3.0);
        let b = rng.gen_range(0.5..3.0);
        let g = b + rng.gen_range(0.5..3.0);
        let z = rand_disk(rng, 0.5);
        (format!("a={a} b={b} g={g} z={z}"), identity_id1(r(a), r(b), r(g), z))
    });
    run("GI0", &mut rng, &mut |rng| {
        let a = rng.gen_range(-3.0..3.0);
        let b = rng.gen_range(-3.0..3.0);
        let g = rng.gen_range(0.5..4.0);
        let z = rand_disk(rng, 0.5);
        (format!("a={a} b={b} g={g} z={z}"), identity_gi0(r(a), r(b), r(g), z))
    });
    run("DF", &mut rng, &mut |rng| {
        let a = rng.gen_range(-3.0..3.0);
        let b = rng.gen_range(-3.0..3.0);
        let g = rng.gen_range(0.5..4.0);
        let z = rand_disk(rng, 0.3);
        (format!("a={a} b={b} g={g} z={z}"), identity_df(r(a), r(b), r(g), z))
    });
    run("IDFG", &mut rng, &mut |rng| loop {
        let m = rng.gen_range(0..7usize);
        let g = rng.gen_range(0.3..4.0);
        let b = g - rng.gen_range(0.3..3.0);
        let x = rand_disk(rng, 2.0);
        let denom = b + 1.0 - m as f64 - g;
        // keep the right-hand Pochhammer denominators away from zero
        if (0..m).any(|j| (denom + j as f64).abs() < 1e-2) {
            continue;
        }
        break (format!("m={m} b={b} g={g} x={x}"), identity_idfg(m, r(b), r(g), x));
    });
    run("HyperF1", &mut rng, &mut |rng| {
        let m = rng.gen_range(0..7usize);
        let g = rng.gen_range(0.5..5.0);
        let b = g - rng.gen_range(0.3..4.0);
        (format!("m={m} b={b} g={g}"), identity_hyper_f1(m, r(b), r(g)))
    });
    run("HyperGauss", &mut rng, &mut |rng| {
        let a = rng.gen_range(-3.0..3.0);
        let b = rng.gen_range(0.5..3.0);
        let g = b + rng.gen_range(0.5..3.0);
        let z = rand_disk(rng, 0.5);
        (format!("a={a} b={b} g={g} z={z}"), identity_hyper_gauss(a, b, g, z))
    });

    IdentityReport { seed, trials, tolerance: IDENTITY_TOLERANCE, outcomes }
}
