//! Quadrature rules: Gauss-Legendre nodes, composite Gauss-Legendre with
//! panel doubling, globally adaptive Gauss-Kronrod (7/15) and tanh-sinh for
//! integrable endpoint singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64 as Cx;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances shared by the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-11, max_subdivisions: 4000 }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> Cx>(&self, a: f64, b: f64, mut f: F) -> Cx {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<Cx>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre on `[a, b]` with the panel count doubled until
/// two successive estimates agree to `rel_tol * |I| + abs_tol`.
pub fn integrate_doubling<F: FnMut(f64) -> Cx>(
    mut f: F,
    a: f64,
    b: f64,
    rule: &GaussLegendre,
    settings: QuadSettings,
    max_levels: usize,
) -> Result<Cx> {
    let mut panels = 1usize;
    let mut prev = composite(&mut f, a, b, rule, panels);
    for _ in 0..max_levels {
        panels *= 2;
        let cur = composite(&mut f, a, b, rule, panels);
        if (cur - prev).norm() <= settings.rel_tol * cur.norm() + settings.abs_tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NonConvergence { what: "composite Gauss-Legendre", iterations: max_levels })
}

fn composite<F: FnMut(f64) -> Cx>(f: &mut F, a: f64, b: f64, rule: &GaussLegendre, panels: usize) -> Cx {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            rule.integrate(lo, lo + h, &mut *f)
        })
        .sum()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> Cx>(f: &mut F, a: f64, b: f64) -> (Cx, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        kronrod += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).norm();
    (value, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: Cx,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOutput {
    pub value: Cx,
    pub error_estimate: f64,
    pub subdivisions: usize,
}

/// Globally adaptive Gauss-Kronrod 7/15: bisects the segment with the
/// largest error estimate until the total estimate meets the tolerance.
pub fn adaptive_gk<F: FnMut(f64) -> Cx>(mut f: F, a: f64, b: f64, settings: QuadSettings) -> Result<QuadOutput> {
    let (value, err) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    let mut subdivisions = 0;
    while total_err > settings.abs_tol.max(settings.rel_tol * total.norm()) {
        if subdivisions >= settings.max_subdivisions {
            return Err(Error::NonConvergence { what: "adaptive Gauss-Kronrod", iterations: subdivisions });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&mut f, worst.a, mid);
        let (rv, re) = gk15(&mut f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.err;
        heap.push(Segment { a: worst.a, b: mid, value: lv, err: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, err: re });
        subdivisions += 1;
    }
    // re-sum to shed accumulated update error
    let value = heap.iter().map(|s| s.value).sum();
    let error_estimate = heap.iter().map(|s| s.err).sum();
    Ok(QuadOutput { value, error_estimate, subdivisions })
}

/// Tanh-sinh quadrature on `[0, 1]`. The integrand receives both `t` and
/// `1 - t`, the latter computed without cancellation near `t = 1`.
pub fn tanh_sinh<F: FnMut(f64, f64) -> Cx>(mut f: F, rel_tol: f64) -> Result<Cx> {
    const U_MAX: f64 = 4.0;
    let mut eval = |u: f64| -> Cx {
        let s = PI * u.sinh();
        let t = 1.0 / (1.0 + (-s).exp());
        let one_minus = 1.0 / (1.0 + s.exp());
        let w = PI * u.cosh() * t * one_minus;
        if w == 0.0 || t == 0.0 || one_minus == 0.0 {
            Cx::new(0.0, 0.0)
        } else {
            w * f(t, one_minus)
        }
    };
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= U_MAX {
        let u = k as f64 * h;
        sum += eval(u) + eval(-u);
        k += 1;
    }
    let mut estimate = sum * h;
    for level in 0..12 {
        h *= 0.5;
        // only the new odd nodes are evaluated
        let mut k = 1;
        while k as f64 * h <= U_MAX {
            let u = k as f64 * h;
            sum += eval(u) + eval(-u);
            k += 2;
        }
        let next = sum * h;
        if level >= 2 && (next - estimate).norm() <= rel_tol * next.norm().max(1e-300) {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::NonConvergence { what: "tanh-sinh", iterations: 12 })
}
