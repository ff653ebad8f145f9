//! Truncated power series with complex coefficients.

use num_complex::Complex64 as Cx;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::CxRepr;

/// `sum_{j=0}^{order} coeffs[j] z^j`, truncated at an explicit order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    coeffs: Vec<Cx>,
}

impl PowerSeries {
    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![Cx::new(0.0, 0.0); order + 1] }
    }

    pub fn constant(c: Cx, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// The identity series `z`.
    pub fn variable(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.coeffs[1] = Cx::new(1.0, 0.0);
        }
        s
    }

    /// Pads with zeros or truncates to `order`.
    pub fn from_coeffs(mut coeffs: Vec<Cx>, order: usize) -> Self {
        coeffs.resize(order + 1, Cx::new(0.0, 0.0));
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Cx] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> Cx {
        self.coeffs.get(j).copied().unwrap_or_default()
    }

    pub fn eval(&self, z: Cx) -> Cx {
        self.coeffs.iter().rev().fold(Cx::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        Self { coeffs: (0..=n).map(|j| self.coeffs[j] + other.coeffs[j]).collect() }
    }

    pub fn scale(&self, c: Cx) -> Self {
        Self { coeffs: self.coeffs.iter().map(|&a| a * c).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        let mut out = vec![Cx::new(0.0, 0.0); n + 1];
        for (i, &a) in self.coeffs.iter().enumerate().take(n + 1) {
            if a == Cx::new(0.0, 0.0) {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate().take(n + 1 - i) {
                out[i + j] += a * b;
            }
        }
        Self { coeffs: out }
    }

    /// `1 / self`, requires a non-zero constant term.
    pub fn recip(&self) -> Result<Self> {
        let c0 = self.coeffs[0];
        if c0 == Cx::new(0.0, 0.0) {
            return Err(Error::ZeroDenominator("power series reciprocal"));
        }
        let n = self.order();
        let mut out = vec![Cx::new(0.0, 0.0); n + 1];
        out[0] = 1.0 / c0;
        for k in 1..=n {
            let s: Cx = (1..=k).map(|j| self.coeffs[j] * out[k - j]).sum();
            out[k] = -s / c0;
        }
        Ok(Self { coeffs: out })
    }

    /// `exp(self)` through `k g_k = sum_j j f_j g_{k-j}`.
    pub fn exp(&self) -> Self {
        let n = self.order();
        let mut out = vec![Cx::new(0.0, 0.0); n + 1];
        out[0] = self.coeffs[0].exp();
        for k in 1..=n {
            let s: Cx = (1..=k).map(|j| j as f64 * self.coeffs[j] * out[k - j]).sum();
            out[k] = s / k as f64;
        }
        Self { coeffs: out }
    }

    /// Principal `log(self)`, requires a non-zero constant term.
    pub fn ln(&self) -> Result<Self> {
        let c0 = self.coeffs[0];
        if c0 == Cx::new(0.0, 0.0) {
            return Err(Error::ZeroDenominator("power series logarithm"));
        }
        let n = self.order();
        let mut out = vec![Cx::new(0.0, 0.0); n + 1];
        out[0] = c0.ln();
        // f l' = f'  =>  k f_0 l_k = k f_k - sum_{j=1}^{k-1} j l_j f_{k-j}
        for k in 1..=n {
            let s: Cx = (1..k).map(|j| j as f64 * out[j] * self.coeffs[k - j]).sum();
            out[k] = (k as f64 * self.coeffs[k] - s) / (k as f64 * c0);
        }
        Ok(Self { coeffs: out })
    }

    /// `self(inner(z))` for an inner series without constant term.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if inner.coeffs[0] != Cx::new(0.0, 0.0) {
            return Err(Error::Domain("inner series of a composition must vanish at 0".into()));
        }
        let n = self.order().min(inner.order());
        let inner = Self::from_coeffs(inner.coeffs.clone(), n);
        // Horner in the ring of truncated series
        let mut acc = Self::zero(n);
        for &c in self.coeffs.iter().take(n + 1).rev() {
            acc = acc.mul(&inner);
            acc.coeffs[0] += c;
        }
        Ok(acc)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.order().min(other.order());
        (0..=n).map(|j| (self.coeffs[j] - other.coeffs[j]).norm()).fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct PowerSeriesRepr {
    order: usize,
    coeffs: Vec<CxRepr>,
}

impl Serialize for PowerSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PowerSeriesRepr { order: self.order(), coeffs: self.coeffs.iter().map(|&c| c.into()).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PowerSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PowerSeriesRepr::deserialize(d)?;
        let coeffs = repr.coeffs.into_iter().map(Cx::from).collect();
        Ok(PowerSeries::from_coeffs(coeffs, repr.order))
    }
}
