//! Complex numbers over binary multiprecision floats, used where the
//! numeric matrices cancel beyond double precision.

use std::ops::{Add, Mul, Sub};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_complex::Complex64 as Cx;

pub type MpFloat = FBig<HalfEven, 2>;

/// Working precision in bits used by default.
pub const DEFAULT_BITS: usize = 256;

fn lift(v: f64, bits: usize) -> MpFloat {
    // every finite f64 is exactly representable
    MpFloat::try_from(v).expect("finite input").with_precision(bits).value()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpCx {
    pub re: MpFloat,
    pub im: MpFloat,
}

impl MpCx {
    pub fn from_cx(z: Cx, bits: usize) -> Self {
        Self { re: lift(z.re, bits), im: lift(z.im, bits) }
    }

    pub fn real(v: f64, bits: usize) -> Self {
        Self { re: lift(v, bits), im: lift(0.0, bits) }
    }

    pub fn to_cx(&self) -> Cx {
        Cx::new(self.re.to_f64().value(), self.im.to_f64().value())
    }

    /// Division by a real value.
    pub fn div_real(&self, d: &MpFloat) -> Self {
        Self { re: &self.re / d, im: &self.im / d }
    }

    pub fn scale(&self, s: &MpFloat) -> Self {
        Self { re: &self.re * s, im: &self.im * s }
    }

    pub fn div(&self, o: &MpCx) -> Self {
        let den = &o.re * &o.re + &o.im * &o.im;
        let re = &self.re * &o.re + &self.im * &o.im;
        let im = &self.im * &o.re - &self.re * &o.im;
        Self { re: re / &den, im: im / &den }
    }

    pub fn is_zero(&self) -> bool {
        self.re == MpFloat::ZERO && self.im == MpFloat::ZERO
    }
}

impl Add for &MpCx {
    type Output = MpCx;
    fn add(self, o: &MpCx) -> MpCx {
        MpCx { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl Sub for &MpCx {
    type Output = MpCx;
    fn sub(self, o: &MpCx) -> MpCx {
        MpCx { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl Mul for &MpCx {
    type Output = MpCx;
    fn mul(self, o: &MpCx) -> MpCx {
        MpCx { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }
}
