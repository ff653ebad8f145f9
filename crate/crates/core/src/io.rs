//! Serde representations shared by the JSON and CSV exports.

use num_complex::Complex64 as Cx;
use serde::{Deserialize, Serialize};

/// Complex number as `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CxRepr {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<Cx> for CxRepr {
    fn from(c: Cx) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<CxRepr> for Cx {
    fn from(c: CxRepr) -> Self {
        Cx::new(c.re, c.im)
    }
}
