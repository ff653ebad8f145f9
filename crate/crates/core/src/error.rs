use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} must have finite real and imaginary parts")]
    NonFinite { name: &'static str },

    #[error("pole at {at}")]
    Pole { at: String },

    #[error("Pochhammer denominator ({gamma})_{index} vanishes")]
    DenominatorZero { gamma: String, index: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("|w| = {modulus} outside the admissible disk of radius {radius}")]
    Radius { modulus: f64, radius: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),

    #[error("division by zero in {0}")]
    ZeroDenominator(&'static str),
}
