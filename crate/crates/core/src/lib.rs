//! Hypergeometric triangular inversion pairs and the inversion of the
//! integro-differential operator `L = c0 * delta o M` on entire functions
//! vanishing at the origin.
//!
//! The crate is organised bottom-up:
//!
//! * [`special_fn`]: complex Gamma, digamma, Pochhammer products, terminating
//!   and confluent hypergeometric series and the finite sums `D_N(lambda, mu)`.
//! * [`quad`]: Gauss-Legendre / Gauss-Kronrod quadrature used by every
//!   integral representation.
//! * [`exact_poly`]: big-rational bivariate polynomials in `(x, nu)` and the
//!   symbolic form of the matrices `A(x, nu)` and `B(x, nu)`.
//! * [`mp`]: multiprecision complex arithmetic for the orders where the
//!   numeric matrices lose double precision.
//! * [`inversion`]: numeric matrices, the coefficient matrix `Q`, triangular
//!   solves and the closed-form solution of the reduced system.
//! * [`genfun`]: generating-function transforms, the implicit function
//!   `Theta`, the series `Sigma` and the inverse mapping `Omega`.
//! * [`operators`]: the operators `L`, `M`, `delta`, the Volterra kernel and
//!   the contour-integral inverse of `L`.

pub mod error;
pub mod exact_poly;
pub mod genfun;
pub mod inversion;
pub mod io;
pub mod mp;
pub mod operators;
pub mod quad;
pub mod series;
pub mod special_fn;

pub use error::{Error, Result};
pub use num_complex::Complex64 as Cx;

/// Rejects NaN and infinite components.
pub fn check_finite(name: &'static str, z: Cx) -> Result<Cx> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFinite { name })
    }
}
