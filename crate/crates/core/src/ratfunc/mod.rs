//! Exact sparse multivariate polynomials and rational functions.

mod function;
mod gcd;
mod monomial;
pub mod parse;
mod polynomial;

pub use function::{FunctionDisplay, RationalFunction, Valuation};
pub use gcd::gcd;
pub use monomial::Monomial;
pub use polynomial::{PolyDisplay, Polynomial};
