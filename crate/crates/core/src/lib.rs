//! Exact symbolic analysis of parametric Markov chains.
//!
//! Transition probabilities and rewards are rational functions over named
//! parameters. Reachability probabilities and expected accumulated rewards
//! are computed by state elimination, and models that are reconfigured only
//! around a declared set of *volatile* states are re-solved incrementally by
//! replaying cached elimination work.
//!
//! The algorithms are generic over the transition weight ([`Field`]); the
//! aliases below fix the exact instantiation used throughout the tools.

pub mod eliminate;
pub mod error;
pub mod families;
pub mod incremental;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod ratfunc;
pub mod scalar;

pub use error::Error;
pub use metrics::{MetricsCounter, OpCounts};
pub use scalar::{Coefficient, Field};

/// Exact arbitrary-precision rational number.
pub type Rational = num_rational::BigRational;
/// Polynomial with exact rational coefficients.
pub type Poly = ratfunc::Polynomial<Rational>;
/// Rational function with exact rational coefficients.
pub type RatFunc = ratfunc::RationalFunction<Rational>;
pub type RatValuation = ratfunc::Valuation<Rational>;
/// Parametric Markov chain over exact rational functions.
pub type ParamPmc = model::Pmc<RatFunc>;
/// Preprocessed parametric model with volatile states and rewards.
pub type ParamVpmc = model::Vpmc<RatFunc>;
/// Elimination cache over exact rational functions.
pub type ParamCache = incremental::EliminationCache<RatFunc>;
/// Reconfiguration over exact rational functions.
pub type ParamDiff = incremental::Diff<RatFunc>;
