use std::collections::BTreeMap;
use std::fmt;

use super::gcd::gcd;
use super::polynomial::Polynomial;
use crate::scalar::{Coefficient, Field};

/// Fraction of two polynomials in canonical form.
///
/// Canonical form: numerator and denominator share no non-constant factor,
/// their coefficients taken together are coprime integers, and the leading
/// coefficient of the denominator is positive. Zero is `0 / 1`. Two
/// canonical functions are equal as functions iff they are structurally
/// equal, so `PartialEq` is exact function equality.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RationalFunction<C> {
    num: Polynomial<C>,
    den: Polynomial<C>,
}

impl<C: Coefficient> RationalFunction<C> {
    /// Canonical form of `num / den`; `None` if `den` is the zero polynomial.
    pub fn new(num: Polynomial<C>, den: Polynomial<C>) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        if num.is_zero() {
            return Some(Self::from_polynomial(Polynomial::zero()));
        }
        let g = gcd(&num, &den);
        if g.is_constant() {
            return Some(Self::scaled(num, den));
        }
        let num = num.div_exact(&g).expect("gcd divides numerator");
        let den = den.div_exact(&g).expect("gcd divides denominator");
        Some(Self::scaled(num, den))
    }

    pub fn from_polynomial(p: Polynomial<C>) -> Self {
        Self::scaled(p, Polynomial::one())
    }

    pub fn constant(c: C) -> Self {
        Self::from_polynomial(Polynomial::constant(c))
    }

    pub fn from_i64(v: i64) -> Self {
        Self::constant(C::from_i64(v))
    }

    pub fn var(index: usize) -> Self {
        Self::from_polynomial(Polynomial::var(index))
    }

    /// Fixes the scalar unit of an already coprime pair.
    fn scaled(num: Polynomial<C>, den: Polynomial<C>) -> Self {
        if num.is_zero() {
            return RationalFunction {
                num,
                den: Polynomial::one(),
            };
        }
        let mut s = C::primitive_scale(num.coefficients().chain(den.coefficients()));
        if den.leading_coefficient().is_some_and(|c| c.is_negative()) {
            s = s.neg_ref();
        }
        if s.is_one() {
            return RationalFunction { num, den };
        }
        RationalFunction {
            num: num.scale(&s),
            den: den.scale(&s),
        }
    }

    pub fn numerator(&self) -> &Polynomial<C> {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial<C> {
        &self.den
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    pub fn constant_value(&self) -> Option<C> {
        let n = self.num.constant_value()?;
        let d = self.den.constant_value()?;
        n.div_ref(&d)
    }

    /// One past the highest parameter index that occurs.
    pub fn width(&self) -> usize {
        self.num.width().max(self.den.width())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, false)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, true)
    }

    /// Sum or difference via the shared-denominator trick: only the gcd of
    /// the denominators needs to be cancelled against the new numerator.
    fn combine(&self, other: &Self, subtract: bool) -> Self {
        let rhs_num = if subtract {
            other.num.neg()
        } else {
            other.num.clone()
        };
        if other.num.is_zero() {
            return self.clone();
        }
        if self.num.is_zero() {
            return RationalFunction {
                num: rhs_num,
                den: other.den.clone(),
            }
            .rescaled();
        }
        if self.den == other.den {
            let num = self.num.add(&rhs_num);
            return Self::new(num, self.den.clone()).expect("nonzero denominator");
        }
        if self.den.is_constant() && other.den.is_constant() {
            let num = self.num.mul(&other.den).add(&rhs_num.mul(&self.den));
            let den = self.den.mul(&other.den);
            return Self::scaled(num, den);
        }
        let g = gcd(&self.den, &other.den);
        let b = self.den.div_exact(&g).expect("gcd divides");
        let d = other.den.div_exact(&g).expect("gcd divides");
        let num = self.num.mul(&d).add(&rhs_num.mul(&b));
        if num.is_zero() {
            return Self::zero();
        }
        let den = b.mul(&other.den);
        if g.is_constant() {
            return Self::scaled(num, den);
        }
        let h = gcd(&num, &g);
        if h.is_constant() {
            return Self::scaled(num, den);
        }
        Self::scaled(
            num.div_exact(&h).expect("gcd divides"),
            den.div_exact(&h).expect("gcd divides"),
        )
    }

    fn rescaled(self) -> Self {
        Self::scaled(self.num, self.den)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.num.is_zero() || other.num.is_zero() {
            return Self::zero();
        }
        if self.is_polynomial() && other.is_polynomial() {
            return Self::scaled(self.num.mul(&other.num), self.den.mul(&other.den));
        }
        let g1 = gcd(&self.num, &other.den);
        let g2 = gcd(&other.num, &self.den);
        let a = self.num.div_exact(&g1).expect("gcd divides");
        let d = other.den.div_exact(&g1).expect("gcd divides");
        let c = other.num.div_exact(&g2).expect("gcd divides");
        let b = self.den.div_exact(&g2).expect("gcd divides");
        Self::scaled(a.mul(&c), b.mul(&d))
    }

    /// `None` if `self` is zero.
    pub fn recip(&self) -> Option<Self> {
        if self.num.is_zero() {
            return None;
        }
        Some(Self::scaled(self.den.clone(), self.num.clone()))
    }

    /// `None` if `other` is identically zero.
    pub fn div(&self, other: &Self) -> Option<Self> {
        Some(self.mul(&other.recip()?))
    }

    /// Evaluates at a point indexed by parameter position; `None` when the
    /// denominator vanishes there.
    pub fn eval(&self, point: &[C]) -> Option<C> {
        let d = self.den.eval(point);
        self.num.eval(point).div_ref(&d)
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> FunctionDisplay<'a, C> {
        FunctionDisplay { f: self, names }
    }
}

impl<C: Coefficient> Field for RationalFunction<C> {
    fn zero() -> Self {
        RationalFunction {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    fn one() -> Self {
        RationalFunction {
            num: Polynomial::one(),
            den: Polynomial::one(),
        }
    }

    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    fn add_ref(&self, rhs: &Self) -> Self {
        self.add(rhs)
    }

    fn sub_ref(&self, rhs: &Self) -> Self {
        self.sub(rhs)
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        self.mul(rhs)
    }

    fn div_ref(&self, rhs: &Self) -> Option<Self> {
        self.div(rhs)
    }

    fn neg_ref(&self) -> Self {
        RationalFunction {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
}

/// Formats `num` alone for polynomials, otherwise `(num) / (den)`.
pub struct FunctionDisplay<'a, C> {
    f: &'a RationalFunction<C>,
    names: &'a [String],
}

impl<C: Coefficient> fmt::Display for FunctionDisplay<'_, C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.f.den.is_one() {
            return write!(f, "{}", self.f.num.display(self.names));
        }
        write!(
            f,
            "({}) / ({})",
            self.f.num.display(self.names),
            self.f.den.display(self.names)
        )
    }
}

/// Assignment of exact values to named parameters.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Valuation<C> {
    values: BTreeMap<String, C>,
}

impl<C: Coefficient> Valuation<C> {
    pub fn new() -> Self {
        Valuation {
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: C) -> Self {
        self.insert(name, value);
        self
    }

    pub fn insert(&mut self, name: &str, value: C) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<&C> {
        self.values.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &C)> {
        self.values.iter()
    }

    /// Values in parameter order; `Err(name)` for the first parameter left
    /// unassigned.
    pub fn point(&self, params: &[String]) -> Result<Vec<C>, String> {
        params
            .iter()
            .map(|p| self.values.get(p).cloned().ok_or_else(|| p.clone()))
            .collect()
    }
}

impl<C: Coefficient> fmt::Display for Valuation<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}
