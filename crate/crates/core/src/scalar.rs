//! Scalar abstractions shared by the symbolic and numeric code paths.
//!
//! [`Field`] is the only thing the elimination algorithms need from a
//! transition weight: exact field operations plus a zero test. It is
//! implemented for floats, for `num_rational::Ratio`, and for
//! [`RationalFunction`](crate::ratfunc::RationalFunction), so the same
//! elimination code runs on concrete chains and on parametric ones.
//!
//! [`Coefficient`] narrows this down to the exact coefficient fields that
//! polynomials are built over.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_integer::Integer;
use num_rational::Ratio;
#[allow(unused_imports)]
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Field operations on transition weights.
pub trait Field: Clone + PartialEq + Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;

    fn is_one(&self) -> bool {
        *self == Self::one()
    }

    fn add_ref(&self, rhs: &Self) -> Self;
    fn sub_ref(&self, rhs: &Self) -> Self;
    fn mul_ref(&self, rhs: &Self) -> Self;

    /// `None` when `rhs` is zero.
    fn div_ref(&self, rhs: &Self) -> Option<Self>;

    fn neg_ref(&self) -> Self {
        Self::zero().sub_ref(self)
    }

    fn pow(&self, mut exp: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul_ref(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul_ref(&base);
            }
        }
        acc
    }
}

macro_rules! float_field {
    ($t:ty) => {
        impl Field for $t {
            fn zero() -> Self {
                0.0
            }
            fn one() -> Self {
                1.0
            }
            fn is_zero(&self) -> bool {
                *self == 0.0
            }
            fn add_ref(&self, rhs: &Self) -> Self {
                self + rhs
            }
            fn sub_ref(&self, rhs: &Self) -> Self {
                self - rhs
            }
            fn mul_ref(&self, rhs: &Self) -> Self {
                self * rhs
            }
            fn div_ref(&self, rhs: &Self) -> Option<Self> {
                if *rhs == 0.0 {
                    None
                } else {
                    Some(self / rhs)
                }
            }
        }
    };
}

float_field!(f32);
float_field!(f64);

impl<T> Field for Ratio<T>
where
    T: Integer + Signed + Clone + Debug + Send + Sync + 'static,
{
    fn zero() -> Self {
        <Ratio<T> as num_traits::Zero>::zero()
    }
    fn one() -> Self {
        <Ratio<T> as num_traits::One>::one()
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add_ref(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub_ref(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div_ref(&self, rhs: &Self) -> Option<Self> {
        if num_traits::Zero::is_zero(rhs) {
            None
        } else {
            Some(self / rhs)
        }
    }
    fn neg_ref(&self) -> Self {
        -self.clone()
    }
}

/// Prime used for modular shortcuts (2^61 - 1).
pub const MODULUS: u64 = (1 << 61) - 1;

/// Exact coefficient fields for polynomials.
///
/// Canonical forms of rational functions need a notion of "integral and
/// primitive", so this is implemented for fraction fields of integer types.
pub trait Coefficient: Field + Ord + Hash + Display {
    fn from_i64(v: i64) -> Self;

    fn is_negative(&self) -> bool;

    fn abs_value(&self) -> Self {
        if self.is_negative() {
            self.neg_ref()
        } else {
            self.clone()
        }
    }

    /// Positive scalar `s` such that `s * c` is integral for every `c` in
    /// `coeffs` and the resulting integers share no common factor.
    fn primitive_scale<'a, I>(coeffs: I) -> Self
    where
        I: IntoIterator<Item = &'a Self>,
        Self: 'a;

    /// Image in `Z / MODULUS`, or `None` when the denominator vanishes there.
    fn to_residue(&self) -> Option<u64>;

    /// Parses an unsigned integer or decimal literal (`12`, `0.125`) exactly.
    fn parse_literal(text: &str) -> Option<Self>;
}

impl<T> Coefficient for Ratio<T>
where
    T: Integer
        + Signed
        + Clone
        + Debug
        + Display
        + Hash
        + Send
        + Sync
        + FromPrimitive
        + ToPrimitive
        + 'static,
{
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(T::from_i64(v).expect("integer literal out of range"))
    }

    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }

    fn primitive_scale<'a, I>(coeffs: I) -> Self
    where
        I: IntoIterator<Item = &'a Self>,
    {
        let coeffs: Vec<&Self> = coeffs.into_iter().collect();
        if coeffs.is_empty() {
            return <Self as Field>::one();
        }
        let lcm = coeffs
            .iter()
            .fold(T::one(), |acc, c| acc.lcm(c.denom()));
        let gcd = coeffs.iter().fold(T::zero(), |acc, c| {
            let scaled = c.numer().clone() * (lcm.clone() / c.denom().clone());
            acc.gcd(&scaled)
        });
        if gcd.is_zero() {
            return <Self as Field>::one();
        }
        Ratio::new(lcm, gcd)
    }

    fn to_residue(&self) -> Option<u64> {
        let modulus = T::from_u64(MODULUS)?;
        let reduce = |v: &T| -> u64 {
            let r = v.mod_floor(&modulus);
            r.to_u64().expect("residue fits in u64")
        };
        let den = reduce(self.denom());
        if den == 0 {
            return None;
        }
        Some(mul_mod(reduce(self.numer()), inv_mod(den)))
    }

    fn parse_literal(text: &str) -> Option<Self> {
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{int_part}{frac_part}");
        let numer = T::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10).ok()?;
        let ten = T::from_u32(10)?;
        let mut denom = T::one();
        for _ in 0..frac_part.len() {
            denom = denom * ten.clone();
        }
        Some(Ratio::new(numer, denom))
    }
}

pub(crate) fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % MODULUS as u128) as u64
}

pub(crate) fn add_mod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MODULUS {
        s - MODULUS
    } else {
        s
    }
}

pub(crate) fn sub_mod(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + MODULUS - b
    }
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        exp >>= 1;
    }
    acc
}

pub(crate) fn inv_mod(a: u64) -> u64 {
    pow_mod(a, MODULUS - 2)
}

/// Renders an exact rational with `digits` digits after the decimal point
/// (truncated toward zero).
pub fn format_decimal<T>(value: &Ratio<T>, digits: usize) -> String
where
    T: Integer + Signed + Clone + Display + FromPrimitive,
{
    let negative = value.is_negative();
    let abs = value.abs();
    let ten = T::from_u32(10).expect("ten");
    let int_part = abs.numer().clone() / abs.denom().clone();
    let mut rem = abs.numer().clone() % abs.denom().clone();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if digits > 0 {
        out.push('.');
        for _ in 0..digits {
            rem = rem * ten.clone();
            let d = rem.clone() / abs.denom().clone();
            rem = rem % abs.denom().clone();
            out.push_str(&d.to_string());
        }
    }
    out
}
