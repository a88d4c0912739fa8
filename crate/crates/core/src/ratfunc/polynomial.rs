use std::collections::BTreeMap;
use std::fmt;

use super::monomial::Monomial;
use crate::scalar::{add_mod, mul_mod, pow_mod, Coefficient};

/// Sparse multivariate polynomial.
///
/// Terms are kept sorted by descending monomial order and never carry a
/// zero coefficient; the empty term list is the zero polynomial.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Polynomial<C> {
    terms: Vec<(Monomial, C)>,
}

impl<C: Coefficient> Polynomial<C> {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    pub fn constant(c: C) -> Self {
        Self::monomial(Monomial::one(), c)
    }

    pub fn monomial(m: Monomial, c: C) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            Polynomial { terms: vec![(m, c)] }
        }
    }

    /// The parameter with position `index`.
    pub fn var(index: usize) -> Self {
        Self::monomial(Monomial::var(index, 1), C::one())
    }

    /// Collects arbitrary terms, merging duplicates and dropping zeros.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, C)>>(terms: I) -> Self {
        let mut acc: BTreeMap<Monomial, C> = BTreeMap::new();
        for (m, c) in terms {
            match acc.get_mut(&m) {
                Some(existing) => *existing = existing.add_ref(&c),
                None => {
                    acc.insert(m, c);
                }
            }
        }
        Polynomial {
            terms: acc.into_iter().rev().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn terms(&self) -> &[(Monomial, C)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].0.is_one())
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.is_one() && self.terms[0].1.is_one()
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    /// Value of a constant polynomial.
    pub fn constant_value(&self) -> Option<C> {
        match self.terms.as_slice() {
            [] => Some(C::zero()),
            [(m, c)] if m.is_one() => Some(c.clone()),
            _ => None,
        }
    }

    pub fn leading_term(&self) -> Option<&(Monomial, C)> {
        self.terms.first()
    }

    pub fn leading_coefficient(&self) -> Option<&C> {
        self.terms.first().map(|(_, c)| c)
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &C> {
        self.terms.iter().map(|(_, c)| c)
    }

    /// Total degree; zero for the zero polynomial.
    pub fn total_degree(&self) -> u32 {
        self.terms.first().map(|(m, _)| m.degree()).unwrap_or(0)
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.iter().map(|(m, _)| m.exponent(var)).max().unwrap_or(0)
    }

    /// One past the highest parameter index that occurs.
    pub fn width(&self) -> usize {
        self.terms.iter().map(|(m, _)| m.width()).max().unwrap_or(0)
    }

    pub fn uses_var(&self, var: usize) -> bool {
        self.terms.iter().any(|(m, _)| m.exponent(var) > 0)
    }

    pub fn vars(&self) -> Vec<usize> {
        (0..self.width()).filter(|&v| self.uses_var(v)).collect()
    }

    pub fn neg(&self) -> Self {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg_ref())).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.merge(other, false)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.merge(other, true)
    }

    fn merge(&self, other: &Self, negate: bool) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        let sign = |c: &C| if negate { c.neg_ref() } else { c.clone() };
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Greater => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Less => {
                    out.push((b[j].0.clone(), sign(&b[j].1)));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = if negate {
                        a[i].1.sub_ref(&b[j].1)
                    } else {
                        a[i].1.add_ref(&b[j].1)
                    };
                    if !c.is_zero() {
                        out.push((a[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(a[i..].iter().cloned());
        out.extend(b[j..].iter().map(|(m, c)| (m.clone(), sign(c))));
        Polynomial { terms: out }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        if let Some(c) = self.constant_value() {
            return other.scale(&c);
        }
        if let Some(c) = other.constant_value() {
            return self.scale(&c);
        }
        if other.is_monomial() {
            let (m, c) = &other.terms[0];
            return self.mul_term(m, c);
        }
        if self.is_monomial() {
            let (m, c) = &self.terms[0];
            return other.mul_term(m, c);
        }
        let mut acc: BTreeMap<Monomial, C> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                let c = ca.mul_ref(cb);
                match acc.get_mut(&m) {
                    Some(existing) => *existing = existing.add_ref(&c),
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        Polynomial {
            terms: acc.into_iter().rev().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    /// Multiplication by a single term; monomial multiplication preserves
    /// the order, so no re-sorting is needed.
    pub fn mul_term(&self, m: &Monomial, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(tm, tc)| (tm.mul(m), tc.mul_ref(c)))
                .collect(),
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        if c.is_one() {
            return self.clone();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, tc)| (m.clone(), tc.mul_ref(c))).collect(),
        }
    }

    pub fn pow(&self, exp: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Exact quotient `self / divisor`, or `None` if the division leaves a
    /// remainder.
    pub fn div_exact(&self, divisor: &Self) -> Option<Self> {
        let (lm, lc) = divisor.leading_term()?;
        if self.is_zero() {
            return Some(Self::zero());
        }
        if let Some(c) = divisor.constant_value() {
            return Some(self.scale(&C::one().div_ref(&c)?));
        }
        if divisor.is_monomial() {
            let inv = C::one().div_ref(lc)?;
            let mut terms = Vec::with_capacity(self.terms.len());
            for (m, c) in &self.terms {
                terms.push((m.div(lm)?, c.mul_ref(&inv)));
            }
            return Some(Polynomial { terms });
        }
        let mut quotient: Vec<(Monomial, C)> = Vec::new();
        let mut rem = self.clone();
        while let Some((rm, rc)) = rem.leading_term() {
            let qm = rm.div(lm)?;
            let qc = rc.div_ref(lc)?;
            rem = rem.sub(&divisor.mul_term(&qm, &qc));
            quotient.push((qm, qc));
        }
        Some(Polynomial { terms: quotient })
    }

    pub fn eval(&self, values: &[C]) -> C {
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (var, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    t = t.mul_ref(&values[var].pow(e));
                }
            }
            acc = acc.add_ref(&t);
        }
        acc
    }

    /// Evaluation modulo [`MODULUS`](crate::scalar::MODULUS); `None` if a
    /// coefficient has no residue.
    pub fn eval_residue(&self, values: &[u64]) -> Option<u64> {
        let mut acc = 0;
        for (m, c) in &self.terms {
            let mut t = c.to_residue()?;
            for (var, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    t = mul_mod(t, pow_mod(values[var], e as u64));
                }
            }
            acc = add_mod(acc, t);
        }
        Some(acc)
    }

    /// Greatest common monomial divisor of all terms.
    pub fn monomial_content(&self) -> Monomial {
        let mut iter = self.terms.iter();
        let Some((first, _)) = iter.next() else {
            return Monomial::one();
        };
        let mut g = first.clone();
        for (m, _) in iter {
            if g.is_one() {
                break;
            }
            g = g.gcd(m);
        }
        g
    }

    /// Scaled so that coefficients are coprime integers with a positive
    /// leading coefficient.
    pub fn primitive(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut s = C::primitive_scale(self.coefficients());
        if self.terms[0].1.is_negative() {
            s = s.neg_ref();
        }
        self.scale(&s)
    }

    /// Coefficients with respect to `var`, indexed by degree. Each
    /// coefficient is free of `var`.
    pub fn to_univariate(&self, var: usize) -> Vec<Polynomial<C>> {
        let deg = self.degree_in(var) as usize;
        let mut buckets: Vec<Vec<(Monomial, C)>> = vec![Vec::new(); deg + 1];
        for (m, c) in &self.terms {
            buckets[m.exponent(var) as usize].push((m.without(var), c.clone()));
        }
        // Dropping a variable shared by a whole bucket preserves the order.
        buckets.into_iter().map(|terms| Polynomial { terms }).collect()
    }

    pub fn from_univariate(var: usize, coeffs: &[Polynomial<C>]) -> Self {
        Self::from_terms(coeffs.iter().enumerate().flat_map(|(d, p)| {
            p.terms
                .iter()
                .map(move |(m, c)| (m.with_exponent(var, d as u32), c.clone()))
        }))
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> PolyDisplay<'a, C> {
        PolyDisplay { poly: self, names }
    }
}

/// Formats a polynomial with parameter names, terms in descending order.
pub struct PolyDisplay<'a, C> {
    poly: &'a Polynomial<C>,
    names: &'a [String],
}

pub(crate) fn write_monomial(
    f: &mut fmt::Formatter<'_>,
    m: &Monomial,
    names: &[String],
) -> fmt::Result {
    let mut first = true;
    for (var, &e) in m.exponents().iter().enumerate() {
        if e == 0 {
            continue;
        }
        if !first {
            f.write_str("*")?;
        }
        first = false;
        match names.get(var) {
            Some(n) => f.write_str(n)?,
            None => write!(f, "x{var}")?,
        }
        if e > 1 {
            write!(f, "^{e}")?;
        }
    }
    Ok(())
}

impl<C: Coefficient> fmt::Display for PolyDisplay<'_, C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.poly.terms.iter().enumerate() {
            let neg = c.is_negative();
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let abs = c.abs_value();
            if m.is_one() {
                write!(f, "{abs}")?;
            } else {
                if !abs.is_one() {
                    write!(f, "{abs}*")?;
                }
                write_monomial(f, m, self.names)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use num_bigint::BigInt;

    type P = Polynomial<Rational>;

    fn c(n: i64) -> Rational {
        Rational::from_integer(BigInt::from(n))
    }

    fn p() -> P {
        P::var(0)
    }

    fn q() -> P {
        P::var(1)
    }

    fn names() -> Vec<String> {
        vec!["p".into(), "q".into()]
    }

    #[test]
    fn arithmetic_basics() {
        let a = p().add(&q());
        let b = p().sub(&q());
        let prod = a.mul(&b);
        assert_eq!(prod, p().pow(2).sub(&q().pow(2)));
        assert!(p().sub(&p()).is_zero());
        assert_eq!(prod.display(&names()).to_string(), "p^2 - q^2");
    }

    #[test]
    fn exact_division() {
        let a = p().pow(2).sub(&p());
        let d = p().sub(&P::one());
        assert_eq!(a.div_exact(&d), Some(p()));
        assert_eq!(p().div_exact(&d), None);
        let e = p().mul(&q()).scale(&c(2));
        assert_eq!(e.div_exact(&P::constant(c(2))), Some(p().mul(&q())));
    }

    #[test]
    fn univariate_round_trip() {
        let f = q().mul(&p().pow(3)).add(&q()).sub(&P::constant(c(1)));
        let coeffs = f.to_univariate(0);
        assert_eq!(coeffs.len(), 4);
        assert_eq!(coeffs[3], q());
        assert_eq!(coeffs[0], q().sub(&P::one()));
        assert_eq!(P::from_univariate(0, &coeffs), f);
    }

    #[test]
    fn display_orders_terms_descending() {
        let f = P::one().sub(&q()).add(&q().mul(&p().pow(2)));
        assert_eq!(f.display(&names()).to_string(), "p^2*q - q + 1");
        let g = p().scale(&Rational::new(BigInt::from(-1), BigInt::from(2)));
        assert_eq!(g.display(&names()).to_string(), "-1/2*p");
    }

    #[test]
    fn primitive_normalises_sign_and_content() {
        let f = p().scale(&c(-4)).add(&P::constant(c(6)));
        assert_eq!(f.primitive(), p().scale(&c(2)).sub(&P::constant(c(3))));
    }

    #[test]
    fn evaluation() {
        let f = p().pow(2).mul(&q()).sub(&q());
        let half = Rational::new(BigInt::from(1), BigInt::from(2));
        assert_eq!(f.eval(&[half.clone(), c(4)]), c(-3));
    }
}
