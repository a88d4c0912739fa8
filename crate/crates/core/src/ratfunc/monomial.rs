use std::cmp::Ordering;

use smallvec::SmallVec;

/// Power product over parameters indexed by position.
///
/// Trailing zero exponents are never stored, so the same monomial has one
/// representation regardless of how many parameters a model declares.
/// Ordered graded-lexicographically with parameter 0 as the most
/// significant variable.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Monomial(SmallVec<[u32; 4]>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn var(index: usize, exponent: u32) -> Self {
        let mut m = Monomial(SmallVec::from_elem(0, index + 1));
        m.0[index] = exponent;
        m.trim();
        m
    }

    pub fn from_exponents(exponents: &[u32]) -> Self {
        let mut m = Monomial(SmallVec::from_slice(exponents));
        m.trim();
        m
    }

    fn trim(&mut self) {
        while self.0.last() == Some(&0) {
            self.0.pop();
        }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn exponent(&self, var: usize) -> u32 {
        self.0.get(var).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    /// One past the highest parameter index that occurs.
    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (long, short) = if self.0.len() >= other.0.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = long.0.clone();
        for (o, s) in out.iter_mut().zip(short.0.iter()) {
            *o += s;
        }
        Monomial(out)
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.len() <= other.0.len() && self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    /// `self / divisor`, if exact.
    pub fn div(&self, divisor: &Monomial) -> Option<Monomial> {
        if !divisor.divides(self) {
            return None;
        }
        let mut out = self.0.clone();
        for (o, d) in out.iter_mut().zip(divisor.0.iter()) {
            *o -= d;
        }
        let mut m = Monomial(out);
        m.trim();
        Some(m)
    }

    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out: SmallVec<[u32; 4]> = self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| *a.min(b))
            .collect();
        while out.last() == Some(&0) {
            out.pop();
        }
        Monomial(out)
    }

    /// Copy with the exponent of `var` set to zero.
    pub fn without(&self, var: usize) -> Monomial {
        if var >= self.0.len() {
            return self.clone();
        }
        let mut out = self.0.clone();
        out[var] = 0;
        let mut m = Monomial(out);
        m.trim();
        m
    }

    pub fn with_exponent(&self, var: usize, exponent: u32) -> Monomial {
        let mut out = self.0.clone();
        if out.len() <= var {
            out.resize(var + 1, 0);
        }
        out[var] = exponent;
        let mut m = Monomial(out);
        m.trim();
        m
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let n = self.0.len().max(other.0.len());
            for i in 0..n {
                match self.exponent(i).cmp(&other.exponent(i)) {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order() {
        let p2 = Monomial::var(0, 2);
        let pq = Monomial::from_exponents(&[1, 1]);
        let q2 = Monomial::var(1, 2);
        let p = Monomial::var(0, 1);
        let q3 = Monomial::var(1, 3);
        assert!(p2 > pq && pq > q2);
        assert!(q2 > p);
        assert!(q3 > p2);
        assert!(p > Monomial::one());
    }

    #[test]
    fn trailing_zeros_are_canonical() {
        assert_eq!(Monomial::from_exponents(&[1, 0, 0]), Monomial::var(0, 1));
        assert_eq!(Monomial::var(2, 0), Monomial::one());
        let m = Monomial::from_exponents(&[1, 2]);
        assert_eq!(m.without(1), Monomial::var(0, 1));
        assert_eq!(m.div(&Monomial::var(1, 2)), Some(Monomial::var(0, 1)));
        assert_eq!(m.div(&Monomial::var(1, 3)), None);
        assert_eq!(m.gcd(&Monomial::from_exponents(&[3, 1])), Monomial::from_exponents(&[1, 1]));
    }
}
