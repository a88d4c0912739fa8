//! Counting of rational-function arithmetic, the cost measure for comparing
//! from-scratch and incremental solving.
//!
//! Every field operation issued by the elimination algorithms goes through
//! a [`MetricsCounter`] and counts as exactly one operation of its kind,
//! whatever the size of the operands. Normalisation is part of the
//! operation that produced the value and is not counted separately.

use std::fmt;
use std::ops::Sub;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::scalar::Field;

#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct OpCounts {
    pub adds: u64,
    pub subs: u64,
    pub muls: u64,
    pub divs: u64,
    /// Number of states genuinely eliminated (not counted in [`total`](Self::total)).
    pub eliminations: u64,
}

impl OpCounts {
    /// Total arithmetic operations.
    pub fn total(&self) -> u64 {
        self.adds + self.subs + self.muls + self.divs
    }
}

impl Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, rhs: OpCounts) -> OpCounts {
        OpCounts {
            adds: self.adds - rhs.adds,
            subs: self.subs - rhs.subs,
            muls: self.muls - rhs.muls,
            divs: self.divs - rhs.divs,
            eliminations: self.eliminations - rhs.eliminations,
        }
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ops={} (add={} sub={} mul={} div={}) eliminations={}",
            self.total(),
            self.adds,
            self.subs,
            self.muls,
            self.divs,
            self.eliminations
        )
    }
}

/// Thread-safe operation counter; monotone until [`reset`](Self::reset).
#[derive(Default, Debug)]
pub struct MetricsCounter {
    adds: AtomicU64,
    subs: AtomicU64,
    muls: AtomicU64,
    divs: AtomicU64,
    eliminations: AtomicU64,
}

impl MetricsCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<W: Field>(&self, a: &W, b: &W) -> W {
        self.adds.fetch_add(1, Ordering::Relaxed);
        a.add_ref(b)
    }

    pub fn sub<W: Field>(&self, a: &W, b: &W) -> W {
        self.subs.fetch_add(1, Ordering::Relaxed);
        a.sub_ref(b)
    }

    pub fn mul<W: Field>(&self, a: &W, b: &W) -> W {
        self.muls.fetch_add(1, Ordering::Relaxed);
        a.mul_ref(b)
    }

    /// `None` if `b` is zero.
    pub fn div<W: Field>(&self, a: &W, b: &W) -> Option<W> {
        self.divs.fetch_add(1, Ordering::Relaxed);
        a.div_ref(b)
    }

    pub fn record_elimination(&self) {
        self.eliminations.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            adds: self.adds.load(Ordering::Relaxed),
            subs: self.subs.load(Ordering::Relaxed),
            muls: self.muls.load(Ordering::Relaxed),
            divs: self.divs.load(Ordering::Relaxed),
            eliminations: self.eliminations.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for c in [
            &self.adds,
            &self.subs,
            &self.muls,
            &self.divs,
            &self.eliminations,
        ] {
            c.store(0, Ordering::Relaxed);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_each_operation_once() {
        let m = MetricsCounter::new();
        let x = m.add(&1.0f64, &2.0);
        let y = m.mul(&x, &x);
        let z = m.sub(&y, &1.0);
        assert_eq!(m.div(&z, &0.0), None);
        m.record_elimination();
        let s = m.snapshot();
        assert_eq!((s.adds, s.subs, s.muls, s.divs, s.eliminations), (1, 1, 1, 1, 1));
        assert_eq!(s.total(), 4);
        m.reset();
        assert_eq!(m.snapshot(), OpCounts::default());
    }

    #[test]
    fn snapshots_subtract() {
        let m = MetricsCounter::new();
        m.add(&1.0f64, &1.0);
        let before = m.snapshot();
        m.add(&1.0f64, &1.0);
        m.mul(&1.0f64, &1.0);
        assert_eq!((m.snapshot() - before).total(), 2);
    }
}
