//! Independent numeric ground truth: instantiate a parametric model at a
//! point and solve the linear systems for reachability and expected reward
//! exactly.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{StateId, Vpmc};
use crate::{RatFunc, RatValuation, Rational};

/// Markov chain with exact rational probabilities.
#[derive(Clone, PartialEq, Debug)]
pub struct ConcreteMc {
    /// States in index order; positions are used by the solvers.
    pub states: Vec<StateId>,
    /// Sparse rows indexed by position.
    pub rows: Vec<BTreeMap<usize, Rational>>,
    /// State rewards by position.
    pub reward: Vec<Rational>,
    pub initial: usize,
    pub target: usize,
}

/// Evaluates every transition and reward of `vpmc` at `v`.
///
/// Fails with [`Error::UndefinedAt`] if a denominator vanishes and with
/// [`Error::NotGraphPreserving`] if a transition evaluates outside `(0, 1]`
/// or a row sums to more than 1.
pub fn instantiate(vpmc: &Vpmc<RatFunc>, v: &RatValuation) -> Result<ConcreteMc> {
    let params = vpmc.pmc.params();
    let point = v.point(params).map_err(Error::InvalidModel)?;
    let states: Vec<StateId> = vpmc.pmc.states().collect();
    let pos: BTreeMap<StateId, usize> = states.iter().enumerate().map(|(k, s)| (*s, k)).collect();
    let zero = <Rational as Zero>::zero();
    let one = <Rational as One>::one();
    let mut rows = vec![BTreeMap::new(); states.len()];
    for (k, &s) in states.iter().enumerate() {
        let mut sum = zero.clone();
        for (t, w) in vpmc.pmc.row(s) {
            let x = w.eval(&point).ok_or_else(|| Error::UndefinedAt(v.to_string()))?;
            if x <= zero || x > one {
                return Err(Error::NotGraphPreserving(format!(
                    "transition `{}` -> `{}` evaluates to {x}",
                    vpmc.pmc.name(s),
                    vpmc.pmc.name(*t)
                )));
            }
            sum += &x;
            rows[k].insert(pos[t], x);
        }
        if sum > one {
            return Err(Error::NotGraphPreserving(format!(
                "row of `{}` sums to {sum}",
                vpmc.pmc.name(s)
            )));
        }
    }
    let mut reward = Vec::with_capacity(states.len());
    for &s in &states {
        let r = match vpmc.reward.get(&s) {
            None => zero.clone(),
            Some(w) => w.eval(&point).ok_or_else(|| Error::UndefinedAt(v.to_string()))?,
        };
        reward.push(r);
    }
    reward[pos[&vpmc.target]] = zero;
    Ok(ConcreteMc {
        initial: pos[&vpmc.initial()],
        target: pos[&vpmc.target],
        states,
        rows,
        reward,
    })
}

/// Solves `(I - P) x = b` restricted to non-target states by exact Gaussian
/// elimination and returns `x` at the initial state.
fn solve_absorbing(mc: &ConcreteMc, rhs: &[Rational]) -> Result<Rational> {
    let idx: Vec<usize> = (0..mc.states.len()).filter(|&k| k != mc.target).collect();
    let n = idx.len();
    let local: BTreeMap<usize, usize> = idx.iter().enumerate().map(|(k, g)| (*g, k)).collect();
    let mut a = vec![vec![<Rational as Zero>::zero(); n + 1]; n];
    for (r, &g) in idx.iter().enumerate() {
        a[r][r] = <Rational as One>::one();
        for (t, w) in &mc.rows[g] {
            if let Some(&c) = local.get(t) {
                a[r][c] -= w;
            }
        }
        a[r][n] = rhs[g].clone();
    }
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(Error::SingularSystem)?;
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for c in col..=n {
            let x = &a[col][c] * &inv;
            a[col][c] = x;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in col..=n {
                let x = &f * &a[col][c];
                a[r][c] -= x;
            }
        }
    }
    Ok(a[local[&mc.initial]][n].clone())
}

/// Probability of eventually reaching the target from the initial state.
pub fn numeric_reachability(mc: &ConcreteMc) -> Result<Rational> {
    if mc.initial == mc.target {
        return Ok(<Rational as One>::one());
    }
    let rhs: Vec<Rational> = (0..mc.states.len())
        .map(|k| mc.rows[k].get(&mc.target).cloned().unwrap_or_else(<Rational as Zero>::zero))
        .collect();
    solve_absorbing(mc, &rhs)
}

/// Expected reward accumulated before reaching the target:
/// `E(s) = r(s) + Σ P(s,s') E(s')`, `E(target) = 0`.
pub fn numeric_expected_reward(mc: &ConcreteMc) -> Result<Rational> {
    if mc.initial == mc.target {
        return Ok(<Rational as Zero>::zero());
    }
    solve_absorbing(mc, &mc.reward)
}

/// Draws a random point with coordinates `k/d` in `(0, 1)` (`d ≤ 12`) until
/// `vpmc` instantiates to a graph-preserving chain. Gives up after
/// `attempts` draws.
pub fn random_valuation<R: Rng + ?Sized>(
    rng: &mut R,
    vpmc: &Vpmc<RatFunc>,
    attempts: usize,
) -> Option<(RatValuation, ConcreteMc)> {
    for _ in 0..attempts {
        let mut v = RatValuation::new();
        for name in vpmc.pmc.params() {
            let d: i64 = rng.gen_range(2..=12);
            let k: i64 = rng.gen_range(1..d);
            v.insert(name, Rational::new(k.into(), d.into()));
        }
        if let Ok(mc) = instantiate(vpmc, &v) {
            return Some((v, mc));
        }
    }
    None
}

/// Decimal expansion of `x` with `digits` fractional digits, rounded half
/// away from zero.
pub fn to_decimal(x: &Rational, digits: usize) -> String {
    let scale = num_bigint::BigInt::from(10u32).pow(digits as u32);
    let scaled = (x.abs() * Rational::from_integer(scale.clone())).round().to_integer();
    let (int_part, frac_part) = scaled.div_rem(&scale);
    let sign = if x.is_negative() && !scaled.is_zero() { "-" } else { "" };
    if digits == 0 {
        return format!("{sign}{int_part}");
    }
    format!("{sign}{int_part}.{:0>width$}", frac_part.to_string(), width = digits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::gen_zeroconf;
    use crate::model::{preprocess, Pmc, RawModel};
    use crate::Field;

    fn half() -> Rational {
        Rational::new(1.into(), 2.into())
    }

    #[test]
    fn zeroconf_two_probes() {
        let (v, _) = gen_zeroconf(2);
        let val = RatValuation::new().with("p", half()).with("q", half());
        let mc = instantiate(&v, &val).unwrap();
        let i = mc.states.iter().position(|s| v.pmc.name(*s) == "i").unwrap();
        assert_eq!(mc.rows[i].values().sum::<Rational>(), half());
        assert_eq!(numeric_reachability(&mc).unwrap(), Rational::new(1.into(), 5.into()));
    }

    #[test]
    fn rejects_vanishing_and_large_entries() {
        let (v, _) = gen_zeroconf(2);
        let zero = RatValuation::new().with("p", <Rational as Zero>::zero()).with("q", half());
        assert!(matches!(instantiate(&v, &zero), Err(Error::NotGraphPreserving(_))));
        let big = RatValuation::new().with("p", half()).with("q", Rational::from_integer(2.into()));
        assert!(matches!(instantiate(&v, &big), Err(Error::NotGraphPreserving(_))));
    }

    #[test]
    fn decimal_rounding() {
        let r = |n: i64, d: i64| Rational::new(n.into(), d.into());
        assert_eq!(to_decimal(&r(1, 3), 4), "0.3333");
        assert_eq!(to_decimal(&r(2, 3), 2), "0.67");
        assert_eq!(to_decimal(&r(-1, 8), 2), "-0.13");
        assert_eq!(to_decimal(&r(-1, 1000), 2), "0.00");
        assert_eq!(to_decimal(&r(7, 2), 0), "4");
        assert_eq!(to_decimal(&r(5, 1), 3), "5.000");
    }

    #[test]
    fn self_loop_reward() {
        let mut pmc: Pmc<RatFunc> = Pmc::new(Vec::new());
        let a = pmc.add_state("a").unwrap();
        let t = pmc.add_state("t").unwrap();
        pmc.set_initial(a);
        pmc.set(a, a, RatFunc::constant(half()));
        pmc.set(a, t, RatFunc::constant(half()));
        let raw = RawModel {
            pmc,
            targets: [t].into_iter().collect(),
            volatile: Default::default(),
            reward: [(a, RatFunc::one())].into_iter().collect(),
        };
        let v = preprocess(&raw).unwrap();
        let mc = instantiate(&v, &RatValuation::new()).unwrap();
        assert_eq!(numeric_reachability(&mc).unwrap(), <Rational as One>::one());
        assert_eq!(numeric_expected_reward(&mc).unwrap(), Rational::from_integer(2.into()));
    }
}
