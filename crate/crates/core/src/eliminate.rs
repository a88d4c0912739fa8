//! State elimination for reachability probabilities and expected
//! accumulated rewards.
//!
//! Eliminating `e` reroutes every path `s1 -> e -> s2` into a direct
//! transition carrying `P(s1,e) * 1/(1 - P(e,e)) * P(e,s2)`; rewards of
//! predecessors absorb `P(s1,e) * r(e) / (1 - P(e,e))`, the reward collected
//! on the expected number of visits to `e`. Eliminating every state except
//! the initial state and the target leaves the reachability probability in
//! `P(s0, st)` and the expected reward in `r(s0)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::metrics::MetricsCounter;
use crate::model::{Pmc, StateId, Vpmc};
use crate::scalar::Field;

/// How a predecessor's reward absorbs the reward of an eliminated state.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum RewardFactor {
    /// `r(s1) += P(s1,e) * r(e) / (1 - P(e,e))`: reward per expected visit.
    #[default]
    ExpectedVisits,
    /// `r(s1) += P(s1,e) * P(e,e) / (1 - P(e,e)) * r(e)`: counts only the
    /// expected number of self transitions and so drops the first visit.
    /// Kept for comparison; it does not compute expected rewards.
    SelfTransitionsOnly,
}

/// Receives every contribution made while eliminating a state.
pub trait EliminationObserver<W> {
    /// Probability mass `p` added to `P(s1, s2)` through `e`.
    fn contribution(&mut self, _e: StateId, _s1: StateId, _s2: StateId, _p: &W) {}
    /// Reward `c` added to `r(s1)` through `e`.
    fn reward_contribution(&mut self, _e: StateId, _s1: StateId, _c: &W) {}
}

impl<W> EliminationObserver<W> for () {}

/// Adds `value` into `slot`, counting an addition only when a value is
/// already present. Entries that cancel to zero are removed.
pub(crate) fn accumulate<W: Field, K: Ord>(
    map: &mut BTreeMap<K, W>,
    key: K,
    value: &W,
    counter: &MetricsCounter,
) {
    match map.get_mut(&key) {
        Some(existing) => {
            let sum = counter.add(existing, value);
            if sum.is_zero() {
                map.remove(&key);
            } else {
                *existing = sum;
            }
        }
        None => {
            if !value.is_zero() {
                map.insert(key, value.clone());
            }
        }
    }
}

fn accumulate_entry<W: Field>(
    pmc: &mut Pmc<W>,
    s1: StateId,
    s2: StateId,
    value: &W,
    counter: &MetricsCounter,
) {
    let sum = match pmc.get(s1, s2) {
        Some(existing) => counter.add(existing, value),
        None => value.clone(),
    };
    pmc.set(s1, s2, sum);
}

/// Eliminates `e`, reporting each contribution to `observer`.
///
/// Pairs with `s1 = e` or `s2 = e` are skipped; the self-loop is consumed by
/// the `1/(1 - P(e,e))` factor. When `reward` is given, predecessor rewards
/// are updated according to `factor`.
pub fn eliminate_with<W: Field, O: EliminationObserver<W>>(
    pmc: &mut Pmc<W>,
    reward: Option<&mut BTreeMap<StateId, W>>,
    e: StateId,
    factor: RewardFactor,
    counter: &MetricsCounter,
    observer: &mut O,
) -> Result<()> {
    if !pmc.contains(e) {
        return Err(Error::UnknownState(e.to_string()));
    }
    let self_loop = pmc.take(e, e);
    let inv = match &self_loop {
        None => None,
        Some(c) => {
            let d = counter.sub(&W::one(), c);
            if d.is_zero() {
                return Err(Error::IdenticallyOneSelfLoop(pmc.name(e).to_string()));
            }
            Some(counter.div(&W::one(), &d).expect("nonzero divisor"))
        }
    };
    let preds: Vec<(StateId, W)> = pmc
        .predecessors(e)
        .iter()
        .map(|&s1| (s1, pmc.get(s1, e).cloned().expect("predecessor entry")))
        .collect();
    let succs: Vec<(StateId, W)> = pmc.row(e).iter().map(|(s, w)| (*s, w.clone())).collect();

    let mut reward = reward;
    let r_e = reward
        .as_ref()
        .and_then(|r| r.get(&e).cloned())
        .filter(|w| !w.is_zero());
    // Reward factor independent of the predecessor, for the self-transition variant.
    let printed = match (&r_e, factor) {
        (Some(r), RewardFactor::SelfTransitionsOnly) => Some(match (&self_loop, &inv) {
            (Some(c), Some(inv)) => {
                let ratio = counter.mul(c, inv);
                counter.mul(&ratio, r)
            }
            _ => W::zero(),
        }),
        _ => None,
    };

    for (s1, p_s1_e) in &preds {
        let a = match &inv {
            Some(inv) => counter.mul(p_s1_e, inv),
            None => p_s1_e.clone(),
        };
        if let (Some(r), Some(rewards)) = (&r_e, reward.as_deref_mut()) {
            let c = match &printed {
                None => counter.mul(&a, r),
                Some(f) if f.is_zero() => W::zero(),
                Some(f) => counter.mul(p_s1_e, f),
            };
            if !c.is_zero() {
                observer.reward_contribution(e, *s1, &c);
                accumulate(rewards, *s1, &c, counter);
            }
        }
        for (s2, p_e_s2) in &succs {
            let p = counter.mul(&a, p_e_s2);
            observer.contribution(e, *s1, *s2, &p);
            accumulate_entry(pmc, *s1, *s2, &p, counter);
        }
    }
    pmc.remove_state(e);
    if let Some(rewards) = reward {
        rewards.remove(&e);
    }
    counter.record_elimination();
    Ok(())
}

/// Eliminates `e` from the probability matrix.
pub fn eliminate_state<W: Field>(pmc: &mut Pmc<W>, e: StateId, counter: &MetricsCounter) -> Result<()> {
    eliminate_with(pmc, None, e, RewardFactor::ExpectedVisits, counter, &mut ())
}

/// Eliminates `e` from the probability matrix and the reward function.
pub fn eliminate_state_rewards<W: Field>(
    pmc: &mut Pmc<W>,
    reward: &mut BTreeMap<StateId, W>,
    e: StateId,
    factor: RewardFactor,
    counter: &MetricsCounter,
) -> Result<()> {
    eliminate_with(pmc, Some(reward), e, factor, counter, &mut ())
}

/// Ranking of the eliminable states (all but the initial state and target).
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct EliminationOrder {
    seq: Vec<StateId>,
    rank: HashMap<StateId, usize>,
}

impl EliminationOrder {
    pub fn from_sequence(seq: Vec<StateId>) -> Self {
        let rank = seq.iter().enumerate().map(|(i, s)| (*s, i + 1)).collect();
        EliminationOrder { seq, rank }
    }

    /// States in elimination order.
    pub fn sequence(&self) -> &[StateId] {
        &self.seq
    }

    /// 1-based rank.
    pub fn rank(&self, s: StateId) -> Option<usize> {
        self.rank.get(&s).copied()
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// Checks that the order is a bijection onto the eliminable states of
    /// `vpmc` and that every non-volatile state precedes every volatile one.
    pub fn check<W: Field>(&self, vpmc: &Vpmc<W>) -> Result<()> {
        let eliminable: BTreeSet<StateId> = eliminable_states(vpmc).collect();
        let listed: BTreeSet<StateId> = self.seq.iter().copied().collect();
        if listed.len() != self.seq.len() || listed != eliminable {
            return Err(Error::InvalidModel(
                "elimination order is not a bijection onto the eliminable states".into(),
            ));
        }
        let mut seen_volatile = false;
        for s in &self.seq {
            let v = vpmc.volatile.contains(s);
            if seen_volatile && !v {
                return Err(Error::InvalidModel(format!(
                    "non-volatile state `{}` is ranked after a volatile state",
                    vpmc.pmc.name(*s)
                )));
            }
            seen_volatile |= v;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum OrderHeuristic {
    /// State index order.
    #[default]
    InputOrder,
    /// Greedy minimum degree with simulated fill-in.
    MinDegree,
}

fn eliminable_states<W: Field>(vpmc: &Vpmc<W>) -> impl Iterator<Item = StateId> + '_ {
    let s0 = vpmc.initial();
    let st = vpmc.target;
    vpmc.pmc.states().filter(move |&s| s != s0 && s != st)
}

/// Builds an order with all non-volatile states before all volatile ones;
/// ties are broken by state index.
pub fn make_order<W: Field>(vpmc: &Vpmc<W>, heuristic: OrderHeuristic) -> EliminationOrder {
    let (stable, volatile): (Vec<StateId>, Vec<StateId>) =
        eliminable_states(vpmc).partition(|s| !vpmc.volatile.contains(s));
    match heuristic {
        OrderHeuristic::InputOrder => {
            EliminationOrder::from_sequence(stable.into_iter().chain(volatile).collect())
        }
        OrderHeuristic::MinDegree => {
            let mut succ: BTreeMap<StateId, BTreeSet<StateId>> = BTreeMap::new();
            let mut pred: BTreeMap<StateId, BTreeSet<StateId>> = BTreeMap::new();
            for s in vpmc.pmc.states() {
                succ.insert(s, vpmc.pmc.successors(s).filter(|&t| t != s).collect());
                pred.insert(s, vpmc.pmc.predecessors(s).iter().copied().filter(|&t| t != s).collect());
            }
            let mut seq = Vec::new();
            for group in [stable, volatile] {
                let mut left: BTreeSet<StateId> = group.into_iter().collect();
                while !left.is_empty() {
                    let e = *left
                        .iter()
                        .min_by_key(|s| (pred[s].union(&succ[s]).count(), **s))
                        .expect("nonempty");
                    left.remove(&e);
                    seq.push(e);
                    let ps = pred.remove(&e).unwrap_or_default();
                    let ss = succ.remove(&e).unwrap_or_default();
                    for p in &ps {
                        let row = succ.get_mut(p).expect("live predecessor");
                        row.remove(&e);
                        row.extend(ss.iter().copied().filter(|s| s != p));
                    }
                    for s in &ss {
                        let col = pred.get_mut(s).expect("live successor");
                        col.remove(&e);
                        col.extend(ps.iter().copied().filter(|p| p != s));
                    }
                }
            }
            EliminationOrder::from_sequence(seq)
        }
    }
}

/// Eliminates every state of `order` from a copy of the model and returns
/// the resulting `P(s0, st)` (zero if absent).
pub fn solve_reachability<W: Field>(
    vpmc: &Vpmc<W>,
    order: &EliminationOrder,
    counter: &MetricsCounter,
) -> Result<W> {
    order.check_cover(vpmc)?;
    let mut pmc = vpmc.pmc.clone();
    for &e in order.sequence() {
        eliminate_state(&mut pmc, e, counter)?;
    }
    Ok(pmc.get(vpmc.initial(), vpmc.target).cloned().unwrap_or_else(W::zero))
}

/// Expected reward accumulated before reaching the target: eliminates every
/// state of `order` and returns the reward gathered on the initial state.
pub fn solve_expected_reward<W: Field>(
    vpmc: &Vpmc<W>,
    order: &EliminationOrder,
    factor: RewardFactor,
    counter: &MetricsCounter,
) -> Result<W> {
    order.check_cover(vpmc)?;
    let mut pmc = vpmc.pmc.clone();
    let mut reward = vpmc.reward.clone();
    reward.remove(&vpmc.target);
    for &e in order.sequence() {
        eliminate_state_rewards(&mut pmc, &mut reward, e, factor, counter)?;
    }
    Ok(reward.get(&vpmc.initial()).cloned().unwrap_or_else(W::zero))
}

impl EliminationOrder {
    /// Weaker check used by the solvers: every eliminable state is listed
    /// exactly once (the volatile-last constraint is irrelevant there).
    fn check_cover<W: Field>(&self, vpmc: &Vpmc<W>) -> Result<()> {
        let eliminable: BTreeSet<StateId> = eliminable_states(vpmc).collect();
        let listed: BTreeSet<StateId> = self.seq.iter().copied().collect();
        if listed.len() != self.seq.len() || listed != eliminable {
            return Err(Error::InvalidModel(
                "elimination order does not cover the eliminable states exactly".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preprocess, RawModel};
    use crate::ratfunc::parse::parse_expression;
    use crate::{RatFunc, Rational};
    use num_bigint::BigInt;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    /// `s0 -> e -> t` plus optional self-loop on `e`, as a preprocessed model.
    fn chain(self_loop: Option<Rational>, r_e: Rational) -> Vpmc<Rational> {
        let mut pmc = Pmc::new(vec![]);
        let s0 = pmc.add_state("s0").unwrap();
        let e = pmc.add_state("e").unwrap();
        let t = pmc.add_state("t").unwrap();
        pmc.set_initial(s0);
        pmc.set(s0, e, Rational::one());
        match self_loop {
            Some(c) => {
                pmc.set(e, t, Rational::one().sub_ref(&c));
                pmc.set(e, e, c);
            }
            None => pmc.set(e, t, Rational::one()),
        }
        let raw = RawModel {
            pmc,
            targets: [t].into_iter().collect(),
            volatile: BTreeSet::new(),
            reward: [(e, r_e)].into_iter().collect(),
        };
        preprocess(&raw).unwrap()
    }

    #[test]
    fn elimination_through_self_loop() {
        let mut pmc: Pmc<Rational> = Pmc::new(vec![]);
        let s1 = pmc.add_state("s1").unwrap();
        let e = pmc.add_state("e").unwrap();
        let s2 = pmc.add_state("s2").unwrap();
        pmc.set(s1, e, r(1, 2));
        pmc.set(e, e, r(1, 2));
        pmc.set(e, s2, r(1, 2));
        let m = MetricsCounter::new();
        eliminate_state(&mut pmc, e, &m).unwrap();
        assert_eq!(pmc.get(s1, s2), Some(&r(1, 2)));
        assert!(!pmc.contains(e));
        assert_eq!(m.snapshot().eliminations, 1);
    }

    #[test]
    fn identically_one_self_loop_is_rejected() {
        let mut pmc: Pmc<Rational> = Pmc::new(vec![]);
        let e = pmc.add_state("e").unwrap();
        pmc.set(e, e, Rational::one());
        let err = eliminate_state(&mut pmc, e, &MetricsCounter::new()).unwrap_err();
        assert_eq!(err, Error::IdenticallyOneSelfLoop("e".into()));
    }

    #[test]
    fn reward_factors() {
        let m = MetricsCounter::new();
        let v = chain(None, r(3, 1));
        let order = make_order(&v, OrderHeuristic::InputOrder);
        assert_eq!(solve_expected_reward(&v, &order, RewardFactor::ExpectedVisits, &m), Ok(r(3, 1)));
        assert_eq!(
            solve_expected_reward(&v, &order, RewardFactor::SelfTransitionsOnly, &m),
            Ok(r(0, 1))
        );
        let v = chain(Some(r(1, 2)), r(1, 1));
        let order = make_order(&v, OrderHeuristic::InputOrder);
        assert_eq!(solve_expected_reward(&v, &order, RewardFactor::ExpectedVisits, &m), Ok(r(2, 1)));
        assert_eq!(solve_reachability(&v, &order, &m), Ok(r(1, 1)));
    }

    #[test]
    fn zero_rewards_stay_zero() {
        let v = chain(Some(r(1, 3)), r(0, 1));
        let order = make_order(&v, OrderHeuristic::InputOrder);
        let m = MetricsCounter::new();
        assert_eq!(solve_expected_reward(&v, &order, RewardFactor::ExpectedVisits, &m), Ok(r(0, 1)));
    }

    #[test]
    fn single_transition_model_costs_nothing() {
        let mut pmc: Pmc<RatFunc> = Pmc::new(vec![]);
        let a = pmc.add_state("a").unwrap();
        let b = pmc.add_state("b").unwrap();
        pmc.set_initial(a);
        pmc.set(a, b, RatFunc::one());
        let raw = RawModel {
            pmc,
            targets: [b].into_iter().collect(),
            volatile: BTreeSet::new(),
            reward: BTreeMap::new(),
        };
        let v = preprocess(&raw).unwrap();
        let m = MetricsCounter::new();
        let order = make_order(&v, OrderHeuristic::InputOrder);
        assert!(order.is_empty());
        assert_eq!(solve_reachability(&v, &order, &m), Ok(RatFunc::one()));
        assert_eq!(m.snapshot().total(), 0);
        assert_eq!(m.snapshot().eliminations, 0);
    }

    #[test]
    fn min_degree_prefers_leaves_and_respects_volatile() {
        // star: hub h with leaves l1..l3, all non-volatile.
        let params = vec!["p".to_string()];
        let f = |t: &str| -> RatFunc { parse_expression(t, &params).unwrap() };
        let mut pmc: Pmc<RatFunc> = Pmc::new(params.clone());
        let s0 = pmc.add_state("s0").unwrap();
        let h = pmc.add_state("h").unwrap();
        let leaves: Vec<StateId> = (1..=3).map(|i| pmc.add_state(&format!("l{i}")).unwrap()).collect();
        let t = pmc.add_state("t").unwrap();
        pmc.set_initial(s0);
        pmc.set(s0, h, f("1"));
        for &l in &leaves {
            pmc.set(h, l, f("1/3"));
            pmc.set(l, h, f("1-p"));
            pmc.set(l, t, f("p"));
        }
        let raw = RawModel {
            pmc,
            targets: [t].into_iter().collect(),
            volatile: BTreeSet::new(),
            reward: BTreeMap::new(),
        };
        let v = preprocess(&raw).unwrap();
        let order = make_order(&v, OrderHeuristic::MinDegree);
        assert_eq!(order.sequence().last(), Some(&h));
        order.check(&v).unwrap();
        let m = MetricsCounter::new();
        let a = solve_reachability(&v, &order, &m).unwrap();
        let b = solve_reachability(&v, &make_order(&v, OrderHeuristic::InputOrder), &m).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, RatFunc::one());

        let mut v2 = v.clone();
        v2.volatile.insert(leaves[0]);
        let order = make_order(&v2, OrderHeuristic::MinDegree);
        assert_eq!(order.sequence().last(), Some(&leaves[0]));
        order.check(&v2).unwrap();
    }
}
